#include "retypelab/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "retypelab/parallel.hpp"
#include "retypelab/rng.hpp"

namespace retypelab::msel {

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

std::vector<std::pair<std::vector<int>, std::vector<int>>> stratified_kfold(
    const std::vector<int>& labels, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
  int n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  }

  Rng rng(seed);
  std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (static_cast<int>(members.size()) < k) {
      throw std::invalid_argument("stratified_kfold: class " + std::to_string(c) + " has " +
                                  std::to_string(members.size()) + " rows, fewer than k=" +
                                  std::to_string(k));
    }
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i) {
      folds[i % static_cast<std::size_t>(k)].push_back(members[i]);
    }
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());

  std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
  for (int f = 0; f < k; ++f) {
    std::vector<int> train;
    for (int g = 0; g < k; ++g) {
      if (g == f) continue;
      train.insert(train.end(), folds[static_cast<std::size_t>(g)].begin(),
                   folds[static_cast<std::size_t>(g)].end());
    }
    std::sort(train.begin(), train.end());
    out.emplace_back(std::move(train), folds[static_cast<std::size_t>(f)]);
  }
  return out;
}

std::pair<std::vector<int>, std::vector<int>> stratified_split(const std::vector<int>& labels,
                                                               double test_fraction,
                                                               std::uint64_t seed) {
  int n_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  }
  Rng rng(seed);
  std::vector<int> train, test;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < 2) {
      throw std::invalid_argument("stratified_split: class " + std::to_string(c) +
                                  " has fewer than 2 rows");
    }
    rng.shuffle(members);
    auto n_test = static_cast<std::size_t>(
        std::lround(test_fraction * static_cast<double>(members.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
    test.insert(test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

// ---------------------------------------------------------------------------
// CV evaluation
// ---------------------------------------------------------------------------

namespace {

data::Dataset take_rows(const data::Dataset& d, const std::vector<int>& rows) {
  data::Dataset out;
  out.scheme = d.scheme;
  out.vocab = d.vocab;
  for (int r : rows) {
    out.rows.push_back(d.rows[static_cast<std::size_t>(r)]);
    out.labels.push_back(d.labels[static_cast<std::size_t>(r)]);
    out.row_names.push_back(d.row_names[static_cast<std::size_t>(r)]);
  }
  return out;
}

double accuracy_of(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.empty()) return 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace

double cv_accuracy(const data::Dataset& dataset, const ml::ModelSpec& spec, std::uint64_t seed,
                   std::vector<double>* fold_accuracies) {
  auto folds = stratified_kfold(dataset.labels, 3, seed);
  std::vector<double> accs(folds.size(), 0.0);
  par::parallel_for(static_cast<std::int64_t>(folds.size()), [&](std::int64_t f) {
    const auto& [train_idx, test_idx] = folds[static_cast<std::size_t>(f)];
    data::Dataset train_set = take_rows(dataset, train_idx);
    data::Dataset test_set = take_rows(dataset, test_idx);
    ml::ModelSpec fold_spec = spec;
    fold_spec.rng_seed = seed + static_cast<std::uint64_t>(f);
    ml::TrainedModel model = ml::train(fold_spec, train_set);
    accs[static_cast<std::size_t>(f)] = accuracy_of(ml::predict_dataset(model, test_set), test_set.labels);
  });
  if (fold_accuracies) *fold_accuracies = accs;
  double mean = 0.0;
  for (double a : accs) mean += a;
  return mean / static_cast<double>(accs.size());
}

// ---------------------------------------------------------------------------
// Feature selection
// ---------------------------------------------------------------------------

std::string SelectionMethod::name() const {
  if (kind == Kind::RecursiveElimination) return "rfe";
  std::string src = importance_source == "extra_trees" ? "et" : "rf";
  std::string thr = threshold == Threshold::Mean ? "mean" : "median";
  return "sfm_" + src + "_" + thr;
}

SelectionMethod SelectionMethod::parse(const std::string& name) {
  SelectionMethod m;
  if (name == "rfe") {
    m.kind = Kind::RecursiveElimination;
    return m;
  }
  if (name.rfind("sfm_", 0) == 0) {
    std::string rest = name.substr(4);
    auto underscore = rest.find('_');
    if (underscore != std::string::npos) {
      std::string src = rest.substr(0, underscore);
      std::string thr = rest.substr(underscore + 1);
      if ((src == "rf" || src == "et") && (thr == "mean" || thr == "median")) {
        m.kind = Kind::SelectFromModel;
        m.importance_source = src == "rf" ? "random_forest" : "extra_trees";
        m.threshold = thr == "mean" ? Threshold::Mean : Threshold::Median;
        return m;
      }
    }
  }
  throw std::invalid_argument("unknown selection method '" + name + "'");
}

std::vector<SelectionMethod> default_selection_methods() {
  std::vector<SelectionMethod> methods;
  for (const char* src : {"random_forest", "extra_trees"}) {
    for (auto thr : {SelectionMethod::Threshold::Mean, SelectionMethod::Threshold::Median}) {
      SelectionMethod m;
      m.kind = SelectionMethod::Kind::SelectFromModel;
      m.importance_source = src;
      m.threshold = thr;
      methods.push_back(m);
    }
  }
  SelectionMethod rfe;
  rfe.kind = SelectionMethod::Kind::RecursiveElimination;
  methods.push_back(rfe);
  return methods;
}

namespace {

std::vector<double> source_importances(const data::Dataset& dataset, const std::string& source,
                                       std::uint64_t seed) {
  ml::ModelSpec spec;
  spec.algorithm = source;
  spec.params["n_trees"] = "50";
  spec.rng_seed = seed;
  return ml::train(spec, dataset).feature_importances();
}

std::vector<int> threshold_select(const std::vector<double>& importances,
                                  SelectionMethod::Threshold threshold) {
  double cut = 0.0;
  if (threshold == SelectionMethod::Threshold::Mean) {
    for (double v : importances) cut += v;
    cut /= static_cast<double>(importances.size());
  } else {
    std::vector<double> sorted(importances);
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    cut = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }
  std::vector<int> selected;
  for (std::size_t i = 0; i < importances.size(); ++i) {
    if (importances[i] >= cut) selected.push_back(static_cast<int>(i));
  }
  return selected;
}

SelectionResult run_method(const data::Dataset& dataset, const ml::ModelSpec& classifier,
                           const SelectionMethod& method, std::uint64_t seed) {
  SelectionResult result;
  result.method = method;

  if (method.kind == SelectionMethod::Kind::SelectFromModel) {
    auto importances = source_importances(dataset, method.importance_source, seed);
    result.selected = threshold_select(importances, method.threshold);
    if (result.selected.empty()) return result;  // degenerate; caller skips
    data::Dataset reduced = data::select_columns(dataset, result.selected);
    result.cv_accuracy = cv_accuracy(reduced, classifier, seed, &result.fold_accuracies);
    return result;
  }

  // Recursive elimination: drop the lowest-importance step fraction each
  // round, re-evaluating by CV; keep the best-scoring feature count.
  std::vector<int> current(static_cast<std::size_t>(dataset.n_features()));
  for (int i = 0; i < dataset.n_features(); ++i) current[static_cast<std::size_t>(i)] = i;

  double best_acc = -1.0;
  std::vector<int> best_set;
  std::vector<double> best_folds;
  while (!current.empty()) {
    data::Dataset reduced = data::select_columns(dataset, current);
    std::vector<double> folds;
    double acc = cv_accuracy(reduced, classifier, seed, &folds);
    if (acc > best_acc) {
      best_acc = acc;
      best_set = current;
      best_folds = folds;
    }
    if (current.size() == 1) break;
    auto importances = source_importances(reduced, method.importance_source, seed);
    auto drop = static_cast<std::size_t>(std::ceil(method.elimination_step_fraction *
                                                   static_cast<double>(current.size())));
    drop = std::clamp<std::size_t>(drop, 1, current.size() - 1);
    // order columns by (importance asc, index asc) and drop the weakest
    std::vector<std::size_t> order(current.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (importances[a] != importances[b]) return importances[a] < importances[b];
      return a < b;
    });
    std::vector<bool> dead(current.size(), false);
    for (std::size_t i = 0; i < drop; ++i) dead[order[i]] = true;
    std::vector<int> next;
    for (std::size_t i = 0; i < current.size(); ++i) {
      if (!dead[i]) next.push_back(current[i]);
    }
    current = std::move(next);
  }
  result.selected = best_set;
  result.cv_accuracy = best_acc;
  result.fold_accuracies = best_folds;
  return result;
}

}  // namespace

SelectionResult select_features(const data::Dataset& dataset, const ml::ModelSpec& classifier,
                                const std::vector<SelectionMethod>& methods, std::uint64_t seed,
                                std::vector<SelectionResult>* all_results) {
  if (methods.empty()) throw std::invalid_argument("select_features: no methods given");
  std::vector<SelectionResult> results;
  for (const auto& method : methods) {
    SelectionResult r = run_method(dataset, classifier, method, seed);
    if (r.selected.empty()) continue;  // method degenerated to an empty set
    results.push_back(std::move(r));
  }
  if (results.empty()) {
    throw std::runtime_error("select_features: every method degenerated to an empty feature set");
  }
  if (all_results) *all_results = results;

  // Highest accuracy wins; within the tie tolerance the smaller feature set
  // wins.
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].cv_accuracy > results[best].cv_accuracy) best = i;
  }
  std::size_t chosen = best;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[best].cv_accuracy - results[i].cv_accuracy < kSelectionTieTolerance &&
        results[i].selected.size() < results[chosen].selected.size()) {
      chosen = i;
    }
  }
  return results[chosen];
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

GridSpec default_grid(const std::string& algorithm) {
  GridSpec grid;
  if (algorithm == "decision_tree") {
    grid.values["max_depth"] = {"8", "12", "0"};
  } else if (algorithm == "random_forest" || algorithm == "extra_trees") {
    grid.values["n_trees"] = {"50", "100"};
  } else if (algorithm == "gradient_boosting") {
    grid.values["rounds"] = {"100", "200"};
    grid.values["shrinkage"] = {"0.1", "0.3"};
  } else if (algorithm == "bernoulli_nb") {
    grid.values["alpha"] = {"0.5", "1.0"};
  } else if (algorithm == "knn") {
    grid.values["k"] = {"1", "5", "11"};
  } else if (algorithm == "logistic_regression") {
    grid.values["l2"] = {"1e-4", "1e-2"};
  } else if (algorithm == "perceptron") {
    grid.values["epochs"] = {"50", "100"};
  } else {
    throw std::invalid_argument("default_grid: unknown algorithm '" + algorithm + "'");
  }
  return grid;
}

GridResult grid_search(const data::Dataset& dataset, const std::string& algorithm,
                       const GridSpec& grid, std::uint64_t seed) {
  if (grid.values.empty()) throw std::invalid_argument("grid_search: empty grid");
  std::vector<std::string> keys;
  std::size_t product = 1;
  for (const auto& [key, candidates] : grid.values) {
    if (candidates.empty()) throw std::invalid_argument("grid_search: key '" + key + "' has no values");
    keys.push_back(key);
    product *= candidates.size();
  }
  if (product > grid.cap) {
    throw std::invalid_argument("grid_search: " + std::to_string(product) +
                                " combinations exceed the cap of " + std::to_string(grid.cap));
  }

  GridResult result;
  std::vector<std::size_t> idx(keys.size(), 0);
  while (true) {
    GridPoint point;
    for (std::size_t d = 0; d < keys.size(); ++d) {
      point.params[keys[d]] = grid.values.at(keys[d])[idx[d]];
    }
    ml::ModelSpec spec;
    spec.algorithm = algorithm;
    spec.params = point.params;
    spec.rng_seed = seed;
    point.mean_accuracy = cv_accuracy(dataset, spec, seed, &point.fold_accuracies);
    if (result.table.empty() || point.mean_accuracy > result.best_accuracy) {
      result.best = point.params;
      result.best_accuracy = point.mean_accuracy;
    }
    result.table.push_back(std::move(point));

    std::size_t d = keys.size();
    bool advanced = false;
    while (d-- > 0) {
      if (++idx[d] < grid.values.at(keys[d]).size()) {
        advanced = true;
        break;
      }
      idx[d] = 0;
    }
    if (!advanced) break;
  }
  return result;
}

}  // namespace retypelab::msel
