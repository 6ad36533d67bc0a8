#include "retypelab/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "retypelab/model_selection.hpp"
#include "retypelab/parallel.hpp"
#include "retypelab/rng.hpp"
#include "retypelab/stats.hpp"

namespace retypelab::eval {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

Metrics metrics_from_confusion(const std::vector<std::vector<int>>& confusion) {
  Metrics m;
  m.confusion = confusion;
  int n_classes = static_cast<int>(confusion.size());
  m.precision.assign(static_cast<std::size_t>(n_classes), 0.0);
  m.recall.assign(static_cast<std::size_t>(n_classes), 0.0);
  m.f1.assign(static_cast<std::size_t>(n_classes), 0.0);
  m.support.assign(static_cast<std::size_t>(n_classes), 0);

  long long total = 0, diag = 0;
  for (int a = 0; a < n_classes; ++a) {
    for (int p = 0; p < n_classes; ++p) {
      total += confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(p)];
    }
    diag += confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)];
  }
  m.accuracy = total > 0 ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;

  for (int c = 0; c < n_classes; ++c) {
    long long tp = confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    long long actual = 0, predicted = 0;
    for (int o = 0; o < n_classes; ++o) {
      actual += confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(o)];
      predicted += confusion[static_cast<std::size_t>(o)][static_cast<std::size_t>(c)];
    }
    m.support[static_cast<std::size_t>(c)] = static_cast<int>(actual);
    double precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    double recall = actual > 0 ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    m.precision[static_cast<std::size_t>(c)] = precision;
    m.recall[static_cast<std::size_t>(c)] = recall;
    m.f1[static_cast<std::size_t>(c)] = f1;
    m.macro_precision += precision;
    m.macro_recall += recall;
    m.macro_f1 += f1;
  }
  if (n_classes > 0) {
    m.macro_precision /= n_classes;
    m.macro_recall /= n_classes;
    m.macro_f1 /= n_classes;
  }
  return m;
}

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& truths,
                        int n_classes) {
  if (predictions.size() != truths.size() || predictions.empty()) {
    throw std::invalid_argument("compute_metrics: prediction/truth lengths must match and be >= 1");
  }
  std::vector<std::vector<int>> confusion(
      static_cast<std::size_t>(n_classes),
      std::vector<int>(static_cast<std::size_t>(n_classes), 0));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    confusion[static_cast<std::size_t>(truths[i])][static_cast<std::size_t>(predictions[i])]++;
  }
  return metrics_from_confusion(confusion);
}

double pairwise_misclassification(const Metrics& m, int a, int b) {
  auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
  double cross = static_cast<double>(m.confusion[ia][ib] + m.confusion[ib][ia]);
  double total = static_cast<double>(m.support[ia] + m.support[ib]);
  return total > 0.0 ? cross / total : 0.0;
}

double block_cross_error(const Metrics& m, const std::vector<int>& classes) {
  double cross = 0.0, total = 0.0;
  for (int a : classes) {
    total += m.support[static_cast<std::size_t>(a)];
    for (int p : classes) {
      if (a != p) cross += m.confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(p)];
    }
  }
  return total > 0.0 ? cross / total : 0.0;
}

// ---------------------------------------------------------------------------
// Repetition summaries
// ---------------------------------------------------------------------------

RepeatedEval summarize_repetitions(const std::vector<double>& accuracies,
                                   const std::vector<std::vector<std::vector<int>>>& confusions) {
  RepeatedEval out;
  out.accuracies = accuracies;
  out.mean = stats::mean(accuracies);
  out.sd = stats::sample_sd(accuracies);
  auto ci = stats::ci95(accuracies);
  out.ci_lo = ci.first;
  out.ci_hi = ci.second;
  if (!confusions.empty()) {
    auto total = confusions.front();
    for (std::size_t r = 1; r < confusions.size(); ++r) {
      for (std::size_t a = 0; a < total.size(); ++a) {
        for (std::size_t p = 0; p < total.size(); ++p) {
          total[a][p] += confusions[r][a][p];
        }
      }
    }
    out.aggregate = metrics_from_confusion(total);
  }
  return out;
}

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

double run_split(const data::Dataset& merged, const ml::ModelSpec& spec, std::uint64_t seed,
                 std::vector<std::vector<int>>* confusion_out) {
  auto [train_idx, test_idx] = msel::stratified_split(merged.labels, 0.2, seed);
  data::Dataset train_set = take_rows(merged, train_idx);
  data::Dataset test_set = take_rows(merged, test_idx);
  ml::ModelSpec rep_spec = spec;
  rep_spec.rng_seed = seed;
  ml::TrainedModel model = ml::train(rep_spec, train_set);
  auto pred = ml::predict_dataset(model, test_set);
  Metrics m = compute_metrics(pred, test_set.labels, merged.n_classes());
  if (confusion_out) *confusion_out = m.confusion;
  return m.accuracy;
}

}  // namespace

RepeatedEval evaluate_method1(const data::Dataset& real, const data::Dataset& synth,
                              const ml::ModelSpec& spec, std::uint64_t seed, int repetitions) {
  data::Dataset merged = data::merge_datasets(real, synth);
  if (merged.n_rows() == 0) throw std::invalid_argument("evaluate_method1: no rows");

  std::vector<double> accuracies(static_cast<std::size_t>(repetitions), 0.0);
  std::vector<std::vector<std::vector<int>>> confusions(static_cast<std::size_t>(repetitions));
  par::parallel_for(repetitions, [&](std::int64_t rep) {
    accuracies[static_cast<std::size_t>(rep)] =
        run_split(merged, spec, seed + static_cast<std::uint64_t>(rep),
                  &confusions[static_cast<std::size_t>(rep)]);
  });
  return summarize_repetitions(accuracies, confusions);
}

// ---------------------------------------------------------------------------
// Method 2: necessary number of real functions
// ---------------------------------------------------------------------------

namespace {

/// Stratified prefix of the (shuffled) real training pool: the first
/// `percent`% of each class.
std::vector<int> stratified_prefix(const std::vector<std::vector<int>>& pool_by_class,
                                   int percent) {
  std::vector<int> out;
  for (const auto& members : pool_by_class) {
    auto take = static_cast<std::size_t>(
        std::lround(static_cast<double>(members.size()) * percent / 100.0));
    take = std::min(take, members.size());
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

std::vector<std::vector<int>> group_by_class(const std::vector<int>& rows,
                                             const std::vector<int>& labels, int n_classes) {
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
  for (int r : rows) by_class[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])].push_back(r);
  return by_class;
}

}  // namespace

Method2Result evaluate_method2(const data::Dataset& real, const data::Dataset& synth,
                               const ml::ModelSpec& spec, std::uint64_t seed, int window,
                               double cov_threshold, int repetitions) {
  if (real.n_rows() == 0) throw std::invalid_argument("evaluate_method2: empty real dataset");
  data::Dataset merged = data::merge_datasets(real, synth);
  int n_real = real.n_rows();

  // Row ids in the merged dataset: real rows first, synthetic after.
  std::vector<int> real_rows(static_cast<std::size_t>(n_real));
  for (int i = 0; i < n_real; ++i) real_rows[static_cast<std::size_t>(i)] = i;
  std::vector<int> synth_rows;
  for (int i = n_real; i < merged.n_rows(); ++i) synth_rows.push_back(i);

  // Fixed 20% real holdout, reserved before the loop so the test set stays
  // constant across fractions.
  std::vector<int> real_labels = real.labels;
  auto [pool, holdout] = msel::stratified_split(real_labels, 0.2, seed);
  data::Dataset test_set = take_rows(merged, holdout);

  auto run_at = [&](int percent, std::uint64_t rep_seed, std::vector<std::vector<int>>* conf) {
    Rng rng(rep_seed);
    auto by_class = group_by_class(pool, merged.labels, merged.n_classes());
    for (auto& members : by_class) rng.shuffle(members);
    std::vector<int> train_rows = synth_rows;
    auto prefix = stratified_prefix(by_class, percent);
    train_rows.insert(train_rows.end(), prefix.begin(), prefix.end());
    data::Dataset train_set = take_rows(merged, train_rows);
    ml::ModelSpec rep_spec = spec;
    rep_spec.rng_seed = rep_seed;
    ml::TrainedModel model = ml::train(rep_spec, train_set);
    Metrics m = compute_metrics(ml::predict_dataset(model, test_set), test_set.labels,
                                merged.n_classes());
    if (conf) *conf = m.confusion;
    return m.accuracy;
  };

  Method2Result result;
  for (int percent = 0; percent <= 100; ++percent) {
    double acc = run_at(percent, seed, nullptr);
    result.trace.xs.push_back(percent);
    result.trace.accuracies.push_back(acc);
    if (static_cast<int>(result.trace.accuracies.size()) >= window) {
      std::span<const double> tail(result.trace.accuracies);
      tail = tail.subspan(tail.size() - static_cast<std::size_t>(window));
      double mean = stats::mean(tail);
      double cov = mean > 0.0 ? stats::coefficient_of_variation(tail)
                              : std::numeric_limits<double>::infinity();
      result.trace.covs.push_back(cov);
      if (cov < cov_threshold) {
        result.trace.stop_x = percent;
        result.trace.converged = true;
        break;
      }
    }
  }
  if (!result.trace.converged) result.trace.stop_x = 100.0;

  int stop_percent = static_cast<int>(result.trace.stop_x);
  std::vector<double> accuracies(static_cast<std::size_t>(repetitions), 0.0);
  std::vector<std::vector<std::vector<int>>> confusions(static_cast<std::size_t>(repetitions));
  par::parallel_for(repetitions, [&](std::int64_t rep) {
    accuracies[static_cast<std::size_t>(rep)] =
        run_at(stop_percent, seed + 1 + static_cast<std::uint64_t>(rep),
               &confusions[static_cast<std::size_t>(rep)]);
  });
  result.at_stop = summarize_repetitions(accuracies, confusions);
  return result;
}

// ---------------------------------------------------------------------------
// Method 3: leave one program out
// ---------------------------------------------------------------------------

std::vector<ProgramEval> evaluate_method3(const std::vector<data::Dataset>& programs,
                                          const std::vector<std::string>& names,
                                          const ml::ModelSpec& spec, std::uint64_t seed) {
  if (programs.size() < 2) {
    throw std::invalid_argument("evaluate_method3: needs at least two programs");
  }
  if (names.size() != programs.size()) {
    throw std::invalid_argument("evaluate_method3: one name per program required");
  }
  std::vector<ProgramEval> out;
  for (std::size_t hold = 0; hold < programs.size(); ++hold) {
    data::Dataset train_set;
    bool first = true;
    for (std::size_t p = 0; p < programs.size(); ++p) {
      if (p == hold) continue;
      train_set = first ? programs[p] : data::merge_datasets(train_set, programs[p]);
      first = false;
    }
    // test rows come only from the held-out program
    data::Dataset test_set = data::merge_datasets(train_set, programs[hold]);
    std::vector<int> test_rows;
    for (int r = train_set.n_rows(); r < test_set.n_rows(); ++r) test_rows.push_back(r);
    data::Dataset projected_train = take_rows(test_set, [&] {
      std::vector<int> rows;
      for (int r = 0; r < train_set.n_rows(); ++r) rows.push_back(r);
      return rows;
    }());
    data::Dataset projected_test = take_rows(test_set, test_rows);

    // leakage guard: no shared function symbols between train and test
    std::set<std::string> train_names(projected_train.row_names.begin(),
                                      projected_train.row_names.end());
    for (const auto& sym : projected_test.row_names) {
      if (train_names.count(sym)) {
        throw std::runtime_error("evaluate_method3: function '" + sym +
                                 "' appears in both training and the held-out program");
      }
    }

    ml::ModelSpec fold_spec = spec;
    fold_spec.rng_seed = seed + hold;
    ml::TrainedModel model = ml::train(fold_spec, projected_train);
    Metrics m = compute_metrics(ml::predict_dataset(model, projected_test), projected_test.labels,
                                projected_test.n_classes());
    out.push_back(ProgramEval{names[hold], std::move(m), projected_test.n_rows()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset-size convergence
// ---------------------------------------------------------------------------

ConvergenceTrace converge_dataset_size(const std::function<double(int)>& accuracy_at, int start,
                                       int step, int window, double threshold, int max_points) {
  if (step < 1) throw std::invalid_argument("converge_dataset_size: step must be >= 1");
  ConvergenceTrace trace;
  for (int point = 0; point < max_points; ++point) {
    int x = start + point * step;
    double acc = accuracy_at(x);
    trace.xs.push_back(x);
    trace.accuracies.push_back(acc);
    if (static_cast<int>(trace.accuracies.size()) >= window) {
      std::span<const double> tail(trace.accuracies);
      tail = tail.subspan(tail.size() - static_cast<std::size_t>(window));
      double mean = stats::mean(tail);
      if (mean <= 0.0) {
        throw std::runtime_error("converge_dataset_size: nonpositive mean accuracy in window");
      }
      double cov = stats::coefficient_of_variation(tail);
      trace.covs.push_back(cov);
      if (cov < threshold) {
        trace.stop_x = x;
        trace.converged = true;
        return trace;
      }
    }
  }
  trace.stop_x = trace.xs.empty() ? start : trace.xs.back();
  trace.converged = false;
  return trace;
}

int recommended_size(const ConvergenceTrace& trace, int window, int step) {
  return static_cast<int>(trace.stop_x) - window * step;
}

Comparison compare_models(const RepeatedEval& a, const RepeatedEval& b) {
  bool overlap = a.ci_lo <= b.ci_hi && b.ci_lo <= a.ci_hi;
  if (overlap) return Comparison::NotSignificant;
  return a.mean > b.mean ? Comparison::ABetter : Comparison::BBetter;
}

const std::vector<DecompilerBaseline>& decompiler_baselines(data::Scheme scheme) {
  static const std::vector<DecompilerBaseline> size_rep = {
      {"IDA", 0.583, 0.495, 0.413, 0.415},
      {"RetDec", 0.290, 0.111, 0.133, 0.110},
      {"Snowman", 0.544, 0.365, 0.328, 0.322},
      {"Hopper", 0.333, 0.132, 0.132, 0.079},
  };
  static const std::vector<DecompilerBaseline> high_level = {
      {"IDA", 0.40, 0.33, 0.34, 0.30},
      {"RetDec", 0.15, 0.06, 0.10, 0.06},
      {"Snowman", 0.29, 0.22, 0.26, 0.21},
      {"Hopper", 0.14, 0.08, 0.09, 0.03},
  };
  return scheme == data::Scheme::SizeRep ? size_rep : high_level;
}

}  // namespace retypelab::eval
