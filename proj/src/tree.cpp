#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "classifier_impls.hpp"
#include "retypelab/parallel.hpp"

namespace retypelab::ml {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Tree fitting
// ---------------------------------------------------------------------------

const std::vector<double>& Tree::leaf_value(std::span<const std::uint8_t> x) const {
  int at = 0;
  while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
    const TreeNode& node = nodes[static_cast<std::size_t>(at)];
    at = x[static_cast<std::size_t>(node.feature)] ? node.right : node.left;
  }
  return nodes[static_cast<std::size_t>(at)].value;
}

namespace {

constexpr double kMinGain = 1e-12;

/// Candidate features for one split: all columns, or a random subset drawn
/// without replacement and sorted so equal gains break toward the lowest
/// column index.
std::vector<int> draw_candidates(int n_cols, int n_candidates, Rng* rng) {
  std::vector<int> all(static_cast<std::size_t>(n_cols));
  for (int i = 0; i < n_cols; ++i) all[static_cast<std::size_t>(i)] = i;
  if (n_candidates <= 0 || n_candidates >= n_cols || !rng) return all;
  for (int i = 0; i < n_candidates; ++i) {
    int j = i + static_cast<int>(rng->next_below(static_cast<std::uint64_t>(n_cols - i)));
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
  }
  all.resize(static_cast<std::size_t>(n_candidates));
  std::sort(all.begin(), all.end());
  return all;
}

double gini(const std::vector<double>& counts, double total) {
  if (total <= 0.0) return 0.0;
  double sum_sq = 0.0;
  for (double c : counts) sum_sq += c * c;
  return 1.0 - sum_sq / (total * total);
}

struct NodeWork {
  int node;
  std::vector<int> sample;
  int depth;
};

}  // namespace

Tree fit_classification_tree(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                             const std::vector<int>& sample, const TreeFitParams& params,
                             Rng* rng) {
  Tree tree;
  tree.importances.assign(static_cast<std::size_t>(x.n_cols), 0.0);
  double n_total = static_cast<double>(sample.size());

  std::vector<NodeWork> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, sample, 0});

  while (!stack.empty()) {
    NodeWork work = std::move(stack.back());
    stack.pop_back();

    std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
    for (int i : work.sample) counts[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] += 1.0;
    double n = static_cast<double>(work.sample.size());

    auto make_leaf = [&]() {
      std::vector<double> dist(counts);
      for (double& v : dist) v /= n > 0.0 ? n : 1.0;
      tree.nodes[static_cast<std::size_t>(work.node)].value = std::move(dist);
    };

    double parent_gini = gini(counts, n);
    bool depth_capped = params.max_depth > 0 && work.depth >= params.max_depth;
    if (parent_gini == 0.0 || depth_capped || work.sample.size() < 2) {
      make_leaf();
      continue;
    }

    int best_feature = -1;
    double best_gain = kMinGain;
    std::vector<double> right_counts(static_cast<std::size_t>(n_classes));
    for (int f : draw_candidates(x.n_cols, params.n_candidates, rng)) {
      std::fill(right_counts.begin(), right_counts.end(), 0.0);
      double n_right = 0.0;
      for (int i : work.sample) {
        if (x.at(i, f)) {
          right_counts[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] += 1.0;
          n_right += 1.0;
        }
      }
      double n_left = n - n_right;
      if (n_left == 0.0 || n_right == 0.0) continue;
      std::vector<double> left_counts(counts);
      for (int c = 0; c < n_classes; ++c) {
        left_counts[static_cast<std::size_t>(c)] -= right_counts[static_cast<std::size_t>(c)];
      }
      double gain = parent_gini - (n_left / n) * gini(left_counts, n_left) -
                    (n_right / n) * gini(right_counts, n_right);
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = f;
      }
    }
    if (best_feature < 0) {
      make_leaf();
      continue;
    }

    tree.importances[static_cast<std::size_t>(best_feature)] += (n / n_total) * best_gain;

    std::vector<int> left, right;
    for (int i : work.sample) {
      (x.at(i, best_feature) ? right : left).push_back(i);
    }
    int left_id = static_cast<int>(tree.nodes.size());
    int right_id = left_id + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[static_cast<std::size_t>(work.node)];
    node.feature = best_feature;
    node.left = left_id;
    node.right = right_id;
    stack.push_back({right_id, std::move(right), work.depth + 1});
    stack.push_back({left_id, std::move(left), work.depth + 1});
  }
  return tree;
}

Tree fit_regression_tree(const BitMatrix& x, const std::vector<double>& target,
                         const std::vector<double>& denom, double k_factor,
                         const std::vector<int>& sample, const TreeFitParams& params, Rng* rng) {
  Tree tree;
  tree.importances.assign(static_cast<std::size_t>(x.n_cols), 0.0);
  double n_total = static_cast<double>(sample.size());

  std::vector<NodeWork> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, sample, 0});

  while (!stack.empty()) {
    NodeWork work = std::move(stack.back());
    stack.pop_back();

    double sum = 0.0, sum_sq = 0.0, den = 0.0;
    for (int i : work.sample) {
      double t = target[static_cast<std::size_t>(i)];
      sum += t;
      sum_sq += t * t;
      den += denom[static_cast<std::size_t>(i)];
    }
    double n = static_cast<double>(work.sample.size());

    auto make_leaf = [&]() {
      double gamma = den > 1e-12 ? k_factor * sum / den : 0.0;
      tree.nodes[static_cast<std::size_t>(work.node)].value = {gamma};
    };

    double parent_sse = sum_sq - (n > 0.0 ? sum * sum / n : 0.0);
    bool depth_capped = params.max_depth > 0 && work.depth >= params.max_depth;
    if (depth_capped || work.sample.size() < 2 || parent_sse <= kMinGain) {
      make_leaf();
      continue;
    }

    int best_feature = -1;
    double best_gain = kMinGain;
    for (int f : draw_candidates(x.n_cols, params.n_candidates, rng)) {
      double sum_r = 0.0, sum_sq_r = 0.0, n_right = 0.0;
      for (int i : work.sample) {
        if (x.at(i, f)) {
          double t = target[static_cast<std::size_t>(i)];
          sum_r += t;
          sum_sq_r += t * t;
          n_right += 1.0;
        }
      }
      double n_left = n - n_right;
      if (n_left == 0.0 || n_right == 0.0) continue;
      double sum_l = sum - sum_r;
      double sum_sq_l = sum_sq - sum_sq_r;
      double sse = (sum_sq_l - sum_l * sum_l / n_left) + (sum_sq_r - sum_r * sum_r / n_right);
      double gain = parent_sse - sse;
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = f;
      }
    }
    if (best_feature < 0) {
      make_leaf();
      continue;
    }

    tree.importances[static_cast<std::size_t>(best_feature)] += (n / n_total) * best_gain;

    std::vector<int> left, right;
    for (int i : work.sample) {
      (x.at(i, best_feature) ? right : left).push_back(i);
    }
    int left_id = static_cast<int>(tree.nodes.size());
    int right_id = left_id + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[static_cast<std::size_t>(work.node)];
    node.feature = best_feature;
    node.left = left_id;
    node.right = right_id;
    stack.push_back({right_id, std::move(right), work.depth + 1});
    stack.push_back({left_id, std::move(left), work.depth + 1});
  }
  return tree;
}

std::vector<double> normalized_importances(const std::vector<double>& raw) {
  double total = 0.0;
  for (double v : raw) total += v;
  std::vector<double> out(raw);
  if (total > 0.0) {
    for (double& v : out) v /= total;
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON helpers for trees
// ---------------------------------------------------------------------------

namespace {

json tree_to_json(const Tree& tree) {
  json nodes = json::array();
  for (const auto& node : tree.nodes) {
    nodes.push_back({node.feature, node.left, node.right, node.value});
  }
  return {{"nodes", nodes}, {"importances", tree.importances}};
}

Tree tree_from_json(const json& j) {
  Tree tree;
  for (const auto& entry : j.at("nodes")) {
    TreeNode node;
    node.feature = entry.at(0).get<int>();
    node.left = entry.at(1).get<int>();
    node.right = entry.at(2).get<int>();
    node.value = entry.at(3).get<std::vector<double>>();
    tree.nodes.push_back(std::move(node));
  }
  tree.importances = j.at("importances").get<std::vector<double>>();
  return tree;
}

std::vector<int> identity_sample(int n) {
  std::vector<int> sample(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sample[static_cast<std::size_t>(i)] = i;
  return sample;
}

int sqrt_candidates(int n_cols) {
  int k = static_cast<int>(std::sqrt(static_cast<double>(n_cols)));
  return k < 1 ? 1 : k;
}

}  // namespace

// ---------------------------------------------------------------------------
// DecisionTreeClassifier
// ---------------------------------------------------------------------------

void DecisionTreeClassifier::fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                                 const ModelSpec& spec) {
  n_features_ = x.n_cols;
  TreeFitParams params;
  params.max_depth = spec.param_i("max_depth", 0);
  tree_ = fit_classification_tree(x, y, n_classes, identity_sample(x.n_rows), params, nullptr);
}

std::vector<double> DecisionTreeClassifier::scores(std::span<const std::uint8_t> x) const {
  return tree_.leaf_value(x);
}

std::vector<double> DecisionTreeClassifier::proba(std::span<const std::uint8_t> x) const {
  return tree_.leaf_value(x);
}

std::vector<double> DecisionTreeClassifier::importances() const {
  return normalized_importances(tree_.importances);
}

void DecisionTreeClassifier::state_to_json(std::string& out) const {
  out += json{{"tree", tree_to_json(tree_)}, {"n_features", n_features_}}.dump();
}

void DecisionTreeClassifier::state_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  tree_ = tree_from_json(j.at("tree"));
  n_features_ = j.at("n_features").get<int>();
}

// ---------------------------------------------------------------------------
// ForestClassifier (random_forest / extra_trees)
// ---------------------------------------------------------------------------

void ForestClassifier::fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                           const ModelSpec& spec) {
  n_classes_ = n_classes;
  n_features_ = x.n_cols;
  int n_trees = spec.param_i("n_trees", 100);
  bool bootstrap = spec.param_s("bootstrap", bootstrap_default_ ? "on" : "off") == "on";
  std::string subsample = spec.param_s("feature_subsample", "sqrt");

  TreeFitParams params;
  params.max_depth = spec.param_i("max_depth", 12);
  params.n_candidates = subsample == "all" ? 0 : sqrt_candidates(x.n_cols);

  members_.assign(static_cast<std::size_t>(n_trees), Tree{});
  Rng root(spec.rng_seed);
  par::parallel_for(n_trees, [&](std::int64_t m) {
    Rng rng = root.derive(static_cast<std::uint64_t>(m));
    std::vector<int> sample;
    if (bootstrap) {
      sample.resize(static_cast<std::size_t>(x.n_rows));
      for (int i = 0; i < x.n_rows; ++i) {
        sample[static_cast<std::size_t>(i)] =
            static_cast<int>(rng.next_below(static_cast<std::uint64_t>(x.n_rows)));
      }
    } else {
      sample = identity_sample(x.n_rows);
    }
    members_[static_cast<std::size_t>(m)] =
        fit_classification_tree(x, y, n_classes, sample, params, &rng);
  });
}

std::vector<double> ForestClassifier::scores(std::span<const std::uint8_t> x) const {
  std::vector<double> total(static_cast<std::size_t>(n_classes_), 0.0);
  for (const auto& tree : members_) {
    const auto& dist = tree.leaf_value(x);
    for (int c = 0; c < n_classes_; ++c) total[static_cast<std::size_t>(c)] += dist[static_cast<std::size_t>(c)];
  }
  return total;
}

std::vector<double> ForestClassifier::proba(std::span<const std::uint8_t> x) const {
  std::vector<double> p = scores(x);
  double total = 0.0;
  for (double v : p) total += v;
  if (total > 0.0) {
    for (double& v : p) v /= total;
  }
  return p;
}

std::vector<double> ForestClassifier::importances() const {
  std::vector<double> mean(static_cast<std::size_t>(n_features_), 0.0);
  for (const auto& tree : members_) {
    auto norm = normalized_importances(tree.importances);
    for (int f = 0; f < n_features_; ++f) mean[static_cast<std::size_t>(f)] += norm[static_cast<std::size_t>(f)];
  }
  return normalized_importances(mean);
}

void ForestClassifier::state_to_json(std::string& out) const {
  json trees = json::array();
  for (const auto& tree : members_) trees.push_back(tree_to_json(tree));
  out += json{{"members", trees}, {"n_classes", n_classes_}, {"n_features", n_features_}}.dump();
}

void ForestClassifier::state_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  members_.clear();
  for (const auto& entry : j.at("members")) members_.push_back(tree_from_json(entry));
  n_classes_ = j.at("n_classes").get<int>();
  n_features_ = j.at("n_features").get<int>();
}

// ---------------------------------------------------------------------------
// GradientBoostingClassifier
// ---------------------------------------------------------------------------

void GradientBoostingClassifier::fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                                     const ModelSpec& spec) {
  n_features_ = x.n_cols;
  int rounds = spec.param_i("rounds", 100);
  shrinkage_ = spec.param_d("shrinkage", 0.1);
  TreeFitParams params;
  params.max_depth = spec.param_i("max_depth", 12);

  auto n = static_cast<std::size_t>(x.n_rows);
  auto k = static_cast<std::size_t>(n_classes);

  init_scores_.assign(k, 0.0);
  std::vector<double> prior(k, 0.0);
  for (int label : y) prior[static_cast<std::size_t>(label)] += 1.0;
  for (std::size_t c = 0; c < k; ++c) {
    init_scores_[c] = std::log(std::max(prior[c] / static_cast<double>(n), 1e-12));
  }

  std::vector<double> scores(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) scores[i * k + c] = init_scores_[c];
  }
  auto sample = identity_sample(x.n_rows);
  double k_factor = n_classes > 1 ? static_cast<double>(n_classes - 1) / n_classes : 1.0;

  rounds_.clear();
  std::vector<double> residual(n), denom(n);
  for (int round = 0; round < rounds; ++round) {
    // softmax probabilities per row
    std::vector<double> prob(n * k);
    par::parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t i) {
      auto row = static_cast<std::size_t>(i);
      double mx = scores[row * k];
      for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, scores[row * k + c]);
      double z = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        prob[row * k + c] = std::exp(scores[row * k + c] - mx);
        z += prob[row * k + c];
      }
      for (std::size_t c = 0; c < k; ++c) prob[row * k + c] /= z;
    });

    std::vector<Tree> class_trees(k);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        double target = (static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0) - prob[i * k + c];
        residual[i] = target;
        denom[i] = std::fabs(target) * (1.0 - std::fabs(target));
      }
      class_trees[c] = fit_regression_tree(x, residual, denom, k_factor, sample, params, nullptr);
      for (std::size_t i = 0; i < n; ++i) {
        scores[i * k + c] += shrinkage_ * class_trees[c].leaf_value(x.row(static_cast<int>(i)))[0];
      }
    }
    rounds_.push_back(std::move(class_trees));
  }
}

std::vector<double> GradientBoostingClassifier::scores(std::span<const std::uint8_t> x) const {
  std::vector<double> out(init_scores_);
  for (const auto& round : rounds_) {
    for (std::size_t c = 0; c < out.size(); ++c) {
      out[c] += shrinkage_ * round[c].leaf_value(x)[0];
    }
  }
  return out;
}

std::vector<double> GradientBoostingClassifier::proba(std::span<const std::uint8_t> x) const {
  std::vector<double> s = scores(x);
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  double z = 0.0;
  for (double& v : s) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : s) v /= z;
  return s;
}

std::vector<double> GradientBoostingClassifier::importances() const {
  std::vector<double> total(static_cast<std::size_t>(n_features_), 0.0);
  for (const auto& round : rounds_) {
    for (const auto& tree : round) {
      for (int f = 0; f < n_features_; ++f) {
        total[static_cast<std::size_t>(f)] += tree.importances[static_cast<std::size_t>(f)];
      }
    }
  }
  return normalized_importances(total);
}

void GradientBoostingClassifier::state_to_json(std::string& out) const {
  json rounds = json::array();
  for (const auto& round : rounds_) {
    json class_trees = json::array();
    for (const auto& tree : round) class_trees.push_back(tree_to_json(tree));
    rounds.push_back(class_trees);
  }
  out += json{{"init", init_scores_},
              {"rounds", rounds},
              {"shrinkage", shrinkage_},
              {"n_features", n_features_}}
             .dump();
}

void GradientBoostingClassifier::state_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  init_scores_ = j.at("init").get<std::vector<double>>();
  shrinkage_ = j.at("shrinkage").get<double>();
  n_features_ = j.at("n_features").get<int>();
  rounds_.clear();
  for (const auto& round : j.at("rounds")) {
    std::vector<Tree> class_trees;
    for (const auto& entry : round) class_trees.push_back(tree_from_json(entry));
    rounds_.push_back(std::move(class_trees));
  }
}

}  // namespace retypelab::ml
