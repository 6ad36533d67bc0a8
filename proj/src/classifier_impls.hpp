#pragma once

#include <optional>

#include "retypelab/classifiers.hpp"
#include "retypelab/rng.hpp"

namespace retypelab::ml {

// ---------------------------------------------------------------------------
// Shared tree machinery (classification and regression on binary features)
// ---------------------------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  int left = -1;     // child for feature == 0
  int right = -1;    // child for feature == 1
  std::vector<double> value;
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<double> importances;  // raw impurity decrease per feature

  const std::vector<double>& leaf_value(std::span<const std::uint8_t> x) const;
};

struct TreeFitParams {
  int max_depth = 0;     // 0 = unlimited
  int n_candidates = 0;  // 0 = all features; otherwise a random subset per split
};

Tree fit_classification_tree(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                             const std::vector<int>& sample, const TreeFitParams& params,
                             Rng* rng);

/// Regression tree on `target` (SSE criterion); leaf values are the boosting
/// step  k_factor * sum(target) / sum(denom)  over the leaf members.
Tree fit_regression_tree(const BitMatrix& x, const std::vector<double>& target,
                         const std::vector<double>& denom, double k_factor,
                         const std::vector<int>& sample, const TreeFitParams& params, Rng* rng);

std::vector<double> normalized_importances(const std::vector<double>& raw);

// ---------------------------------------------------------------------------
// Concrete classifiers
// ---------------------------------------------------------------------------

class DecisionTreeClassifier : public Classifier {
 public:
  void fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
           const ModelSpec& spec) override;
  std::vector<double> scores(std::span<const std::uint8_t> x) const override;
  bool has_proba() const override { return true; }
  std::vector<double> proba(std::span<const std::uint8_t> x) const override;
  bool has_importances() const override { return true; }
  std::vector<double> importances() const override;
  void state_to_json(std::string& out) const override;
  void state_from_json(const std::string& json_text) override;

 private:
  Tree tree_;
  int n_features_ = 0;
};

/// Shared by random_forest (bootstrap + sqrt candidates) and extra_trees
/// (no bootstrap + sqrt candidates; random thresholds degenerate to the 0/1
/// split on binary features).
class ForestClassifier : public Classifier {
 public:
  explicit ForestClassifier(bool bootstrap_default) : bootstrap_default_(bootstrap_default) {}
  void fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
           const ModelSpec& spec) override;
  std::vector<double> scores(std::span<const std::uint8_t> x) const override;
  bool has_proba() const override { return true; }
  std::vector<double> proba(std::span<const std::uint8_t> x) const override;
  bool has_importances() const override { return true; }
  std::vector<double> importances() const override;
  void state_to_json(std::string& out) const override;
  void state_from_json(const std::string& json_text) override;

 private:
  bool bootstrap_default_;
  std::vector<Tree> members_;
  int n_classes_ = 0;
  int n_features_ = 0;
};

class GradientBoostingClassifier : public Classifier {
 public:
  void fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
           const ModelSpec& spec) override;
  std::vector<double> scores(std::span<const std::uint8_t> x) const override;
  bool has_proba() const override { return true; }
  std::vector<double> proba(std::span<const std::uint8_t> x) const override;
  bool has_importances() const override { return true; }
  std::vector<double> importances() const override;
  void state_to_json(std::string& out) const override;
  void state_from_json(const std::string& json_text) override;

 private:
  std::vector<double> init_scores_;            // log priors
  std::vector<std::vector<Tree>> rounds_;      // [round][class]
  double shrinkage_ = 0.1;
  int n_features_ = 0;
};

class BernoulliNbClassifier : public Classifier {
 public:
  void fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
           const ModelSpec& spec) override;
  std::vector<double> scores(std::span<const std::uint8_t> x) const override;
  bool has_proba() const override { return true; }
  std::vector<double> proba(std::span<const std::uint8_t> x) const override;
  void state_to_json(std::string& out) const override;
  void state_from_json(const std::string& json_text) override;

 private:
  std::vector<double> log_prior_;
  std::vector<double> log_theta_;     // class-major (n_classes x n_features)
  std::vector<double> log_1m_theta_;
  int n_features_ = 0;
};

class KnnClassifier : public Classifier {
 public:
  void fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
           const ModelSpec& spec) override;
  std::vector<double> scores(std::span<const std::uint8_t> x) const override;
  bool has_proba() const override { return true; }
  std::vector<double> proba(std::span<const std::uint8_t> x) const override;
  void state_to_json(std::string& out) const override;
  void state_from_json(const std::string& json_text) override;

 private:
  BitMatrix train_;
  std::vector<int> labels_;
  int n_classes_ = 0;
  int k_ = 5;
};

class LogisticRegressionClassifier : public Classifier {
 public:
  void fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
           const ModelSpec& spec) override;
  std::vector<double> scores(std::span<const std::uint8_t> x) const override;
  bool has_proba() const override { return true; }
  std::vector<double> proba(std::span<const std::uint8_t> x) const override;
  void state_to_json(std::string& out) const override;
  void state_from_json(const std::string& json_text) override;

 private:
  std::vector<double> weights_;  // n_classes x n_features, row-major
  std::vector<double> bias_;
  int n_classes_ = 0;
  int n_features_ = 0;
};

class PerceptronClassifier : public Classifier {
 public:
  void fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
           const ModelSpec& spec) override;
  std::vector<double> scores(std::span<const std::uint8_t> x) const override;
  void state_to_json(std::string& out) const override;
  void state_from_json(const std::string& json_text) override;

 private:
  std::vector<double> weights_;  // one-vs-rest, n_classes x n_features
  std::vector<double> bias_;
  int n_classes_ = 0;
  int n_features_ = 0;
};

}  // namespace retypelab::ml
