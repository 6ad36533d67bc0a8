#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "retypelab/dataset.hpp"
#include "retypelab/rng.hpp"

namespace retypelab::ml {

struct BitMatrix {
  int n_rows = 0;
  int n_cols = 0;
  std::vector<std::uint8_t> cells;  // row-major

  static BitMatrix from_dataset(const data::Dataset& d);
  std::span<const std::uint8_t> row(int r) const {
    return std::span<const std::uint8_t>(cells).subspan(
        static_cast<std::size_t>(r) * static_cast<std::size_t>(n_cols),
        static_cast<std::size_t>(n_cols));
  }
  std::uint8_t at(int r, int c) const {
    return cells[static_cast<std::size_t>(r) * static_cast<std::size_t>(n_cols) +
                 static_cast<std::size_t>(c)];
  }
};

inline const std::vector<std::string>& algorithm_names() {
  static const std::vector<std::string> names = {
      "bernoulli_nb", "decision_tree", "extra_trees", "gradient_boosting",
      "knn",          "logistic_regression", "perceptron", "random_forest"};
  return names;
}

struct ModelSpec {
  std::string algorithm;
  std::map<std::string, std::string> params;
  std::uint64_t rng_seed = 0;

  double param_d(const std::string& key, double fallback) const;
  int param_i(const std::string& key, int fallback) const;
  std::string param_s(const std::string& key, const std::string& fallback) const;
};

/// Fitted state behind the uniform train/predict contract. `scores` returns
/// one value per training class; argmax with lowest-index tie-breaking is
/// the prediction (class ids follow canonical order).
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual void fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                   const ModelSpec& spec) = 0;
  virtual std::vector<double> scores(std::span<const std::uint8_t> x) const = 0;
  virtual bool has_proba() const { return false; }
  virtual std::vector<double> proba(std::span<const std::uint8_t> x) const;
  virtual bool has_importances() const { return false; }
  virtual std::vector<double> importances() const;
  virtual void state_to_json(std::string& out) const = 0;   // appends a JSON object
  virtual void state_from_json(const std::string& json_text) = 0;
};

std::unique_ptr<Classifier> make_classifier(const std::string& algorithm);

struct TrainedModel {
  ModelSpec spec;
  std::vector<std::string> classes;     // names present in training, canonical order
  std::vector<std::string> vocabulary;  // feature names, column order
  std::uint64_t vocab_fingerprint = 0;
  std::unique_ptr<Classifier> impl;

  int n_classes() const { return static_cast<int>(classes.size()); }
  int predict(std::span<const std::uint8_t> x) const;  // index into `classes`
  std::vector<double> predict_proba(std::span<const std::uint8_t> x) const;
  bool has_proba() const { return impl->has_proba(); }
  /// Nonnegative, sums to 1 (impurity-decrease importances, averaged over
  /// trees). Throws for algorithms without importances.
  std::vector<double> feature_importances() const;
};

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FingerprintError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ModelIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

TrainedModel train(const ModelSpec& spec, const data::Dataset& dataset);

/// Predictions as scheme class indices; rejects datasets whose vocabulary
/// fingerprint differs from the model's.
std::vector<int> predict_dataset(const TrainedModel& model, const data::Dataset& dataset);

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

/// Multinomial logistic internals, exposed for the finite-difference
/// gradient check. Weights are row-major (n_classes x n_cols), bias last.
double logistic_loss(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                     const std::vector<double>& weights, const std::vector<double>& bias,
                     double l2);
void logistic_gradient(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                       const std::vector<double>& weights, const std::vector<double>& bias,
                       double l2, std::vector<double>& grad_w, std::vector<double>& grad_b);

}  // namespace retypelab::ml
