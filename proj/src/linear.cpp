#include <cmath>

#include <nlohmann/json.hpp>

#include "classifier_impls.hpp"
#include "retypelab/parallel.hpp"

namespace retypelab::ml {

using nlohmann::json;

namespace {

void softmax_row(std::vector<double>& s) {
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  double z = 0.0;
  for (double& v : s) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : s) v /= z;
}

std::vector<double> linear_scores(std::span<const std::uint8_t> x,
                                  const std::vector<double>& weights,
                                  const std::vector<double>& bias, int n_classes, int n_cols) {
  std::vector<double> out(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    double s = bias[static_cast<std::size_t>(c)];
    const double* w = weights.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(n_cols);
    for (int j = 0; j < n_cols; ++j) {
      if (x[static_cast<std::size_t>(j)]) s += w[j];
    }
    out[static_cast<std::size_t>(c)] = s;
  }
  return out;
}

}  // namespace

double logistic_loss(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                     const std::vector<double>& weights, const std::vector<double>& bias,
                     double l2) {
  double loss = 0.0;
  for (int i = 0; i < x.n_rows; ++i) {
    auto s = linear_scores(x.row(i), weights, bias, n_classes, x.n_cols);
    softmax_row(s);
    loss -= std::log(std::max(s[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])], 1e-300));
  }
  loss /= static_cast<double>(x.n_rows);
  double reg = 0.0;
  for (double w : weights) reg += w * w;
  return loss + 0.5 * l2 * reg;
}

void logistic_gradient(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                       const std::vector<double>& weights, const std::vector<double>& bias,
                       double l2, std::vector<double>& grad_w, std::vector<double>& grad_b) {
  auto k = static_cast<std::size_t>(n_classes);
  auto f = static_cast<std::size_t>(x.n_cols);
  auto n = static_cast<std::size_t>(x.n_rows);

  grad_w.assign(k * f, 0.0);
  grad_b.assign(k, 0.0);

  // per-row softmax differences, slot per row so the parallel loop is
  // schedule-independent; accumulation below is serial and ordered
  std::vector<double> diff(n * k);
  par::parallel_for(static_cast<std::int64_t>(n), [&](std::int64_t i) {
    auto row = static_cast<std::size_t>(i);
    auto s = linear_scores(x.row(static_cast<int>(i)), weights, bias, n_classes, x.n_cols);
    softmax_row(s);
    s[static_cast<std::size_t>(y[row])] -= 1.0;
    for (std::size_t c = 0; c < k; ++c) diff[row * k + c] = s[c];
  });

  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(static_cast<int>(i));
    for (std::size_t c = 0; c < k; ++c) {
      double d = diff[i * k + c];
      grad_b[c] += d;
      if (d == 0.0) continue;
      double* gw = grad_w.data() + c * f;
      for (std::size_t j = 0; j < f; ++j) {
        if (row[j]) gw[j] += d;
      }
    }
  }
  double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t c = 0; c < k; ++c) {
    grad_b[c] *= inv_n;
    for (std::size_t j = 0; j < f; ++j) {
      grad_w[c * f + j] = grad_w[c * f + j] * inv_n + l2 * weights[c * f + j];
    }
  }
}

// ---------------------------------------------------------------------------
// LogisticRegressionClassifier
// ---------------------------------------------------------------------------

void LogisticRegressionClassifier::fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                                       const ModelSpec& spec) {
  n_classes_ = n_classes;
  n_features_ = x.n_cols;
  double lr = spec.param_d("learning_rate", 0.1);
  double l2 = spec.param_d("l2", 1e-4);
  int epochs = spec.param_i("epochs", 500);
  double tol = spec.param_d("tolerance", 1e-6);

  weights_.assign(static_cast<std::size_t>(n_classes) * static_cast<std::size_t>(x.n_cols), 0.0);
  bias_.assign(static_cast<std::size_t>(n_classes), 0.0);

  std::vector<double> grad_w, grad_b;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    logistic_gradient(x, y, n_classes, weights_, bias_, l2, grad_w, grad_b);
    double norm_sq = 0.0;
    for (double g : grad_w) norm_sq += g * g;
    for (double g : grad_b) norm_sq += g * g;
    if (std::sqrt(norm_sq) < tol) break;
    for (std::size_t i = 0; i < weights_.size(); ++i) weights_[i] -= lr * grad_w[i];
    for (std::size_t i = 0; i < bias_.size(); ++i) bias_[i] -= lr * grad_b[i];
  }
}

std::vector<double> LogisticRegressionClassifier::scores(std::span<const std::uint8_t> x) const {
  return linear_scores(x, weights_, bias_, n_classes_, n_features_);
}

std::vector<double> LogisticRegressionClassifier::proba(std::span<const std::uint8_t> x) const {
  auto s = scores(x);
  softmax_row(s);
  return s;
}

void LogisticRegressionClassifier::state_to_json(std::string& out) const {
  out += json{{"weights", weights_},
              {"bias", bias_},
              {"n_classes", n_classes_},
              {"n_features", n_features_}}
             .dump();
}

void LogisticRegressionClassifier::state_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  weights_ = j.at("weights").get<std::vector<double>>();
  bias_ = j.at("bias").get<std::vector<double>>();
  n_classes_ = j.at("n_classes").get<int>();
  n_features_ = j.at("n_features").get<int>();
}

// ---------------------------------------------------------------------------
// PerceptronClassifier (one-vs-rest)
// ---------------------------------------------------------------------------

void PerceptronClassifier::fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                               const ModelSpec& spec) {
  n_classes_ = n_classes;
  n_features_ = x.n_cols;
  int epochs = spec.param_i("epochs", 100);
  auto k = static_cast<std::size_t>(n_classes);
  auto f = static_cast<std::size_t>(x.n_cols);

  weights_.assign(k * f, 0.0);
  bias_.assign(k, 0.0);

  Rng rng(spec.rng_seed);
  std::vector<int> order(static_cast<std::size_t>(x.n_rows));
  for (int i = 0; i < x.n_rows; ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    bool updated = false;
    for (int i : order) {
      auto row = x.row(i);
      for (std::size_t c = 0; c < k; ++c) {
        double target = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]) == c ? 1.0 : -1.0;
        double s = bias_[c];
        double* w = weights_.data() + c * f;
        for (std::size_t j = 0; j < f; ++j) {
          if (row[j]) s += w[j];
        }
        if (target * s <= 0.0) {
          for (std::size_t j = 0; j < f; ++j) {
            if (row[j]) w[j] += target;
          }
          bias_[c] += target;
          updated = true;
        }
      }
    }
    if (!updated) break;
  }
}

std::vector<double> PerceptronClassifier::scores(std::span<const std::uint8_t> x) const {
  return linear_scores(x, weights_, bias_, n_classes_, n_features_);
}

void PerceptronClassifier::state_to_json(std::string& out) const {
  out += json{{"weights", weights_},
              {"bias", bias_},
              {"n_classes", n_classes_},
              {"n_features", n_features_}}
             .dump();
}

void PerceptronClassifier::state_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  weights_ = j.at("weights").get<std::vector<double>>();
  bias_ = j.at("bias").get<std::vector<double>>();
  n_classes_ = j.at("n_classes").get<int>();
  n_features_ = j.at("n_features").get<int>();
}

}  // namespace retypelab::ml
