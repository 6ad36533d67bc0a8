#include <cmath>

#include <nlohmann/json.hpp>

#include "classifier_impls.hpp"

namespace retypelab::ml {

using nlohmann::json;

void BernoulliNbClassifier::fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                                const ModelSpec& spec) {
  double alpha = spec.param_d("alpha", 1.0);
  n_features_ = x.n_cols;
  auto k = static_cast<std::size_t>(n_classes);
  auto f = static_cast<std::size_t>(x.n_cols);

  std::vector<double> class_count(k, 0.0);
  std::vector<double> feature_count(k * f, 0.0);
  for (int i = 0; i < x.n_rows; ++i) {
    auto c = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
    class_count[c] += 1.0;
    auto row = x.row(i);
    for (std::size_t j = 0; j < f; ++j) {
      if (row[j]) feature_count[c * f + j] += 1.0;
    }
  }

  log_prior_.assign(k, 0.0);
  log_theta_.assign(k * f, 0.0);
  log_1m_theta_.assign(k * f, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    log_prior_[c] = std::log(std::max(class_count[c], 1e-300) / static_cast<double>(x.n_rows));
    for (std::size_t j = 0; j < f; ++j) {
      double theta = (feature_count[c * f + j] + alpha) / (class_count[c] + 2.0 * alpha);
      log_theta_[c * f + j] = std::log(theta);
      log_1m_theta_[c * f + j] = std::log1p(-theta);
    }
  }
}

std::vector<double> BernoulliNbClassifier::scores(std::span<const std::uint8_t> x) const {
  auto k = log_prior_.size();
  auto f = static_cast<std::size_t>(n_features_);
  std::vector<double> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    double s = log_prior_[c];
    for (std::size_t j = 0; j < f; ++j) {
      s += x[j] ? log_theta_[c * f + j] : log_1m_theta_[c * f + j];
    }
    out[c] = s;
  }
  return out;
}

std::vector<double> BernoulliNbClassifier::proba(std::span<const std::uint8_t> x) const {
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

void BernoulliNbClassifier::state_to_json(std::string& out) const {
  out += json{{"log_prior", log_prior_},
              {"log_theta", log_theta_},
              {"log_1m_theta", log_1m_theta_},
              {"n_features", n_features_}}
             .dump();
}

void BernoulliNbClassifier::state_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  log_prior_ = j.at("log_prior").get<std::vector<double>>();
  log_theta_ = j.at("log_theta").get<std::vector<double>>();
  log_1m_theta_ = j.at("log_1m_theta").get<std::vector<double>>();
  n_features_ = j.at("n_features").get<int>();
}

}  // namespace retypelab::ml
