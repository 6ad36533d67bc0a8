#include <algorithm>

#include <nlohmann/json.hpp>

#include "classifier_impls.hpp"

namespace retypelab::ml {

using nlohmann::json;

void KnnClassifier::fit(const BitMatrix& x, const std::vector<int>& y, int n_classes,
                        const ModelSpec& spec) {
  train_ = x;
  labels_ = y;
  n_classes_ = n_classes;
  k_ = spec.param_i("k", 5);
  if (k_ < 1) throw TrainError("knn: k must be >= 1");
}

std::vector<double> KnnClassifier::scores(std::span<const std::uint8_t> x) const {
  std::vector<int> dist(static_cast<std::size_t>(train_.n_rows), 0);
  for (int r = 0; r < train_.n_rows; ++r) {
    auto row = train_.row(r);
    int d = 0;
    for (std::size_t j = 0; j < row.size(); ++j) d += row[j] != x[j];
    dist[static_cast<std::size_t>(r)] = d;
  }
  int k = std::min(k_, train_.n_rows);
  std::vector<int> sorted(dist);
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
  int kth = sorted[static_cast<std::size_t>(k - 1)];

  // every training row at distance <= kth votes (distance ties are included)
  std::vector<double> votes(static_cast<std::size_t>(n_classes_), 0.0);
  for (int r = 0; r < train_.n_rows; ++r) {
    if (dist[static_cast<std::size_t>(r)] <= kth) {
      votes[static_cast<std::size_t>(labels_[static_cast<std::size_t>(r)])] += 1.0;
    }
  }
  return votes;
}

std::vector<double> KnnClassifier::proba(std::span<const std::uint8_t> x) const {
  std::vector<double> votes = scores(x);
  double total = 0.0;
  for (double v : votes) total += v;
  if (total > 0.0) {
    for (double& v : votes) v /= total;
  }
  return votes;
}

void KnnClassifier::state_to_json(std::string& out) const {
  out += json{{"rows", train_.n_rows},
              {"cols", train_.n_cols},
              {"cells", train_.cells},
              {"labels", labels_},
              {"n_classes", n_classes_},
              {"k", k_}}
             .dump();
}

void KnnClassifier::state_from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  train_.n_rows = j.at("rows").get<int>();
  train_.n_cols = j.at("cols").get<int>();
  train_.cells = j.at("cells").get<std::vector<std::uint8_t>>();
  labels_ = j.at("labels").get<std::vector<int>>();
  n_classes_ = j.at("n_classes").get<int>();
  k_ = j.at("k").get<int>();
}

}  // namespace retypelab::ml
