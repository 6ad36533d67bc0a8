#include "retypelab/classifiers.hpp"

#include <algorithm>
#include <set>

#include "classifier_impls.hpp"

namespace retypelab::ml {

BitMatrix BitMatrix::from_dataset(const data::Dataset& d) {
  BitMatrix m;
  m.n_rows = d.n_rows();
  m.n_cols = d.n_features();
  m.cells.reserve(static_cast<std::size_t>(m.n_rows) * static_cast<std::size_t>(m.n_cols));
  for (const auto& row : d.rows) m.cells.insert(m.cells.end(), row.begin(), row.end());
  return m;
}

double ModelSpec::param_d(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : std::stod(it->second);
}

int ModelSpec::param_i(const std::string& key, int fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : std::stoi(it->second);
}

std::string ModelSpec::param_s(const std::string& key, const std::string& fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::vector<double> Classifier::proba(std::span<const std::uint8_t>) const {
  throw TrainError("this algorithm does not define class probabilities");
}

std::vector<double> Classifier::importances() const {
  throw TrainError("this algorithm does not define feature importances");
}

std::unique_ptr<Classifier> make_classifier(const std::string& algorithm) {
  if (algorithm == "decision_tree") return std::make_unique<DecisionTreeClassifier>();
  if (algorithm == "random_forest") return std::make_unique<ForestClassifier>(true);
  if (algorithm == "extra_trees") return std::make_unique<ForestClassifier>(false);
  if (algorithm == "gradient_boosting") return std::make_unique<GradientBoostingClassifier>();
  if (algorithm == "bernoulli_nb") return std::make_unique<BernoulliNbClassifier>();
  if (algorithm == "knn") return std::make_unique<KnnClassifier>();
  if (algorithm == "logistic_regression") return std::make_unique<LogisticRegressionClassifier>();
  if (algorithm == "perceptron") return std::make_unique<PerceptronClassifier>();
  throw TrainError("unknown algorithm '" + algorithm + "'");
}

int TrainedModel::predict(std::span<const std::uint8_t> x) const {
  if (static_cast<int>(x.size()) != static_cast<int>(vocabulary.size())) {
    throw FingerprintError("predict: vector length " + std::to_string(x.size()) +
                           " does not match vocabulary size " + std::to_string(vocabulary.size()));
  }
  auto s = impl->scores(x);
  int best = 0;
  for (int c = 1; c < static_cast<int>(s.size()); ++c) {
    if (s[static_cast<std::size_t>(c)] > s[static_cast<std::size_t>(best)]) best = c;
  }
  return best;  // ties keep the lowest index = canonical class order
}

std::vector<double> TrainedModel::predict_proba(std::span<const std::uint8_t> x) const {
  if (static_cast<int>(x.size()) != static_cast<int>(vocabulary.size())) {
    throw FingerprintError("predict_proba: vector length does not match vocabulary size");
  }
  return impl->proba(x);
}

std::vector<double> TrainedModel::feature_importances() const { return impl->importances(); }

TrainedModel train(const ModelSpec& spec, const data::Dataset& dataset) {
  if (dataset.n_rows() == 0) throw TrainError("train: dataset has no rows");
  if (dataset.n_features() == 0) throw TrainError("train: dataset has an empty vocabulary");

  std::set<int> present(dataset.labels.begin(), dataset.labels.end());
  if (present.size() < 2) throw TrainError("train: dataset has a single class");

  // dense class ids in canonical order
  std::vector<int> scheme_ids(present.begin(), present.end());
  std::vector<int> dense_of_scheme(static_cast<std::size_t>(dataset.n_classes()), -1);
  for (std::size_t d = 0; d < scheme_ids.size(); ++d) {
    dense_of_scheme[static_cast<std::size_t>(scheme_ids[d])] = static_cast<int>(d);
  }
  std::vector<int> y;
  y.reserve(dataset.labels.size());
  for (int label : dataset.labels) y.push_back(dense_of_scheme[static_cast<std::size_t>(label)]);

  TrainedModel model;
  model.spec = spec;
  for (int id : scheme_ids) {
    model.classes.push_back(data::scheme_classes(dataset.scheme)[static_cast<std::size_t>(id)]);
  }
  model.vocabulary = dataset.vocab.names;
  model.vocab_fingerprint = dataset.vocab.fingerprint();
  model.impl = make_classifier(spec.algorithm);
  model.impl->fit(BitMatrix::from_dataset(dataset), y, static_cast<int>(scheme_ids.size()), spec);
  return model;
}

std::vector<int> predict_dataset(const TrainedModel& model, const data::Dataset& dataset) {
  if (dataset.vocab.fingerprint() != model.vocab_fingerprint ||
      dataset.n_features() != static_cast<int>(model.vocabulary.size())) {
    throw FingerprintError(
        "dataset vocabulary does not match the model fingerprint (model trained on " +
        std::to_string(model.vocabulary.size()) + " features)");
  }
  const auto& classes = data::scheme_classes(dataset.scheme);
  std::vector<int> scheme_of_dense;
  for (const auto& name : model.classes) {
    auto it = std::find(classes.begin(), classes.end(), name);
    if (it == classes.end()) {
      throw FingerprintError("model class '" + name + "' is not part of scheme " +
                             std::string(data::scheme_name(dataset.scheme)));
    }
    scheme_of_dense.push_back(static_cast<int>(it - classes.begin()));
  }
  std::vector<int> out(static_cast<std::size_t>(dataset.n_rows()));
  for (int r = 0; r < dataset.n_rows(); ++r) {
    int dense = model.predict(std::span<const std::uint8_t>(dataset.rows[static_cast<std::size_t>(r)]));
    out[static_cast<std::size_t>(r)] = scheme_of_dense[static_cast<std::size_t>(dense)];
  }
  return out;
}

}  // namespace retypelab::ml
