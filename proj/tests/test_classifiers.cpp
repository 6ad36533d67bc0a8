#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "retypelab/classifiers.hpp"
#include "retypelab/rng.hpp"

using namespace retypelab;
using namespace retypelab::data;
using namespace retypelab::ml;

namespace {

Dataset make_dataset(const std::vector<std::vector<std::uint8_t>>& rows,
                     const std::vector<int>& labels, int n_features) {
  Dataset d;
  d.scheme = Scheme::HighLevel;
  for (int f = 0; f < n_features; ++f) d.vocab.add("RET: f" + std::to_string(f));
  d.rows = rows;
  d.labels = labels;
  for (std::size_t r = 0; r < rows.size(); ++r) d.row_names.push_back("_r" + std::to_string(r));
  return d;
}

Dataset random_dataset(Rng& rng, int n_rows, int n_features, int n_classes) {
  std::vector<std::vector<std::uint8_t>> rows;
  std::vector<int> labels;
  for (int r = 0; r < n_rows; ++r) {
    std::vector<std::uint8_t> row;
    for (int f = 0; f < n_features; ++f) row.push_back(rng.next_bool(0.4) ? 1 : 0);
    rows.push_back(std::move(row));
    labels.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_classes))));
  }
  // ensure at least two classes are present
  labels[0] = 0;
  labels[1] = 1;
  return make_dataset(rows, labels, n_features);
}

/// Planted corpus: class c is exactly the rows where column c is set.
Dataset planted_dataset(int per_class, int n_classes, int extra_noise, Rng& rng) {
  std::vector<std::vector<std::uint8_t>> rows;
  std::vector<int> labels;
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      std::vector<std::uint8_t> row(static_cast<std::size_t>(n_classes + extra_noise), 0);
      row[static_cast<std::size_t>(c)] = 1;
      for (int f = 0; f < extra_noise; ++f) {
        row[static_cast<std::size_t>(n_classes + f)] = rng.next_bool(0.5) ? 1 : 0;
      }
      rows.push_back(std::move(row));
      labels.push_back(c);
    }
  }
  return make_dataset(rows, labels, n_classes + extra_noise);
}

ModelSpec spec_of(const std::string& algorithm, std::uint64_t seed = 1,
                  std::map<std::string, std::string> params = {}) {
  ModelSpec spec;
  spec.algorithm = algorithm;
  spec.rng_seed = seed;
  spec.params = std::move(params);
  return spec;
}

}  // namespace

TEST_CASE("bernoulli NB posteriors equal brute-force enumeration") {
  // 4 hand-built rows over 3 features, alpha = 1
  Dataset d = make_dataset({{1, 0, 1}, {1, 1, 0}, {0, 0, 1}, {0, 1, 1}}, {0, 0, 1, 1}, 3);
  TrainedModel model = train(spec_of("bernoulli_nb"), d);

  auto brute_posterior = [&](const std::vector<std::uint8_t>& x) {
    // direct product form of the Bernoulli likelihood, no logs
    double alpha = 1.0;
    std::vector<double> post;
    for (int c = 0; c < 2; ++c) {
      double n_c = 2.0;
      double prior = n_c / 4.0;
      double likelihood = 1.0;
      for (int f = 0; f < 3; ++f) {
        double count = 0.0;
        for (int r = 0; r < 4; ++r) {
          if (d.labels[static_cast<std::size_t>(r)] == c &&
              d.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(f)]) {
            count += 1.0;
          }
        }
        double theta = (count + alpha) / (n_c + 2.0 * alpha);
        likelihood *= x[static_cast<std::size_t>(f)] ? theta : 1.0 - theta;
      }
      post.push_back(prior * likelihood);
    }
    double z = post[0] + post[1];
    for (double& p : post) p /= z;
    return post;
  };

  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint8_t> x = {static_cast<std::uint8_t>(rng.next_below(2)),
                                   static_cast<std::uint8_t>(rng.next_below(2)),
                                   static_cast<std::uint8_t>(rng.next_below(2))};
    auto expected = brute_posterior(x);
    auto got = model.predict_proba(x);
    REQUIRE(got.size() == expected.size());
    for (std::size_t c = 0; c < got.size(); ++c) {
      CHECK(std::fabs(got[c] - expected[c]) < 1e-9);
    }
    double sum = got[0] + got[1];
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("decision tree reaches 100% training accuracy on separable data") {
  Rng rng(3);
  Dataset d = planted_dataset(6, 4, 3, rng);
  TrainedModel model = train(spec_of("decision_tree"), d);
  auto pred = predict_dataset(model, d);
  CHECK(pred == d.labels);
}

TEST_CASE("single-member forest without bagging equals the decision tree") {
  Rng rng(17);
  Dataset d = random_dataset(rng, 60, 10, 3);
  TrainedModel tree = train(spec_of("decision_tree", 5), d);
  TrainedModel forest = train(spec_of("random_forest", 5,
                                      {{"n_trees", "1"},
                                       {"bootstrap", "off"},
                                       {"feature_subsample", "all"},
                                       {"max_depth", "0"}}),
                              d);
  Rng probe(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint8_t> x;
    for (int f = 0; f < 10; ++f) x.push_back(probe.next_bool(0.5) ? 1 : 0);
    CHECK(tree.predict(x) == forest.predict(x));
  }
}

TEST_CASE("knn with k=1 returns the label of an identical training row") {
  Dataset d = make_dataset({{1, 0, 0, 1}, {0, 1, 1, 0}, {1, 1, 0, 0}}, {0, 1, 2}, 4);
  TrainedModel model = train(spec_of("knn", 1, {{"k", "1"}}), d);
  CHECK(predict_dataset(model, d) == d.labels);
}

TEST_CASE("probabilities normalize where defined") {
  Rng rng(23);
  Dataset d = random_dataset(rng, 40, 6, 3);
  for (const char* algorithm :
       {"bernoulli_nb", "decision_tree", "random_forest", "extra_trees", "gradient_boosting",
        "knn", "logistic_regression"}) {
    ModelSpec spec = spec_of(algorithm, 2);
    if (spec.algorithm == "gradient_boosting") spec.params["rounds"] = "5";
    TrainedModel model = train(spec, d);
    REQUIRE(model.has_proba());
    std::vector<std::uint8_t> x = {1, 0, 1, 0, 1, 0};
    auto p = model.predict_proba(x);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CAPTURE(algorithm);
    CHECK(std::fabs(sum - 1.0) < 1e-9);
  }
  Dataset d2 = random_dataset(rng, 30, 5, 2);
  TrainedModel perceptron = train(spec_of("perceptron", 3), d2);
  CHECK_FALSE(perceptron.has_proba());
  CHECK_THROWS(perceptron.predict_proba(std::vector<std::uint8_t>{1, 0, 1, 0, 1}));
}

TEST_CASE("gradient boosting with 0 rounds predicts the class prior argmax") {
  Dataset d = make_dataset({{1, 0}, {0, 1}, {1, 1}, {0, 0}, {1, 0}}, {0, 0, 0, 1, 1}, 2);
  TrainedModel model = train(spec_of("gradient_boosting", 1, {{"rounds", "0"}}), d);
  // class 0 has the larger prior; every input maps to it
  for (const std::vector<std::uint8_t>& x :
       {std::vector<std::uint8_t>{0, 0}, {1, 0}, {0, 1}, {1, 1}}) {
    CHECK(predict_dataset(model, d)[0] == 0);
    CHECK(model.predict(x) == 0);
  }
}

TEST_CASE("boosting reduces training log-loss over rounds") {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    Dataset d = random_dataset(rng, 50, 8, 3);
    auto log_loss = [&](const TrainedModel& model) {
      double loss = 0.0;
      // class ids are dense in these datasets, so scheme index == dense index
      for (int r = 0; r < d.n_rows(); ++r) {
        auto p = model.predict_proba(d.rows[static_cast<std::size_t>(r)]);
        loss -= std::log(std::max(p[static_cast<std::size_t>(d.labels[static_cast<std::size_t>(r)])], 1e-12));
      }
      return loss / d.n_rows();
    };
    TrainedModel before = train(spec_of("gradient_boosting", 4, {{"rounds", "0"}}), d);
    TrainedModel after = train(spec_of("gradient_boosting", 4,
                                       {{"rounds", "20"}, {"shrinkage", "0.1"}}),
                               d);
    CHECK(log_loss(after) <= log_loss(before) + 1e-12);
  }
}

TEST_CASE("logistic gradient matches central finite differences") {
  Rng rng(41);
  int failures = 0;
  for (int trial = 0; trial < 20; ++trial) {
    int n_rows = 4 + static_cast<int>(rng.next_below(5));
    int n_features = 3 + static_cast<int>(rng.next_below(3));
    int n_classes = 2 + static_cast<int>(rng.next_below(2));
    Dataset d = random_dataset(rng, n_rows, n_features, n_classes);
    // dense class ids: relabel into [0, n_classes)
    BitMatrix x = BitMatrix::from_dataset(d);
    std::vector<int> y = d.labels;
    for (int& label : y) label %= n_classes;
    y[0] = 0;
    y[1] = 1;

    auto k = static_cast<std::size_t>(n_classes);
    auto f = static_cast<std::size_t>(n_features);
    std::vector<double> w(k * f), b(k);
    for (double& v : w) v = rng.next_double() - 0.5;
    for (double& v : b) v = rng.next_double() - 0.5;
    double l2 = 1e-3;

    std::vector<double> grad_w, grad_b;
    logistic_gradient(x, y, n_classes, w, b, l2, grad_w, grad_b);

    const double h = 1e-6;
    double max_rel = 0.0;
    auto check_coord = [&](std::vector<double>& vec, std::size_t i, double analytic) {
      double keep = vec[i];
      vec[i] = keep + h;
      double up = logistic_loss(x, y, n_classes, w, b, l2);
      vec[i] = keep - h;
      double down = logistic_loss(x, y, n_classes, w, b, l2);
      vec[i] = keep;
      double numeric = (up - down) / (2.0 * h);
      double rel = std::fabs(numeric - analytic) / std::max(1.0, std::fabs(analytic));
      max_rel = std::max(max_rel, rel);
    };
    for (std::size_t i = 0; i < w.size(); ++i) check_coord(w, i, grad_w[i]);
    for (std::size_t i = 0; i < b.size(); ++i) check_coord(b, i, grad_b[i]);
    if (max_rel >= 1e-5) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("feature importances: single feature, planted argmax, unit sum") {
  Dataset single = make_dataset({{1}, {0}, {1}, {0}}, {0, 0, 1, 1}, 1);
  // column 0 splits imperfectly but is the only candidate
  single.labels = {0, 1, 0, 1};
  single.rows = {{1}, {0}, {1}, {0}};
  TrainedModel tree = train(spec_of("decision_tree"), single);
  auto imp = tree.feature_importances();
  REQUIRE(imp.size() == 1);
  CHECK(imp[0] == doctest::Approx(1.0).epsilon(1e-9));

  Rng rng(53);
  // column 0 perfectly identifies class 0; columns 1.. are noise
  std::vector<std::vector<std::uint8_t>> rows;
  std::vector<int> labels;
  for (int r = 0; r < 80; ++r) {
    int label = r % 2;
    std::vector<std::uint8_t> row(6, 0);
    row[0] = label == 0 ? 1 : 0;
    for (int f = 1; f < 6; ++f) row[static_cast<std::size_t>(f)] = rng.next_bool(0.5) ? 1 : 0;
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  Dataset planted = make_dataset(rows, labels, 6);
  for (const char* algorithm : {"decision_tree", "random_forest", "extra_trees", "gradient_boosting"}) {
    ModelSpec spec = spec_of(algorithm, 9);
    if (spec.algorithm == "gradient_boosting") spec.params["rounds"] = "10";
    TrainedModel model = train(spec, planted);
    auto importances = model.feature_importances();
    REQUIRE(importances.size() == 6);
    double sum = 0.0;
    for (double v : importances) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CAPTURE(algorithm);
    CHECK(std::fabs(sum - 1.0) < 1e-9);
    // the planted column dominates
    for (std::size_t f = 1; f < 6; ++f) CHECK(importances[0] > importances[f]);
  }
  // importances are undefined for the rest
  CHECK_THROWS(train(spec_of("bernoulli_nb"), planted).feature_importances());
}

TEST_CASE("identical (spec, seed, dataset) give identical predictions") {
  Rng rng(61);
  Dataset d = random_dataset(rng, 50, 8, 3);
  for (const std::string& algorithm : algorithm_names()) {
    ModelSpec spec = spec_of(algorithm, 77);
    if (spec.algorithm == "gradient_boosting") spec.params["rounds"] = "5";
    TrainedModel a = train(spec, d);
    TrainedModel b = train(spec, d);
    CAPTURE(algorithm);
    CHECK(predict_dataset(a, d) == predict_dataset(b, d));
  }
}

TEST_CASE("permuting vocabulary columns leaves predictions unchanged") {
  Rng rng(71);
  Dataset d = random_dataset(rng, 40, 6, 3);
  std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  Dataset permuted = select_columns(d, perm);
  for (const char* algorithm : {"bernoulli_nb", "decision_tree", "knn", "logistic_regression"}) {
    TrainedModel original = train(spec_of(algorithm, 5), d);
    TrainedModel shuffled = train(spec_of(algorithm, 5), permuted);
    CAPTURE(algorithm);
    CHECK(predict_dataset(original, d) == predict_dataset(shuffled, permuted));
  }
}

TEST_CASE("save/load round-trips predictions exactly") {
  namespace fs = std::filesystem;
  Rng rng(83);
  Dataset d = random_dataset(rng, 40, 7, 3);
  std::string path = (fs::temp_directory_path() / "retypelab_model.json").string();
  for (const std::string& algorithm : algorithm_names()) {
    ModelSpec spec = spec_of(algorithm, 13);
    if (spec.algorithm == "gradient_boosting") spec.params["rounds"] = "3";
    TrainedModel model = train(spec, d);
    save_model(model, path);
    TrainedModel loaded = load_model(path);
    CHECK(loaded.spec.algorithm == model.spec.algorithm);
    CHECK(loaded.classes == model.classes);
    CHECK(loaded.vocab_fingerprint == model.vocab_fingerprint);
    Rng probe(19);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<std::uint8_t> x;
      for (int f = 0; f < 7; ++f) x.push_back(probe.next_bool(0.5) ? 1 : 0);
      CAPTURE(algorithm);
      CHECK(model.predict(x) == loaded.predict(x));
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("corrupted model files and fingerprint mismatches are structured errors") {
  namespace fs = std::filesystem;
  std::string path = (fs::temp_directory_path() / "retypelab_corrupt.json").string();
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_model(path), ModelIoError);
  {
    std::ofstream out(path);
    out << "{\"format\":\"something-else\",\"version\":1}";
  }
  CHECK_THROWS_AS(load_model(path), ModelIoError);
  std::remove(path.c_str());

  // model trained on vocabulary V applied to a dataset with V' != V
  Rng rng(91);
  Dataset d = random_dataset(rng, 30, 5, 2);
  TrainedModel model = train(spec_of("decision_tree"), d);
  Dataset other = random_dataset(rng, 30, 5, 2);
  other.vocab = FeatureVocabulary{};
  for (int f = 0; f < 5; ++f) other.vocab.add("RET: other" + std::to_string(f));
  CHECK_THROWS_AS(predict_dataset(model, other), FingerprintError);
  // dimension mismatch on a raw vector
  CHECK_THROWS_AS(model.predict(std::vector<std::uint8_t>{1, 0}), FingerprintError);
}

TEST_CASE("degenerate datasets are rejected") {
  Dataset single_class = make_dataset({{1, 0}, {0, 1}}, {0, 0}, 2);
  CHECK_THROWS_AS(train(spec_of("decision_tree"), single_class), TrainError);
  Dataset empty_vocab;
  empty_vocab.scheme = Scheme::HighLevel;
  empty_vocab.rows = {{}, {}};
  empty_vocab.labels = {0, 1};
  empty_vocab.row_names = {"_a", "_b"};
  CHECK_THROWS_AS(train(spec_of("decision_tree"), empty_vocab), TrainError);
  CHECK_THROWS_AS(make_classifier("quantum_svm"), TrainError);
}
