#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "retypelab/classifiers.hpp"
#include "retypelab/corpus_synth.hpp"
#include "retypelab/dataset.hpp"
#include "retypelab/eval_harness.hpp"
#include "retypelab/parallel.hpp"
#include "retypelab/rule_miner.hpp"

using namespace retypelab;

namespace {

/// Runs fn with the worker cap set to n, restoring the cap afterwards.
template <class F>
auto with_threads(int n, F&& fn) {
  par::set_max_threads(n);
  auto result = fn();
  par::set_max_threads(0);
  return result;
}

data::Dataset sample_dataset(std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.counts.fill(12);
  cfg.rng_seed = seed;
  auto corpus = synth::synthesize_corpus(cfg);
  return data::build_dataset(corpus.functions, data::Scheme::HighLevel);
}

}  // namespace

TEST_CASE("blocked_sum is identical across thread counts") {
  auto term = [](std::int64_t i) { return 1.0 / (1.0 + static_cast<double>(i)); };
  double serial = with_threads(1, [&] { return par::blocked_sum(100000, term); });
  double parallel = with_threads(0, [&] { return par::blocked_sum(100000, term); });
  double capped = with_threads(3, [&] { return par::blocked_sum(100000, term); });
  CHECK(serial == parallel);  // bitwise: same block partition, same order
  CHECK(serial == capped);
}

TEST_CASE("corpus synthesis is byte-identical across thread counts") {
  synth::SynthConfig cfg;
  cfg.counts.fill(10);
  cfg.rng_seed = 42;
  auto serial = with_threads(1, [&] { return synth::synthesize_corpus(cfg).listing_text; });
  auto parallel = with_threads(0, [&] { return synth::synthesize_corpus(cfg).listing_text; });
  CHECK(serial == parallel);
}

TEST_CASE("featurization matches between the serial and parallel paths") {
  synth::SynthConfig cfg;
  cfg.counts.fill(10);
  cfg.rng_seed = 43;
  auto corpus = synth::synthesize_corpus(cfg);
  auto serial =
      with_threads(1, [&] { return data::build_dataset(corpus.functions, data::Scheme::HighLevel); });
  auto parallel =
      with_threads(0, [&] { return data::build_dataset(corpus.functions, data::Scheme::HighLevel); });
  CHECK(serial.vocab.names == parallel.vocab.names);
  CHECK(serial.rows == parallel.rows);
  CHECK(serial.labels == parallel.labels);
}

TEST_CASE("ensemble training gives the same model either way") {
  data::Dataset d = sample_dataset(7);
  for (const char* algorithm : {"random_forest", "extra_trees", "logistic_regression"}) {
    ml::ModelSpec spec;
    spec.algorithm = algorithm;
    spec.rng_seed = 5;
    if (spec.algorithm != "logistic_regression") spec.params["n_trees"] = "20";
    auto serial = with_threads(1, [&] { return ml::predict_dataset(ml::train(spec, d), d); });
    auto parallel = with_threads(0, [&] { return ml::predict_dataset(ml::train(spec, d), d); });
    CAPTURE(algorithm);
    CHECK(serial == parallel);
  }
}

TEST_CASE("repeated evaluation reproduces accuracies across thread counts") {
  data::Dataset d = sample_dataset(9);
  data::Dataset empty;
  empty.scheme = d.scheme;
  ml::ModelSpec tree;
  tree.algorithm = "decision_tree";
  auto serial =
      with_threads(1, [&] { return eval::evaluate_method1(empty, d, tree, 3, 10).accuracies; });
  auto parallel =
      with_threads(0, [&] { return eval::evaluate_method1(empty, d, tree, 3, 10).accuracies; });
  CHECK(serial == parallel);
}

TEST_CASE("apriori counting is schedule-independent") {
  data::Dataset d = sample_dataset(11);
  rules::MineParams params;
  params.min_support = 0.02;
  auto key = [](const std::vector<rules::AssociationRule>& rules) {
    std::vector<std::pair<std::vector<int>, double>> keys;
    for (const auto& r : rules) keys.emplace_back(r.antecedents, r.support);
    return keys;
  };
  auto serial = with_threads(1, [&] { return key(rules::mine_rules(d, params)); });
  auto parallel = with_threads(0, [&] { return key(rules::mine_rules(d, params)); });
  CHECK(serial == parallel);
}
