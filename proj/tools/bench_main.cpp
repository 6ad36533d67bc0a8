// Serial vs OpenMP timing for the data-parallel kernels: corpus
// featurization, forest training, repeated evaluation, and Apriori support
// counting. The two paths must produce identical results; this binary
// reports the wall-clock ratio.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "retypelab/classifiers.hpp"
#include "retypelab/corpus_synth.hpp"
#include "retypelab/dataset.hpp"
#include "retypelab/eval_harness.hpp"
#include "retypelab/parallel.hpp"
#include "retypelab/rule_miner.hpp"

using namespace retypelab;

namespace {

double time_ms(const std::function<void()>& fn) {
  auto start = std::chrono::steady_clock::now();
  fn();
  auto end = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(end - start).count();
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %10.1f ms %10.1f ms %8.2fx\n", name, serial_ms, parallel_ms,
              parallel_ms > 0.0 ? serial_ms / parallel_ms : 0.0);
}

}  // namespace

int main(int argc, char** argv) {
  int per_type = argc > 1 ? std::atoi(argv[1]) : 200;

  synth::SynthConfig cfg;
  cfg.counts.fill(per_type);
  cfg.rng_seed = 7;
  synth::SynthCorpus corpus = synth::synthesize_corpus(cfg);

  std::printf("retypelab-bench: %zu functions, OpenMP %s, %d thread(s) available\n\n",
              corpus.functions.size(), par::openmp_enabled() ? "on" : "off",
              par::effective_threads());
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  auto with_threads = [](int n, const std::function<void()>& fn) {
    par::set_max_threads(n);
    fn();
    par::set_max_threads(0);
  };

  // featurization (extract + generalize + matrix)
  data::Dataset dataset;
  double feat_serial = time_ms([&] {
    with_threads(1, [&] { dataset = data::build_dataset(corpus.functions, data::Scheme::HighLevel); });
  });
  data::Dataset dataset_par;
  double feat_parallel = time_ms(
      [&] { with_threads(0, [&] { dataset_par = data::build_dataset(corpus.functions, data::Scheme::HighLevel); }); });
  row("featurize corpus", feat_serial, feat_parallel);
  if (dataset.rows != dataset_par.rows || dataset.vocab.names != dataset_par.vocab.names) {
    std::printf("MISMATCH: featurization differs between serial and parallel runs\n");
    return 1;
  }

  // forest training
  ml::ModelSpec forest;
  forest.algorithm = "random_forest";
  forest.rng_seed = 11;
  ml::TrainedModel serial_model, parallel_model;
  double forest_serial =
      time_ms([&] { with_threads(1, [&] { serial_model = ml::train(forest, dataset); }); });
  double forest_parallel =
      time_ms([&] { with_threads(0, [&] { parallel_model = ml::train(forest, dataset); }); });
  row("random_forest fit", forest_serial, forest_parallel);
  auto serial_pred = ml::predict_dataset(serial_model, dataset);
  auto parallel_pred = ml::predict_dataset(parallel_model, dataset);
  if (serial_pred != parallel_pred) {
    std::printf("MISMATCH: forest predictions differ between serial and parallel runs\n");
    return 1;
  }

  // repeated evaluation
  ml::ModelSpec tree;
  tree.algorithm = "decision_tree";
  data::Dataset empty;
  empty.scheme = dataset.scheme;
  eval::RepeatedEval eval_serial, eval_parallel;
  double eval_serial_ms = time_ms(
      [&] { with_threads(1, [&] { eval_serial = eval::evaluate_method1(empty, dataset, tree, 3); }); });
  double eval_parallel_ms = time_ms(
      [&] { with_threads(0, [&] { eval_parallel = eval::evaluate_method1(empty, dataset, tree, 3); }); });
  row("30-repetition evaluation", eval_serial_ms, eval_parallel_ms);
  if (eval_serial.accuracies != eval_parallel.accuracies) {
    std::printf("MISMATCH: evaluation accuracies differ between serial and parallel runs\n");
    return 1;
  }

  // apriori support counting
  rules::MineParams params;
  params.min_support = 0.02;
  std::vector<rules::AssociationRule> rules_serial, rules_parallel;
  double mine_serial =
      time_ms([&] { with_threads(1, [&] { rules_serial = rules::mine_rules(dataset, params); }); });
  double mine_parallel =
      time_ms([&] { with_threads(0, [&] { rules_parallel = rules::mine_rules(dataset, params); }); });
  row("apriori mining", mine_serial, mine_parallel);
  if (rules_serial.size() != rules_parallel.size()) {
    std::printf("MISMATCH: rule counts differ between serial and parallel runs\n");
    return 1;
  }

  std::printf("\nall kernels produced identical results on both paths\n");
  return 0;
}
