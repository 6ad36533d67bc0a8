#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "retypelab/corpus_synth.hpp"
#include "retypelab/eval_harness.hpp"
#include "retypelab/stats.hpp"

using namespace retypelab;
using namespace retypelab::asmx;
using namespace retypelab::data;
using namespace retypelab::eval;

namespace {

// Reference confusion matrix for the high-level decision-tree experiment,
// 600 rows per class. Row/column order here: bool, char, short, int,
// pointer, struct, long_long, float, double, void.
constexpr int kFixtureOrder[10] = {
    0,  // bool
    1,  // char
    7,  // short
    4,  // int
    6,  // pointer
    8,  // struct
    5,  // long_long
    3,  // float
    2,  // double
    9,  // void
};

constexpr int kFixture[10][10] = {
    {483, 61, 0, 1, 12, 0, 41, 0, 0, 2},
    {285, 179, 60, 16, 13, 0, 45, 0, 0, 2},
    {7, 85, 395, 38, 24, 0, 44, 0, 1, 6},
    {4, 38, 67, 184, 111, 132, 59, 0, 0, 5},
    {4, 16, 3, 48, 365, 106, 55, 0, 0, 3},
    {0, 0, 0, 10, 6, 584, 0, 0, 0, 0},
    {0, 4, 0, 5, 28, 3, 554, 0, 0, 6},
    {0, 1, 1, 0, 16, 0, 40, 358, 184, 0},
    {0, 0, 0, 0, 12, 0, 52, 170, 365, 1},
    {3, 2, 0, 2, 3, 0, 41, 0, 0, 549},
};

/// The fixture permuted into canonical (alphabetical) class order.
std::vector<std::vector<int>> fixture_confusion() {
  std::vector<std::vector<int>> m(10, std::vector<int>(10, 0));
  for (int a = 0; a < 10; ++a) {
    for (int p = 0; p < 10; ++p) {
      m[static_cast<std::size_t>(kFixtureOrder[a])][static_cast<std::size_t>(kFixtureOrder[p])] =
          kFixture[a][p];
    }
  }
  return m;
}

int cls(TypeLabel t) { return static_cast<int>(t); }

Dataset rename_rows(Dataset d, const std::string& prefix) {
  for (auto& name : d.row_names) name = prefix + name;
  return d;
}

Dataset synth_dataset(int per_type, std::uint64_t seed, const std::string& prefix) {
  synth::SynthConfig cfg;
  cfg.counts.fill(per_type);
  cfg.rng_seed = seed;
  auto corpus = synth::synthesize_corpus(cfg);
  return rename_rows(build_dataset(corpus.functions, Scheme::HighLevel), prefix);
}

}  // namespace

TEST_CASE("fixture: bool recall is 483/600 = 0.805") {
  Metrics m = metrics_from_confusion(fixture_confusion());
  CHECK(m.support[static_cast<std::size_t>(cls(TypeLabel::Bool))] == 600);
  CHECK(m.recall[static_cast<std::size_t>(cls(TypeLabel::Bool))] ==
        doctest::Approx(0.805).epsilon(1e-12));
}

TEST_CASE("fixture: bool/char pairwise misclassification is 28.8%") {
  Metrics m = metrics_from_confusion(fixture_confusion());
  double x = pairwise_misclassification(m, cls(TypeLabel::Bool), cls(TypeLabel::Char));
  CHECK(x == doctest::Approx(346.0 / 1200.0).epsilon(1e-12));
  CHECK(std::fabs(x - 0.288) < 0.0005);  // three significant figures
}

TEST_CASE("fixture: int/pointer/struct cross error is 22.9%") {
  Metrics m = metrics_from_confusion(fixture_confusion());
  double x = block_cross_error(
      m, {cls(TypeLabel::Int), cls(TypeLabel::Pointer), cls(TypeLabel::Struct)});
  CHECK(x == doctest::Approx(413.0 / 1800.0).epsilon(1e-12));
  CHECK(std::fabs(x - 0.229) < 0.0005);
}

TEST_CASE("metric identities over random confusion data") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    int n_classes = 2 + static_cast<int>(rng.next_below(6));
    int n = 20 + static_cast<int>(rng.next_below(100));
    std::vector<int> truth, pred;
    for (int i = 0; i < n; ++i) {
      truth.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_classes))));
      pred.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_classes))));
    }
    Metrics m = compute_metrics(pred, truth, n_classes);
    long long diag = 0, total = 0;
    double f1_sum = 0.0;
    for (int c = 0; c < n_classes; ++c) {
      auto ci = static_cast<std::size_t>(c);
      diag += m.confusion[ci][ci];
      f1_sum += m.f1[ci];
      long long row_sum = 0;
      for (int p = 0; p < n_classes; ++p) row_sum += m.confusion[ci][static_cast<std::size_t>(p)];
      total += row_sum;
      CHECK(row_sum == m.support[ci]);
      // recall * support = diagonal entry
      CHECK(m.recall[ci] * m.support[ci] == doctest::Approx(static_cast<double>(m.confusion[ci][ci])));
    }
    CHECK(m.accuracy == doctest::Approx(static_cast<double>(diag) / static_cast<double>(total)));
    CHECK(m.macro_f1 == doctest::Approx(f1_sum / n_classes));
  }
  CHECK_THROWS_AS(compute_metrics({}, {}, 3), std::invalid_argument);
}

TEST_CASE("student-t critical values match reference figures") {
  CHECK(stats::t_critical(29, 0.95) == doctest::Approx(2.045230).epsilon(1e-4));
  CHECK(stats::t_critical(9, 0.95) == doctest::Approx(2.262157).epsilon(1e-4));
  CHECK(stats::t_critical(1, 0.95) == doctest::Approx(12.7062).epsilon(1e-3));
}

TEST_CASE("ci95 equals mean +/- t(0.975, n-1) * sd / sqrt(n)") {
  std::vector<double> accs;
  Rng rng(5);
  for (int i = 0; i < 30; ++i) accs.push_back(0.8 + 0.05 * rng.next_double());
  auto [lo, hi] = stats::ci95(accs);
  double mean = stats::mean(accs);
  double sd = stats::sample_sd(accs);
  double half = 2.045229642 * sd / std::sqrt(30.0);
  CHECK(lo == doctest::Approx(mean - half).epsilon(1e-6));
  CHECK(hi == doctest::Approx(mean + half).epsilon(1e-6));
  CHECK(lo <= mean);
  CHECK(mean <= hi);
}

TEST_CASE("method 1 on a separable synthetic corpus memorizes to >= 0.99") {
  Dataset synth_set = synth_dataset(12, 100, "s:");
  Dataset empty;
  empty.scheme = Scheme::HighLevel;
  ml::ModelSpec tree;
  tree.algorithm = "decision_tree";
  RepeatedEval r = evaluate_method1(empty, synth_set, tree, 7, 30);
  CHECK(r.accuracies.size() == 30);  // repetition count honored
  CHECK(r.mean >= 0.99);
  CHECK(r.ci_lo <= r.mean);
  CHECK(r.mean <= r.ci_hi);
}

TEST_CASE("method 2 converges at a small fraction when distributions match") {
  Dataset real = synth_dataset(10, 200, "r:");
  Dataset synth_set = synth_dataset(10, 300, "s:");
  ml::ModelSpec tree;
  tree.algorithm = "decision_tree";
  Method2Result r = evaluate_method2(real, synth_set, tree, 3, 10, 0.01, 5);
  CHECK(r.trace.converged);
  CHECK(r.trace.stop_x <= 20.0);
  CHECK(r.at_stop.accuracies.size() == 5);
  CHECK(r.at_stop.mean >= 0.9);
}

TEST_CASE("method 2 on an adversarial real distribution starts near chance") {
  Dataset real = synth_dataset(10, 400, "r:");
  // swap the labels cyclically: every real template now carries a wrong label
  for (int& label : real.labels) label = (label + 1) % real.n_classes();
  Dataset synth_set = synth_dataset(10, 500, "s:");
  ml::ModelSpec tree;
  tree.algorithm = "decision_tree";
  Method2Result r = evaluate_method2(real, synth_set, tree, 3, 10, 0.01, 3);
  REQUIRE_FALSE(r.trace.accuracies.empty());
  CHECK(r.trace.accuracies[0] <= 0.3);
}

TEST_CASE("method 3: same generator family transfers across programs") {
  std::vector<Dataset> programs = {synth_dataset(8, 600, "p0:"), synth_dataset(8, 700, "p1:")};
  ml::ModelSpec tree;
  tree.algorithm = "decision_tree";
  auto results = evaluate_method3(programs, {"prog0", "prog1"}, tree, 5);
  REQUIRE(results.size() == 2);
  for (const auto& r : results) {
    CHECK(r.metrics.accuracy >= 0.9);
    CHECK(r.test_rows == 80);
  }
}

TEST_CASE("method 3 completes when the held-out program has an unseen class") {
  synth::SynthConfig without_struct;
  without_struct.counts.fill(6);
  without_struct.counts[static_cast<std::size_t>(TypeLabel::Struct)] = 0;
  without_struct.rng_seed = 800;
  auto corpus_a = synth::synthesize_corpus(without_struct);
  Dataset a = rename_rows(build_dataset(corpus_a.functions, Scheme::HighLevel), "a:");
  Dataset b = synth_dataset(6, 900, "b:");
  ml::ModelSpec tree;
  tree.algorithm = "decision_tree";
  auto results = evaluate_method3({a, b}, {"a", "b"}, tree, 5);
  REQUIRE(results.size() == 2);
  // holding out b: struct never appears in training, so its recall is 0
  CHECK(results[1].metrics.recall[static_cast<std::size_t>(cls(TypeLabel::Struct))] == 0.0);
}

TEST_CASE("method 3 rejects a single program and detects symbol leakage") {
  Dataset a = synth_dataset(6, 1000, "x:");
  ml::ModelSpec tree;
  tree.algorithm = "decision_tree";
  CHECK_THROWS_AS(evaluate_method3({a}, {"a"}, tree, 1), std::invalid_argument);
  // identical symbols across programs are leakage
  Dataset b = synth_dataset(6, 1100, "x:");
  Dataset c = synth_dataset(6, 1000, "x:");
  CHECK_THROWS_AS(evaluate_method3({a, c}, {"a", "c"}, tree, 1), std::runtime_error);
}

TEST_CASE("dataset-size loop: constant accuracies stop at the first full window") {
  ConvergenceTrace trace =
      converge_dataset_size([](int) { return 0.8; }, 1000, 1000, 10, 0.02, 100);
  CHECK(trace.converged);
  CHECK(trace.stop_x == 10000.0);  // tenth point
  CHECK(trace.covs.front() < 1e-12);
}

TEST_CASE("dataset-size loop reproduces the replayed-trace size convention") {
  // alternating accuracies keep the CoV high until 17000..26000 settles
  auto accuracy_at = [](int size) {
    if (size <= 16000) return size % 2000 == 0 ? 0.5 : 0.7;
    return 0.8;
  };
  ConvergenceTrace trace = converge_dataset_size(accuracy_at, 1000, 1000, 10, 0.02, 100);
  CHECK(trace.converged);
  CHECK(trace.stop_x == 26000.0);
  CHECK(recommended_size(trace, 10, 1000) == 16000);
}

TEST_CASE("the stop index is the first window satisfying the threshold") {
  // the trace settles twice; the loop must stop at the earlier window even
  // though later windows also qualify
  auto accuracy_at = [](int size) {
    if (size <= 2000) return size == 1000 ? 0.2 : 0.9;
    if (size <= 12000) return 0.6;   // settles: window 3000..12000 qualifies at 12000
    if (size <= 14000) return 0.3;   // disturbance
    return 0.8;                      // settles again much later
  };
  ConvergenceTrace trace = converge_dataset_size(accuracy_at, 1000, 1000, 10, 0.02, 200);
  CHECK(trace.converged);
  CHECK(trace.stop_x == 12000.0);
}

TEST_CASE("dataset-size loop flags traces that never settle") {
  auto oscillating = [](int size) { return size % 2000 == 0 ? 0.2 : 0.9; };
  ConvergenceTrace trace = converge_dataset_size(oscillating, 1000, 1000, 10, 0.02, 40);
  CHECK_FALSE(trace.converged);
  CHECK(trace.xs.size() == 40);
  // degenerate nonpositive accuracy aborts with a diagnostic
  CHECK_THROWS_AS(converge_dataset_size([](int) { return 0.0; }, 1000, 1000, 10, 0.02, 40),
                  std::runtime_error);
}

TEST_CASE("model comparison by confidence-interval overlap") {
  RepeatedEval a, b;
  a.mean = 0.81;
  a.ci_lo = 0.80;
  a.ci_hi = 0.82;
  b.mean = 0.71;
  b.ci_lo = 0.70;
  b.ci_hi = 0.72;
  CHECK(compare_models(a, b) == Comparison::ABetter);
  CHECK(compare_models(b, a) == Comparison::BBetter);
  RepeatedEval c, d;
  c.mean = 0.82;
  c.ci_lo = 0.80;
  c.ci_hi = 0.84;
  d.mean = 0.845;
  d.ci_lo = 0.83;
  d.ci_hi = 0.86;
  CHECK(compare_models(c, d) == Comparison::NotSignificant);
  CHECK(compare_models(c, c) == Comparison::NotSignificant);
}

TEST_CASE("decompiler baselines embed the published reference rows") {
  const auto& high = decompiler_baselines(Scheme::HighLevel);
  REQUIRE(high.size() == 4);
  CHECK(high[0].f1 == doctest::Approx(0.30));
  const auto& size = decompiler_baselines(Scheme::SizeRep);
  CHECK(size[0].accuracy == doctest::Approx(0.583));
}
