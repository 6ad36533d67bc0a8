#pragma once

#include <functional>
#include <string>
#include <vector>

#include "retypelab/classifiers.hpp"
#include "retypelab/dataset.hpp"

namespace retypelab::eval {

struct Metrics {
  double accuracy = 0.0;
  std::vector<double> precision;  // per class, canonical order
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<int> support;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::vector<int>> confusion;  // [actual][predicted]
};

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& truths,
                        int n_classes);

Metrics metrics_from_confusion(const std::vector<std::vector<int>>& confusion);

/// Fraction of rows of classes a and b predicted as the other one.
double pairwise_misclassification(const Metrics& m, int a, int b);

/// Fraction of rows of the given classes predicted as a *different* member
/// of the same set.
double block_cross_error(const Metrics& m, const std::vector<int>& classes);

struct RepeatedEval {
  std::vector<double> accuracies;
  double mean = 0.0;
  double sd = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  /// Metrics over the confusion matrices summed across repetitions.
  Metrics aggregate;
};

RepeatedEval summarize_repetitions(const std::vector<double>& accuracies,
                                   const std::vector<std::vector<std::vector<int>>>& confusions);

inline constexpr int kDefaultRepetitions = 30;

/// Method 1: merge real+synthetic, 30 stratified shuffled 80/20 splits.
RepeatedEval evaluate_method1(const data::Dataset& real, const data::Dataset& synth,
                              const ml::ModelSpec& spec, std::uint64_t seed,
                              int repetitions = kDefaultRepetitions);

struct ConvergenceTrace {
  std::vector<double> xs;
  std::vector<double> accuracies;
  std::vector<double> covs;  // trailing-window CoV once the window fills
  double stop_x = 0.0;
  bool converged = false;
};

struct Method2Result {
  ConvergenceTrace trace;     // x = percentage of real functions in training
  RepeatedEval at_stop;
  double holdout_fraction = 0.2;
};

/// Method 2: fixed 20% real holdout; training grows from all-synthetic by
/// 1% steps of real functions until the trailing-10 CoV of holdout accuracy
/// drops below 1%.
Method2Result evaluate_method2(const data::Dataset& real, const data::Dataset& synth,
                               const ml::ModelSpec& spec, std::uint64_t seed, int window = 10,
                               double cov_threshold = 0.01,
                               int repetitions = kDefaultRepetitions);

struct ProgramEval {
  std::string program;
  Metrics metrics;
  int test_rows = 0;
};

/// Method 3: leave-one-program-out; no function of the held-out program is
/// trained on.
std::vector<ProgramEval> evaluate_method3(const std::vector<data::Dataset>& programs,
                                          const std::vector<std::string>& names,
                                          const ml::ModelSpec& spec, std::uint64_t seed);

/// Dataset-size convergence loop over an accuracy source (the production
/// source synthesizes and evaluates; tests replay fixed traces). Stops at
/// the first x whose trailing-window CoV is below the threshold.
ConvergenceTrace converge_dataset_size(const std::function<double(int)>& accuracy_at, int start,
                                       int step, int window, double threshold, int max_points);

/// The reported recommended size backs off the trailing window:
/// stop_x - window * step.
int recommended_size(const ConvergenceTrace& trace, int window, int step);

enum class Comparison { ABetter, BBetter, NotSignificant };

/// Non-overlapping 95% confidence intervals decide a winner by mean.
Comparison compare_models(const RepeatedEval& a, const RepeatedEval& b);

/// Published decompiler scores quoted as fixed baselines in reports.
struct DecompilerBaseline {
  const char* name;
  double accuracy;
  double precision;
  double recall;
  double f1;
};
const std::vector<DecompilerBaseline>& decompiler_baselines(data::Scheme scheme);

}  // namespace retypelab::eval
