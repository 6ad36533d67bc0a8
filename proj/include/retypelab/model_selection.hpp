#pragma once

#include <map>
#include <string>
#include <vector>

#include "retypelab/classifiers.hpp"
#include "retypelab/dataset.hpp"

namespace retypelab::msel {

/// k disjoint, exhaustive (train, test) index partitions with per-class
/// counts across folds differing by at most one.
std::vector<std::pair<std::vector<int>, std::vector<int>>> stratified_kfold(
    const std::vector<int>& labels, int k, std::uint64_t seed);

/// Stratified train/test split (test_fraction per class, at least one test
/// row per class). Throws if any class has fewer than two rows.
std::pair<std::vector<int>, std::vector<int>> stratified_split(const std::vector<int>& labels,
                                                               double test_fraction,
                                                               std::uint64_t seed);

struct SelectionMethod {
  enum class Kind { SelectFromModel, RecursiveElimination };
  enum class Threshold { Mean, Median };

  Kind kind = Kind::SelectFromModel;
  std::string importance_source = "random_forest";  // or "extra_trees"
  Threshold threshold = Threshold::Mean;
  double elimination_step_fraction = 0.1;

  std::string name() const;
  static SelectionMethod parse(const std::string& name);  // e.g. sfm_rf_mean, rfe
};

/// The five-method menu: SelectFromModel over {random_forest, extra_trees}
/// x {mean, median} plus recursive elimination.
std::vector<SelectionMethod> default_selection_methods();

struct SelectionResult {
  SelectionMethod method;
  std::vector<int> selected;  // sorted unique column indices
  double cv_accuracy = 0.0;
  std::vector<double> fold_accuracies;
};

/// Wrapper selection: evaluates each method by retraining the wrapped
/// classifier on the reduced columns under 3-fold stratified CV; picks the
/// highest mean accuracy, preferring fewer features when the gap is below
/// the tie tolerance.
SelectionResult select_features(const data::Dataset& dataset, const ml::ModelSpec& classifier,
                                const std::vector<SelectionMethod>& methods, std::uint64_t seed,
                                std::vector<SelectionResult>* all_results = nullptr);

inline constexpr double kSelectionTieTolerance = 0.005;

struct GridSpec {
  std::map<std::string, std::vector<std::string>> values;
  std::size_t cap = 512;
};

/// Documented default grids per algorithm.
GridSpec default_grid(const std::string& algorithm);

struct GridPoint {
  std::map<std::string, std::string> params;
  std::vector<double> fold_accuracies;
  double mean_accuracy = 0.0;
};

struct GridResult {
  std::map<std::string, std::string> best;
  double best_accuracy = 0.0;
  std::vector<GridPoint> table;
};

/// Exhaustive search over the grid with 3-fold stratified CV; ties keep the
/// first-listed combination.
GridResult grid_search(const data::Dataset& dataset, const std::string& algorithm,
                       const GridSpec& grid, std::uint64_t seed);

/// Mean CV accuracy of a spec on a dataset (3-fold stratified).
double cv_accuracy(const data::Dataset& dataset, const ml::ModelSpec& spec, std::uint64_t seed,
                   std::vector<double>* fold_accuracies = nullptr);

}  // namespace retypelab::msel
