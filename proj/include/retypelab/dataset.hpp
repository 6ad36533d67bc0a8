#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "retypelab/asm_core.hpp"
#include "retypelab/generalize.hpp"
#include "retypelab/pattern_extract.hpp"

namespace retypelab::data {

enum class Scheme : std::uint8_t { HighLevel, SizeRep };

std::string_view scheme_name(Scheme s);
std::optional<Scheme> parse_scheme(std::string_view name);

/// Class names for a scheme in canonical order.
const std::vector<std::string>& scheme_classes(Scheme s);

struct FeatureVocabulary {
  std::vector<std::string> names;
  std::unordered_map<std::string, int> index;

  int add(const std::string& name);          // returns column, inserting if new
  std::optional<int> find(const std::string& name) const;
  int size() const { return static_cast<int>(names.size()); }
  /// FNV-1a over the names; with the size this is the model/dataset
  /// compatibility fingerprint.
  std::uint64_t fingerprint() const;
};

std::uint64_t fingerprint_names(const std::vector<std::string>& names);

/// Binary occurrence matrix: rows are functions, columns are generalized
/// patterns, target is the return type under the scheme.
struct Dataset {
  Scheme scheme = Scheme::HighLevel;
  FeatureVocabulary vocab;
  std::vector<std::string> row_names;
  std::vector<std::vector<std::uint8_t>> rows;
  std::vector<int> labels;  // index into scheme_classes(scheme)

  int n_rows() const { return static_cast<int>(rows.size()); }
  int n_features() const { return vocab.size(); }
  int n_classes() const { return static_cast<int>(scheme_classes(scheme).size()); }
  std::vector<int> class_counts() const;
};

struct BuildOptions {
  bool use_ret = true;
  bool use_post = true;
  bool use_advanced = true;
  extract::ExtractOptions extract;
  gen::GeneralizeOptions generalize;
};

struct BuildDiagnostics {
  std::vector<std::string> unlabeled_functions;
  std::vector<std::string> notes;
};

/// Feature names of one function under the options; the row-construction
/// primitive shared by build_dataset and prediction on raw listings.
/// truncated_chunks counts chunks whose pattern set hit the budget.
std::vector<std::string> function_feature_names(
    const asmx::FunctionListing& fn, const std::vector<extract::PostCallChunk>& post_chunks,
    const BuildOptions& opts, int* truncated_chunks = nullptr);

Dataset build_dataset(const std::vector<asmx::FunctionListing>& functions, Scheme scheme,
                      const BuildOptions& opts = {}, BuildDiagnostics* diag = nullptr);

/// Union of vocabularies (a's order, then b's new names), rows concatenated.
Dataset merge_datasets(const Dataset& a, const Dataset& b);

/// Keeps the given columns (sorted unique indices), preserving order.
Dataset select_columns(const Dataset& d, const std::vector<int>& columns);

/// Drops features present in fewer than min_rows rows.
Dataset prune_rare_features(const Dataset& d, int min_rows, std::vector<std::string>* dropped = nullptr);

/// CSV with a `#scheme=` pragma row, quoted feature-name header plus
/// `return_type`, and a `<path>.names` sidecar of row symbols.
void write_csv(const Dataset& d, const std::string& path, bool with_timestamp = false);
Dataset read_csv(const std::string& path);

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace retypelab::data
