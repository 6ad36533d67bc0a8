#pragma once

#include <optional>
#include <string>
#include <vector>

#include "retypelab/dataset.hpp"

namespace retypelab::rules {

struct AssociationRule {
  std::vector<int> antecedents;  // sorted column indices
  int consequent = 0;            // scheme class index
  double support = 0.0;          // covered_count / n_rows
  double confidence = 0.0;       // covered_count / antecedent_matches
  int covered_count = 0;
  int antecedent_matches = 0;
};

struct MineParams {
  double min_support = 0.01;
  int max_antecedents = 2;
  double min_confidence = 1.0;
};

/// Class-association Apriori over the binary feature columns; candidate
/// pruning by support anti-monotonicity; output sorted by
/// (support desc, antecedent size asc, name asc).
std::vector<AssociationRule> mine_rules(const data::Dataset& dataset, const MineParams& params);

/// Intersection of the classifiers' selected column sets; on an empty
/// intersection falls back to the union and sets the warning flag.
std::vector<int> preselect_columns(const std::vector<std::vector<int>>& selections,
                                   bool* used_union_fallback = nullptr);

struct VerifyResult {
  bool holds = true;
  std::optional<int> counterexample_row;
  int antecedent_matches = 0;
};

VerifyResult verify_rule(const AssociationRule& rule, const data::Dataset& dataset);

/// Documentation rule cards: a machine-parsable block
///   RULE <n>: IF <name> [AND <name>] THEN <type> (support=..., confidence=...)
/// plus a prose line with the antecedents grouped RET vs POST.
std::string render_rule_cards(const std::vector<AssociationRule>& rules,
                              const data::Dataset& dataset, const std::string& provenance);

struct ParsedRuleCard {
  std::vector<std::string> antecedent_names;
  std::string consequent;
  double support = 0.0;
  double confidence = 0.0;
};

/// Parses one machine block line back (the card-rendering inverse).
std::optional<ParsedRuleCard> parse_rule_card_line(const std::string& line);

}  // namespace retypelab::rules
