#include "retypelab/rule_miner.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include "retypelab/parallel.hpp"

namespace retypelab::rules {

namespace {

bool row_matches(const std::vector<std::uint8_t>& row, const std::vector<int>& antecedents) {
  for (int a : antecedents) {
    if (!row[static_cast<std::size_t>(a)]) return false;
  }
  return true;
}

struct ItemsetStats {
  int matches = 0;
  std::vector<int> per_class;
};

ItemsetStats count_itemset(const data::Dataset& d, const std::vector<int>& antecedents) {
  ItemsetStats stats;
  stats.per_class.assign(static_cast<std::size_t>(d.n_classes()), 0);
  for (int r = 0; r < d.n_rows(); ++r) {
    if (row_matches(d.rows[static_cast<std::size_t>(r)], antecedents)) {
      ++stats.matches;
      stats.per_class[static_cast<std::size_t>(d.labels[static_cast<std::size_t>(r)])]++;
    }
  }
  return stats;
}

std::string antecedent_key(const data::Dataset& d, const AssociationRule& rule) {
  std::string key;
  for (std::size_t i = 0; i < rule.antecedents.size(); ++i) {
    if (i) key += " AND ";
    key += d.vocab.names[static_cast<std::size_t>(rule.antecedents[i])];
  }
  return key;
}

}  // namespace

std::vector<AssociationRule> mine_rules(const data::Dataset& dataset, const MineParams& params) {
  if (dataset.n_rows() == 0) throw std::invalid_argument("mine_rules: empty dataset");
  if (params.max_antecedents < 1) {
    throw std::invalid_argument("mine_rules: max_antecedents must be >= 1");
  }
  if (params.min_support <= 0.0) {
    throw std::invalid_argument("mine_rules: min_support must be > 0 (0 is degenerate)");
  }

  double n = static_cast<double>(dataset.n_rows());
  auto min_matches = static_cast<int>(std::ceil(params.min_support * n - 1e-12));
  if (min_matches < 1) min_matches = 1;

  std::vector<AssociationRule> out;
  std::map<std::vector<int>, int> support_of;  // antecedent matches, for pruning checks

  auto harvest = [&](const std::vector<int>& itemset, const ItemsetStats& stats) {
    for (int c = 0; c < dataset.n_classes(); ++c) {
      int covered = stats.per_class[static_cast<std::size_t>(c)];
      if (covered < min_matches) continue;
      double confidence = static_cast<double>(covered) / static_cast<double>(stats.matches);
      if (confidence < params.min_confidence) continue;
      AssociationRule rule;
      rule.antecedents = itemset;
      rule.consequent = c;
      rule.covered_count = covered;
      rule.antecedent_matches = stats.matches;
      rule.support = static_cast<double>(covered) / n;
      rule.confidence = confidence;
      out.push_back(std::move(rule));
    }
  };

  // level 1
  std::vector<std::vector<int>> frequent;
  {
    std::vector<ItemsetStats> stats(static_cast<std::size_t>(dataset.n_features()));
    par::parallel_for(dataset.n_features(), [&](std::int64_t f) {
      stats[static_cast<std::size_t>(f)] = count_itemset(dataset, {static_cast<int>(f)});
    });
    for (int f = 0; f < dataset.n_features(); ++f) {
      const auto& s = stats[static_cast<std::size_t>(f)];
      if (s.matches >= min_matches) {
        frequent.push_back({f});
        support_of[{f}] = s.matches;
        harvest({f}, s);
      }
    }
  }

  // level k: join frequent (k-1)-itemsets sharing a prefix, prune by
  // anti-monotonicity, then count
  for (int level = 2; level <= params.max_antecedents && !frequent.empty(); ++level) {
    std::vector<std::vector<int>> candidates;
    for (std::size_t a = 0; a < frequent.size(); ++a) {
      for (std::size_t b = a + 1; b < frequent.size(); ++b) {
        const auto& x = frequent[a];
        const auto& y = frequent[b];
        if (!std::equal(x.begin(), x.end() - 1, y.begin(), y.end() - 1)) continue;
        std::vector<int> joined(x);
        joined.push_back(y.back());
        // every (k-1)-subset must itself be frequent
        bool all_frequent = true;
        for (std::size_t skip = 0; skip + 2 < joined.size() && all_frequent; ++skip) {
          std::vector<int> subset;
          for (std::size_t i = 0; i < joined.size(); ++i) {
            if (i != skip) subset.push_back(joined[i]);
          }
          all_frequent = support_of.count(subset) > 0;
        }
        if (all_frequent) candidates.push_back(std::move(joined));
      }
    }
    std::vector<ItemsetStats> stats(candidates.size());
    par::parallel_for(static_cast<std::int64_t>(candidates.size()), [&](std::int64_t i) {
      stats[static_cast<std::size_t>(i)] = count_itemset(dataset, candidates[static_cast<std::size_t>(i)]);
    });
    std::vector<std::vector<int>> next;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (stats[i].matches < min_matches) continue;
      // anti-monotonicity: a superset can never match more rows than any subset
      for (std::size_t skip = 0; skip < candidates[i].size(); ++skip) {
        std::vector<int> subset;
        for (std::size_t j = 0; j < candidates[i].size(); ++j) {
          if (j != skip) subset.push_back(candidates[i][j]);
        }
        auto it = support_of.find(subset);
        assert(it == support_of.end() || stats[i].matches <= it->second);
        (void)it;
      }
      support_of[candidates[i]] = stats[i].matches;
      harvest(candidates[i], stats[i]);
      next.push_back(candidates[i]);
    }
    frequent = std::move(next);
  }

  std::sort(out.begin(), out.end(), [&](const AssociationRule& a, const AssociationRule& b) {
    if (a.support != b.support) return a.support > b.support;
    if (a.antecedents.size() != b.antecedents.size()) {
      return a.antecedents.size() < b.antecedents.size();
    }
    return antecedent_key(dataset, a) < antecedent_key(dataset, b);
  });
  return out;
}

std::vector<int> preselect_columns(const std::vector<std::vector<int>>& selections,
                                   bool* used_union_fallback) {
  if (selections.empty()) throw std::invalid_argument("preselect_columns: no selections");
  std::set<int> acc(selections[0].begin(), selections[0].end());
  for (std::size_t i = 1; i < selections.size(); ++i) {
    std::set<int> next(selections[i].begin(), selections[i].end());
    std::set<int> kept;
    for (int c : acc) {
      if (next.count(c)) kept.insert(c);
    }
    acc = std::move(kept);
  }
  if (used_union_fallback) *used_union_fallback = false;
  if (acc.empty()) {
    for (const auto& sel : selections) acc.insert(sel.begin(), sel.end());
    if (used_union_fallback) *used_union_fallback = true;
  }
  return std::vector<int>(acc.begin(), acc.end());
}

VerifyResult verify_rule(const AssociationRule& rule, const data::Dataset& dataset) {
  for (int a : rule.antecedents) {
    if (a < 0 || a >= dataset.n_features()) {
      throw std::invalid_argument("verify_rule: antecedent column " + std::to_string(a) +
                                  " is not in the vocabulary");
    }
  }
  VerifyResult result;
  for (int r = 0; r < dataset.n_rows(); ++r) {
    if (!row_matches(dataset.rows[static_cast<std::size_t>(r)], rule.antecedents)) continue;
    ++result.antecedent_matches;
    if (dataset.labels[static_cast<std::size_t>(r)] != rule.consequent) {
      result.holds = false;
      if (!result.counterexample_row) result.counterexample_row = r;
    }
  }
  return result;  // zero matches holds vacuously; support is visibly 0
}

// ---------------------------------------------------------------------------
// Rule cards
// ---------------------------------------------------------------------------

namespace {

std::string format_fraction(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string render_rule_cards(const std::vector<AssociationRule>& rules,
                              const data::Dataset& dataset, const std::string& provenance) {
  std::string out = "# Decompilation rule cards\n";
  out += "# " + provenance + "\n";
  out += "# rules: " + std::to_string(rules.size()) + "\n\n";
  const auto& classes = data::scheme_classes(dataset.scheme);
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& rule = rules[i];
    out += "RULE " + std::to_string(i + 1) + ": IF ";
    for (std::size_t a = 0; a < rule.antecedents.size(); ++a) {
      if (a) out += " AND ";
      out += dataset.vocab.names[static_cast<std::size_t>(rule.antecedents[a])];
    }
    out += " THEN " + classes[static_cast<std::size_t>(rule.consequent)];
    out += " (support=" + format_fraction(rule.support) +
           ", confidence=" + format_fraction(rule.confidence) + ")\n";

    std::string ret_side, post_side;
    for (int a : rule.antecedents) {
      const std::string& name = dataset.vocab.names[static_cast<std::size_t>(a)];
      if (name.rfind("RET: ", 0) == 0) {
        if (!ret_side.empty()) ret_side += " ; ";
        ret_side += name.substr(5);
      } else if (name.rfind("POST: ", 0) == 0) {
        if (!post_side.empty()) post_side += " ; ";
        post_side += name.substr(6);
      }
    }
    out += "  return side : " + (ret_side.empty() ? "(none)" : ret_side) + "\n";
    out += "  call side   : " + (post_side.empty() ? "(none)" : post_side) + "\n";
    out += "  functions whose binaries show the patterns above return `" +
           classes[static_cast<std::size_t>(rule.consequent)] + "` (" +
           std::to_string(rule.covered_count) + " of " + std::to_string(dataset.n_rows()) +
           " rows, no counterexamples at confidence 1)\n\n";
  }
  return out;
}

std::optional<ParsedRuleCard> parse_rule_card_line(const std::string& line) {
  if (line.rfind("RULE ", 0) != 0) return std::nullopt;
  auto if_pos = line.find(": IF ");
  auto then_pos = line.find(" THEN ");
  auto paren = line.rfind(" (support=");
  if (if_pos == std::string::npos || then_pos == std::string::npos || paren == std::string::npos) {
    return std::nullopt;
  }
  ParsedRuleCard card;
  std::string antecedents = line.substr(if_pos + 5, then_pos - if_pos - 5);
  std::size_t start = 0;
  while (true) {
    auto and_pos = antecedents.find(" AND ", start);
    if (and_pos == std::string::npos) {
      card.antecedent_names.push_back(antecedents.substr(start));
      break;
    }
    card.antecedent_names.push_back(antecedents.substr(start, and_pos - start));
    start = and_pos + 5;
  }
  card.consequent = line.substr(then_pos + 6, paren - then_pos - 6);
  if (std::sscanf(line.c_str() + paren, " (support=%lf, confidence=%lf)", &card.support,
                  &card.confidence) != 2) {
    return std::nullopt;
  }
  return card;
}

}  // namespace retypelab::rules
