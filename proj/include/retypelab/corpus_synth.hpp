#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "retypelab/asm_core.hpp"
#include "retypelab/kv_config.hpp"
#include "retypelab/rng.hpp"

namespace retypelab::synth {

struct SynthConfig {
  /// Labeled functions to generate per type, indexed by TypeLabel.
  std::array<int, asmx::kTypeLabelCount> counts{};
  int callers_per_function = 1;
  /// Probability that a void function computes a throwaway value in eax
  /// before returning.
  double distractor_probability = 0.25;
  /// When true, bool/char and int/pointer share their RET-side templates and
  /// differ only at the call sites.
  bool confusable_mode = false;
  /// Distribution over the three callee-epilogue forms
  /// (pops+frame / frame / pop-ebp only).
  std::array<double, 3> epilogue_variant_weights = {0.2, 0.4, 0.4};
  std::uint64_t rng_seed = 1;

  void validate() const;  // throws std::invalid_argument
  static SynthConfig from_kv(const KvConfig& kv);
  KvConfig to_kv() const;
};

/// Which template produced a function; lets tests check label fidelity.
struct SynthRecord {
  std::string name;
  asmx::TypeLabel label;
  std::string template_id;
};

struct SynthCorpus {
  /// Canonical listing document; parses back to `functions`.
  std::string listing_text;
  std::vector<asmx::FunctionListing> functions;
  std::vector<SynthRecord> records;
};

/// One rendered template instance: the payload lines placed before the
/// callee epilogue and the post-call lines placed after each invocation.
struct TemplateInstance {
  std::string template_id;
  std::vector<std::string> body_lines;
  std::vector<std::string> post_call_lines;
};

/// RET-side template identities for a label; bool/char (and int/pointer)
/// compare equal in confusable mode.
std::vector<std::string> ret_template_ids(asmx::TypeLabel label, bool confusable);

/// Draws one (body, post-call) instance for the label.
TemplateInstance template_for(asmx::TypeLabel label, bool confusable, Rng& rng);

/// Deterministic generation: identical (seed, config) yields byte-identical
/// listing text. Labeled functions come first (grouped by type), then the
/// unlabeled caller functions hosting the synthetic call sites.
SynthCorpus synthesize_corpus(const SynthConfig& cfg);

/// The corpus as a listing document (identity on SynthCorpus::listing_text).
std::string emit_listing(const SynthCorpus& corpus);

/// Required canonical feature name for a template: present in every dataset
/// row generated from it (the generator cannot emit a body inconsistent with
/// its label's catalog entry).
std::string template_signature_feature(const std::string& template_id);

}  // namespace retypelab::synth
