#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "retypelab/asm_core.hpp"
#include "retypelab/pattern_extract.hpp"

namespace retypelab::gen {

// ---------------------------------------------------------------------------
// Generalized operands
// ---------------------------------------------------------------------------

/// Placeholder classes; spelled <lit>, <reg>, <addr>, <*addr>, <off>, <mem>
/// in canonical feature names.
enum class Ph : std::uint8_t { Lit, Reg, Addr, StarAddr, Off, Mem };

std::string_view ph_spelling(Ph p);

/// Memory expression whose components may be abstracted independently.
struct GMem {
  /// monostate = absent, RegName = concrete, Ph = placeholder.
  using RegSlot = std::variant<std::monostate, asmx::RegName, Ph>;
  /// monostate = absent, int64/string = concrete, Ph = placeholder.
  using DispSlot = std::variant<std::monostate, std::int64_t, std::string, Ph>;
  using ScaleSlot = std::variant<std::monostate, int, Ph>;

  RegSlot base;
  RegSlot index;
  ScaleSlot scale;
  DispSlot disp;
  bool operator==(const GMem&) const = default;
};

/// One operand of a generalized instruction: either a concrete operand, a
/// bare placeholder, or a partially abstracted memory expression.
struct GOperand {
  std::variant<asmx::Operand, Ph, GMem> value;
  std::optional<int> size_hint;
  bool operator==(const GOperand&) const = default;
};

struct GeneralizedInstruction {
  std::string mnemonic;  // class members are spelled as their representative
  std::vector<GOperand> operands;
  bool operator==(const GeneralizedInstruction&) const = default;
};

// ---------------------------------------------------------------------------
// Sequence macros
// ---------------------------------------------------------------------------

enum class MacroKind : std::uint8_t { CalleeEpilogue, CallerEpilogue, MovChain, BoolCast };

std::string_view macro_name(MacroKind k);

struct MacroElem {
  MacroKind kind;
  /// mov_chain / bool_cast argument slots; callee/caller epilogues elide
  /// their arguments.
  std::vector<GOperand> args;
  bool operator==(const MacroElem&) const = default;
};

struct MacroMatch {
  MacroElem elem;
  int start = 0;  // [start, end) span in the matched sequence
  int end = 0;
};

// ---------------------------------------------------------------------------
// Patterns
// ---------------------------------------------------------------------------

/// Advanced discriminator flag (e.g. literal_class=bool_like); rendered
/// verbatim as a pattern element.
struct TagElem {
  std::string tag;
  bool operator==(const TagElem&) const = default;
};

using PatternElem = std::variant<GeneralizedInstruction, MacroElem, TagElem>;

enum class PatternKind : std::uint8_t { Ret, Post };

struct GeneralizedPattern {
  PatternKind kind;
  std::vector<PatternElem> elements;
  bool operator==(const GeneralizedPattern&) const = default;
};

std::string render_goperand(const GOperand& op);
std::string render_element(const PatternElem& elem);

/// Canonical feature name: ("RET: "|"POST: ") element { " | " element }.
/// This string is the dataset column identity, bit-exact.
std::string canonical_name(const GeneralizedPattern& p);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Every applicable combination from the operand-generalization lattice.
/// Literals, absolute addresses and jump offsets are always abstracted;
/// registers may stay concrete, widen to their family head, or drop to
/// <reg>; memory operands abstract per component and collapse to
/// [<reg>] / <mem>; mov/movzx/movsx share the `mov` mnemonic class. The
/// fully concrete form is kept only when nothing is generalizable or when
/// the mnemonic belongs to a class (the rendered form then denotes the
/// class, as in `mov [eax], edx`).
std::vector<GeneralizedInstruction> generalize_instruction(const asmx::Instruction& instr);

/// Subsumption: does the generalized form cover the concrete instruction?
bool matches(const GeneralizedInstruction& g, const asmx::Instruction& instr);

/// Greedy longest-match over a sequence ending with retn (callee_epilogue at
/// the tail) and over interior spans (mov_chain, bool_cast). caller_epilogue
/// is matched at the start of call sequences.
std::vector<MacroMatch> match_sequence_macros(std::span<const asmx::Instruction> seq);

struct GeneralizeOptions {
  /// Per-chunk cap on emitted patterns; shortest patterns are kept first.
  int pattern_budget = 64;
};

struct PatternSet {
  std::vector<GeneralizedPattern> patterns;
  bool truncated = false;
};

/// Patterns of a RET chunk: macros first, then per-instruction
/// generalization over each prefix length, cross-product capped by the
/// budget.
PatternSet generalize_ret_chunk(const extract::RetChunk& chunk, const GeneralizeOptions& opts = {});

/// Patterns of a POST CALL chunk: caller_epilogue plus the generalizations
/// of the first instruction after stack restoration.
PatternSet generalize_post_chunk(const extract::PostCallChunk& chunk,
                                 const GeneralizeOptions& opts = {});

/// High-level-type discriminators: returned-literal class, post-call
/// widening kind, div/idiv presence, lea-into-eax, FP operand width
/// (D9/DD opcode or dword/qword hints), hidden-buffer struct-return shape,
/// edx written, post-call destination class.
std::vector<GeneralizedPattern> advanced_ret_features(const extract::RetChunk& chunk);
std::vector<GeneralizedPattern> advanced_post_features(const extract::PostCallChunk& chunk);

}  // namespace retypelab::gen
