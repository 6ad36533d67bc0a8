#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace retypelab::asmx {

// ---------------------------------------------------------------------------
// Registers
// ---------------------------------------------------------------------------

enum class RegName : std::uint8_t {
  eax, ebx, ecx, edx, esi, edi, ebp, esp,
  ax, bx, cx, dx,
  al, ah, bl, cl, dl,
  st0, st1, st2, st3, st4, st5, st6, st7,
  xmm0, xmm1, xmm2, xmm3, xmm4, xmm5, xmm6, xmm7,
};

inline constexpr int kRegCount = 33;

/// Register width in bits (al -> 8, ax -> 16, eax -> 32, st* -> 80, xmm* -> 128).
int reg_width(RegName r);

/// Widest member of the register's family (cl/cx -> ecx, al/ah/ax -> eax,
/// everything else maps to itself).
RegName reg_family(RegName r);

std::string_view reg_name(RegName r);
std::optional<RegName> parse_reg(std::string_view token);

// ---------------------------------------------------------------------------
// Operands
// ---------------------------------------------------------------------------

struct RegOp {
  RegName reg;
  bool operator==(const RegOp&) const = default;
};

struct ImmOp {
  std::int64_t value;
  bool operator==(const ImmOp&) const = default;
};

/// No displacement / integer displacement / symbolic displacement.
using Disp = std::variant<std::monostate, std::int64_t, std::string>;

/// Bracketed memory expression. At least one of base/index/disp is present;
/// scale is meaningful only with an index.
struct MemOp {
  std::optional<RegName> base;
  std::optional<RegName> index;
  int scale = 1;
  Disp disp;
  bool operator==(const MemOp&) const = default;
};

/// `offset SYM` — the address value itself.
struct AbsAddrOp {
  std::string symbol;
  bool operator==(const AbsAddrOp&) const = default;
};

/// `ds:SYM` or a bare symbol in a data position — a dereference of an
/// absolute address. The prefix flag preserves the source spelling so
/// rendering round-trips.
struct DerefAddrOp {
  std::string symbol;
  bool ds_prefix = true;
  bool operator==(const DerefAddrOp&) const = default;
};

/// Bare symbol after jmp/jcc.
struct JumpTargetOp {
  std::string symbol;
  bool operator==(const JumpTargetOp&) const = default;
};

/// Bare symbol after call.
struct CallTargetOp {
  std::string symbol;
  bool operator==(const CallTargetOp&) const = default;
};

struct Operand {
  std::variant<RegOp, ImmOp, MemOp, AbsAddrOp, DerefAddrOp, JumpTargetOp, CallTargetOp> value;
  /// Bits from a byte/word/dword/qword ptr annotation.
  std::optional<int> size_hint;
  bool operator==(const Operand&) const = default;
};

Operand make_reg(RegName r);
Operand make_imm(std::int64_t v);

// ---------------------------------------------------------------------------
// Instructions and listings
// ---------------------------------------------------------------------------

struct Instruction {
  std::string mnemonic;  // lowercase
  std::vector<Operand> operands;
  std::optional<std::string> label;
  std::vector<std::uint8_t> opcode_bytes;
  bool operator==(const Instruction&) const = default;
};

/// The ten high-level return-type classes. Enumerator order is the canonical
/// (alphabetical) order used for matrix axes and tie-breaking.
enum class TypeLabel : std::uint8_t {
  Bool, Char, Double, Float, Int, LongLong, Pointer, Short, Struct, Void,
};
inline constexpr int kTypeLabelCount = 10;

std::string_view type_label_name(TypeLabel t);
std::optional<TypeLabel> parse_type_label(std::string_view name);
const std::vector<std::string>& type_label_names();

/// Targets grouped by size and representation.
enum class SizeRepLabel : std::uint8_t { Int1, Int2, Int4, Int8, Real4, Real8, Void };
inline constexpr int kSizeRepCount = 7;

std::string_view size_rep_name(SizeRepLabel t);
std::optional<SizeRepLabel> parse_size_rep(std::string_view name);
const std::vector<std::string>& size_rep_names();

SizeRepLabel map_to_sizerep(TypeLabel t);

struct FunctionListing {
  std::string name;
  std::vector<Instruction> instructions;
  std::optional<TypeLabel> true_return_type;

  /// (instruction index, callee symbol) for every call in the body.
  std::vector<std::pair<int, std::string>> call_sites_in_body() const;
};

// ---------------------------------------------------------------------------
// Parsing and rendering
// ---------------------------------------------------------------------------

struct ParseError : std::runtime_error {
  ParseError(int line, int column, const std::string& what);
  int line;
  int column;
};

struct ParseOptions {
  /// Reject mnemonics outside the known table instead of passing them
  /// through as opaque instructions.
  bool strict_mnemonics = false;
};

/// Parses a listing document (.func/.endfunc blocks) into labeled bodies.
std::vector<FunctionListing> parse_listing(std::string_view text, const ParseOptions& opts = {});

/// Parses a single instruction line (no .func wrapper).
Instruction parse_instruction_line(std::string_view line, const ParseOptions& opts = {});

std::string render_operand(const Operand& op);
std::string render_instruction(const Instruction& instr);
std::string render_listing(const std::vector<FunctionListing>& functions);

bool is_known_mnemonic(std::string_view mnemonic);

/// True for ja/jb/jz/... conditional jumps.
bool is_conditional_jump(std::string_view mnemonic);

}  // namespace retypelab::asmx
