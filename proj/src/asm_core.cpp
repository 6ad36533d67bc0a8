#include "retypelab/asm_core.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace retypelab::asmx {

// ---------------------------------------------------------------------------
// Register tables
// ---------------------------------------------------------------------------

namespace {

struct RegInfo {
  std::string_view name;
  int width;
  RegName family;
};

constexpr std::array<RegInfo, kRegCount> kRegs = {{
    {"eax", 32, RegName::eax}, {"ebx", 32, RegName::ebx}, {"ecx", 32, RegName::ecx},
    {"edx", 32, RegName::edx}, {"esi", 32, RegName::esi}, {"edi", 32, RegName::edi},
    {"ebp", 32, RegName::ebp}, {"esp", 32, RegName::esp},
    {"ax", 16, RegName::eax},  {"bx", 16, RegName::ebx},  {"cx", 16, RegName::ecx},
    {"dx", 16, RegName::edx},
    {"al", 8, RegName::eax},   {"ah", 8, RegName::eax},   {"bl", 8, RegName::ebx},
    {"cl", 8, RegName::ecx},   {"dl", 8, RegName::edx},
    {"st0", 80, RegName::st0}, {"st1", 80, RegName::st1}, {"st2", 80, RegName::st2},
    {"st3", 80, RegName::st3}, {"st4", 80, RegName::st4}, {"st5", 80, RegName::st5},
    {"st6", 80, RegName::st6}, {"st7", 80, RegName::st7},
    {"xmm0", 128, RegName::xmm0}, {"xmm1", 128, RegName::xmm1}, {"xmm2", 128, RegName::xmm2},
    {"xmm3", 128, RegName::xmm3}, {"xmm4", 128, RegName::xmm4}, {"xmm5", 128, RegName::xmm5},
    {"xmm6", 128, RegName::xmm6}, {"xmm7", 128, RegName::xmm7},
}};

}  // namespace

int reg_width(RegName r) { return kRegs[static_cast<std::size_t>(r)].width; }
RegName reg_family(RegName r) { return kRegs[static_cast<std::size_t>(r)].family; }
std::string_view reg_name(RegName r) { return kRegs[static_cast<std::size_t>(r)].name; }

std::optional<RegName> parse_reg(std::string_view token) {
  for (std::size_t i = 0; i < kRegs.size(); ++i) {
    if (kRegs[i].name == token) return static_cast<RegName>(i);
  }
  return std::nullopt;
}

Operand make_reg(RegName r) { return Operand{RegOp{r}, std::nullopt}; }
Operand make_imm(std::int64_t v) { return Operand{ImmOp{v}, std::nullopt}; }

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kTypeNames = {
    "bool", "char", "double", "float", "int", "long_long", "pointer", "short", "struct", "void"};

const std::vector<std::string> kSizeRepNames = {
    "INT_1", "INT_2", "INT_4", "INT_8", "REAL_4", "REAL_8", "VOID"};

}  // namespace

std::string_view type_label_name(TypeLabel t) { return kTypeNames[static_cast<std::size_t>(t)]; }

std::optional<TypeLabel> parse_type_label(std::string_view name) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == name) return static_cast<TypeLabel>(i);
  }
  return std::nullopt;
}

const std::vector<std::string>& type_label_names() { return kTypeNames; }

std::string_view size_rep_name(SizeRepLabel t) { return kSizeRepNames[static_cast<std::size_t>(t)]; }

std::optional<SizeRepLabel> parse_size_rep(std::string_view name) {
  for (std::size_t i = 0; i < kSizeRepNames.size(); ++i) {
    if (kSizeRepNames[i] == name) return static_cast<SizeRepLabel>(i);
  }
  return std::nullopt;
}

const std::vector<std::string>& size_rep_names() { return kSizeRepNames; }

SizeRepLabel map_to_sizerep(TypeLabel t) {
  switch (t) {
    case TypeLabel::Bool:
    case TypeLabel::Char:
      return SizeRepLabel::Int1;
    case TypeLabel::Short:
      return SizeRepLabel::Int2;
    case TypeLabel::Int:
    case TypeLabel::Pointer:
    case TypeLabel::Struct:
      return SizeRepLabel::Int4;
    case TypeLabel::LongLong:
      return SizeRepLabel::Int8;
    case TypeLabel::Float:
      return SizeRepLabel::Real4;
    case TypeLabel::Double:
      return SizeRepLabel::Real8;
    case TypeLabel::Void:
      return SizeRepLabel::Void;
  }
  return SizeRepLabel::Void;
}

std::vector<std::pair<int, std::string>> FunctionListing::call_sites_in_body() const {
  std::vector<std::pair<int, std::string>> sites;
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    const Instruction& instr = instructions[i];
    if (instr.mnemonic != "call" || instr.operands.size() != 1) continue;
    if (const auto* t = std::get_if<CallTargetOp>(&instr.operands[0].value)) {
      sites.emplace_back(static_cast<int>(i), t->symbol);
    }
  }
  return sites;
}

// ---------------------------------------------------------------------------
// Mnemonic table
// ---------------------------------------------------------------------------

namespace {

const std::map<std::string, std::pair<int, int>, std::less<>>& arity_table() {
  static const std::map<std::string, std::pair<int, int>, std::less<>> table = {
      {"mov", {2, 2}},   {"movzx", {2, 2}}, {"movsx", {2, 2}}, {"movsd", {2, 2}},
      {"lea", {2, 2}},   {"push", {1, 1}},  {"pop", {1, 1}},   {"add", {2, 2}},
      {"sub", {2, 2}},   {"xor", {2, 2}},   {"or", {2, 2}},    {"and", {2, 2}},
      {"cmp", {2, 2}},   {"test", {2, 2}},  {"adc", {2, 2}},   {"sbb", {2, 2}},
      {"inc", {1, 1}},   {"dec", {1, 1}},   {"neg", {1, 1}},   {"not", {1, 1}},
      {"shl", {2, 2}},   {"shr", {2, 2}},   {"sar", {2, 2}},   {"imul", {1, 3}},
      {"mul", {1, 1}},   {"idiv", {1, 1}},  {"div", {1, 1}},   {"call", {1, 1}},
      {"jmp", {1, 1}},   {"ja", {1, 1}},    {"jae", {1, 1}},   {"jb", {1, 1}},
      {"jbe", {1, 1}},   {"je", {1, 1}},    {"jne", {1, 1}},   {"jz", {1, 1}},
      {"jnz", {1, 1}},   {"jg", {1, 1}},    {"jge", {1, 1}},   {"jl", {1, 1}},
      {"jle", {1, 1}},   {"retn", {0, 1}},  {"ret", {0, 1}},   {"cwde", {0, 0}},
      {"cdq", {0, 0}},   {"cbw", {0, 0}},   {"cwd", {0, 0}},   {"nop", {0, 0}},
      {"leave", {0, 0}}, {"fld", {1, 1}},   {"fst", {1, 1}},   {"fstp", {1, 1}},
      {"fild", {1, 1}},  {"fistp", {1, 1}}, {"fadd", {0, 2}},  {"fsub", {0, 2}},
      {"fmul", {0, 2}},  {"fdiv", {0, 2}},  {"fchs", {0, 0}},  {"sete", {1, 1}},
      {"setne", {1, 1}}, {"setz", {1, 1}},  {"setnz", {1, 1}}, {"setg", {1, 1}},
      {"setge", {1, 1}}, {"setl", {1, 1}},  {"setle", {1, 1}}, {"seta", {1, 1}},
      {"setae", {1, 1}}, {"setb", {1, 1}},  {"setbe", {1, 1}},
  };
  return table;
}

const std::set<std::string, std::less<>>& cond_jumps() {
  static const std::set<std::string, std::less<>> jcc = {
      "ja", "jae", "jb", "jbe", "je", "jne", "jz", "jnz", "jg", "jge", "jl", "jle"};
  return jcc;
}

}  // namespace

bool is_known_mnemonic(std::string_view mnemonic) {
  return arity_table().find(mnemonic) != arity_table().end();
}

bool is_conditional_jump(std::string_view mnemonic) {
  return cond_jumps().find(mnemonic) != cond_jumps().end();
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

ParseError::ParseError(int line_, int column_, const std::string& what_)
    : std::runtime_error("line " + std::to_string(line_) + ", col " + std::to_string(column_) +
                         ": " + what_),
      line(line_),
      column(column_) {}

namespace {

bool is_symbol_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$' || c == '@' ||
         c == '?' || c == '.';
}

bool is_symbol_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$' || c == '@' ||
         c == '?' || c == '.';
}

std::string trim(std::string_view s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Accepts decimal, 0x hex, and IDA-style hex with an `h` suffix (which must
/// start with a digit). Returns nullopt if the token is not a number.
std::optional<std::int64_t> parse_number(std::string_view tok) {
  if (tok.empty()) return std::nullopt;
  bool neg = false;
  if (tok[0] == '-' || tok[0] == '+') {
    neg = tok[0] == '-';
    tok.remove_prefix(1);
    if (tok.empty()) return std::nullopt;
  }
  std::int64_t value = 0;
  if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
    for (char c : tok.substr(2)) {
      if (!std::isxdigit(static_cast<unsigned char>(c))) return std::nullopt;
      value = value * 16 + (std::isdigit(static_cast<unsigned char>(c))
                                ? c - '0'
                                : std::tolower(static_cast<unsigned char>(c)) - 'a' + 10);
    }
  } else if ((tok.back() == 'h' || tok.back() == 'H') && std::isdigit(static_cast<unsigned char>(tok[0]))) {
    std::string_view digits = tok.substr(0, tok.size() - 1);
    if (digits.empty()) return std::nullopt;
    for (char c : digits) {
      if (!std::isxdigit(static_cast<unsigned char>(c))) return std::nullopt;
      value = value * 16 + (std::isdigit(static_cast<unsigned char>(c))
                                ? c - '0'
                                : std::tolower(static_cast<unsigned char>(c)) - 'a' + 10);
    }
  } else {
    for (char c : tok) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
      value = value * 10 + (c - '0');
    }
  }
  return neg ? -value : value;
}

bool is_symbol_token(std::string_view tok) {
  if (tok.empty() || !is_symbol_start(tok[0])) return false;
  return std::all_of(tok.begin(), tok.end(), is_symbol_char);
}

struct LineContext {
  int line_no;
  int col_base;  // 1-based column of the operand text being parsed
};

[[noreturn]] void fail(const LineContext& ctx, const std::string& msg) {
  throw ParseError(ctx.line_no, ctx.col_base, msg);
}

Operand parse_mem_expr(std::string_view body, const LineContext& ctx) {
  MemOp mem;
  bool any = false;
  std::int64_t int_disp = 0;
  bool has_int_disp = false;
  bool has_sym_disp = false;
  std::string sym_disp;

  std::size_t pos = 0;
  int sign = +1;
  while (pos < body.size()) {
    while (pos < body.size() && (body[pos] == ' ' || body[pos] == '\t')) ++pos;
    if (pos >= body.size()) break;
    std::size_t start = pos;
    while (pos < body.size() && body[pos] != '+' && body[pos] != '-') ++pos;
    std::string term = trim(body.substr(start, pos - start));
    if (term.empty()) fail(ctx, "empty term in memory expression");

    // term := REG [ "*" scale ] | SYM | INT
    std::size_t star = term.find('*');
    if (star != std::string::npos) {
      std::string reg_tok = trim(std::string_view(term).substr(0, star));
      std::string scale_tok = trim(std::string_view(term).substr(star + 1));
      auto reg = parse_reg(to_lower(reg_tok));
      auto scale = parse_number(scale_tok);
      if (!reg || !scale) fail(ctx, "bad scaled-index term '" + term + "'");
      if (*scale != 1 && *scale != 2 && *scale != 4 && *scale != 8) {
        fail(ctx, "scale must be 1, 2, 4 or 8");
      }
      if (mem.index || sign < 0) fail(ctx, "duplicate index register");
      mem.index = *reg;
      mem.scale = static_cast<int>(*scale);
    } else if (auto reg = parse_reg(to_lower(term))) {
      if (sign < 0) fail(ctx, "register term cannot be subtracted");
      if (!mem.base) {
        mem.base = *reg;
      } else if (!mem.index) {
        mem.index = *reg;
        mem.scale = 1;
      } else {
        fail(ctx, "too many registers in memory expression");
      }
    } else if (auto num = parse_number(term)) {
      int_disp += sign * *num;
      has_int_disp = true;
    } else if (is_symbol_token(term)) {
      if (has_sym_disp) fail(ctx, "multiple symbolic displacements");
      if (sign < 0) fail(ctx, "symbolic displacement cannot be subtracted");
      has_sym_disp = true;
      sym_disp = term;
    } else {
      fail(ctx, "bad memory term '" + term + "'");
    }
    any = true;

    if (pos < body.size()) {
      sign = body[pos] == '-' ? -1 : +1;
      ++pos;
    }
  }
  if (!any) fail(ctx, "empty memory expression");
  if (has_sym_disp && has_int_disp) fail(ctx, "both symbolic and integer displacement");
  if (has_sym_disp) {
    mem.disp = sym_disp;
  } else if (has_int_disp) {
    mem.disp = int_disp;
  }
  if (!mem.base && !mem.index && std::holds_alternative<std::monostate>(mem.disp)) {
    fail(ctx, "memory operand needs a base, index or displacement");
  }
  return Operand{mem, std::nullopt};
}

Operand parse_operand_text(std::string_view text, const LineContext& ctx) {
  std::string tok = trim(text);
  if (tok.empty()) fail(ctx, "missing operand");

  // size annotation
  for (const auto& [word, bits] :
       {std::pair<std::string_view, int>{"byte", 8}, {"word", 16}, {"dword", 32}, {"qword", 64}}) {
    std::string prefix = std::string(word) + " ptr ";
    std::string lowered = to_lower(std::string_view(tok).substr(0, std::min(tok.size(), prefix.size())));
    if (lowered == prefix) {
      Operand inner = parse_operand_text(std::string_view(tok).substr(prefix.size()), ctx);
      inner.size_hint = bits;
      return inner;
    }
  }

  std::string lowered = to_lower(tok);
  if (lowered.rfind("offset ", 0) == 0) {
    std::string sym = trim(std::string_view(tok).substr(7));
    if (!is_symbol_token(sym)) fail(ctx, "bad symbol after 'offset'");
    return Operand{AbsAddrOp{sym}, std::nullopt};
  }
  if (lowered.rfind("ds:", 0) == 0) {
    std::string sym = trim(std::string_view(tok).substr(3));
    if (!is_symbol_token(sym)) fail(ctx, "bad symbol after 'ds:'");
    return Operand{DerefAddrOp{sym, true}, std::nullopt};
  }
  if (tok.front() == '[') {
    if (tok.back() != ']') fail(ctx, "unterminated memory operand");
    return parse_mem_expr(std::string_view(tok).substr(1, tok.size() - 2), ctx);
  }
  if (auto reg = parse_reg(lowered)) return make_reg(*reg);
  if (auto num = parse_number(tok)) return make_imm(*num);
  if (is_symbol_token(tok)) {
    // Bare symbol; context fixup decides jump/call targets.
    return Operand{DerefAddrOp{tok, false}, std::nullopt};
  }
  fail(ctx, "unrecognized operand '" + tok + "'");
}

std::vector<std::uint8_t> parse_bytes_directive(std::string_view text, const LineContext& ctx) {
  std::vector<std::uint8_t> bytes;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) {
    if (tok.size() > 2) fail(ctx, "bad byte '" + tok + "' in !bytes directive");
    unsigned value = 0;
    for (char c : tok) {
      if (!std::isxdigit(static_cast<unsigned char>(c))) {
        fail(ctx, "bad byte '" + tok + "' in !bytes directive");
      }
      value = value * 16 + (std::isdigit(static_cast<unsigned char>(c))
                                ? static_cast<unsigned>(c - '0')
                                : static_cast<unsigned>(std::tolower(static_cast<unsigned char>(c)) - 'a' + 10));
    }
    bytes.push_back(static_cast<std::uint8_t>(value));
  }
  if (bytes.empty()) fail(ctx, "!bytes directive with no bytes");
  return bytes;
}

}  // namespace

Instruction parse_instruction_line(std::string_view line, const ParseOptions& opts) {
  // Standalone helper used by tests; wraps the document parser on one line.
  std::string doc = ".func __single__\n" + std::string(line) + "\nretn\n.endfunc\n";
  auto fns = parse_listing(doc, opts);
  if (fns.empty() || fns[0].instructions.size() < 2) {
    throw ParseError(1, 1, "line did not parse to an instruction");
  }
  return fns[0].instructions[0];
}

std::vector<FunctionListing> parse_listing(std::string_view text, const ParseOptions& opts) {
  std::vector<FunctionListing> functions;
  std::set<std::string> seen_names;

  FunctionListing* current = nullptr;
  std::optional<std::string> pending_label;

  int line_no = 0;
  std::size_t offset = 0;
  while (offset <= text.size()) {
    std::size_t nl = text.find('\n', offset);
    std::string_view raw =
        text.substr(offset, nl == std::string_view::npos ? text.size() - offset : nl - offset);
    offset = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    // Comment handling; a `; !bytes ...` trailer attaches opcode bytes.
    std::vector<std::uint8_t> opcode_bytes;
    std::string body;
    std::size_t semi = raw.find(';');
    if (semi != std::string_view::npos) {
      std::string comment = trim(raw.substr(semi + 1));
      if (comment.rfind("!bytes", 0) == 0) {
        LineContext ctx{line_no, static_cast<int>(semi) + 1};
        opcode_bytes = parse_bytes_directive(std::string_view(comment).substr(6), ctx);
      }
      body = trim(raw.substr(0, semi));
    } else {
      body = trim(raw);
    }
    if (body.empty()) continue;

    if (body.rfind(".func", 0) == 0 && (body.size() == 5 || body[5] == ' ' || body[5] == '\t')) {
      if (current) throw ParseError(line_no, 1, ".func inside another function");
      std::istringstream header(body.substr(5));
      std::string name, extra;
      header >> name;
      if (name.empty() || !is_symbol_token(name)) {
        throw ParseError(line_no, 6, ".func requires a function name");
      }
      if (seen_names.count(name)) {
        throw ParseError(line_no, 6, "duplicate function name '" + name + "'");
      }
      seen_names.insert(name);
      functions.push_back(FunctionListing{name, {}, std::nullopt});
      current = &functions.back();
      while (header >> extra) {
        if (extra.rfind("ret=", 0) == 0) {
          auto label = parse_type_label(std::string_view(extra).substr(4));
          if (!label) throw ParseError(line_no, 6, "unknown return type '" + extra.substr(4) + "'");
          current->true_return_type = *label;
        } else {
          throw ParseError(line_no, 6, "unexpected token '" + extra + "' in .func header");
        }
      }
      pending_label.reset();
      continue;
    }
    if (body == ".endfunc") {
      if (!current) throw ParseError(line_no, 1, ".endfunc outside a function");
      current = nullptr;
      pending_label.reset();
      continue;
    }
    if (!current) throw ParseError(line_no, 1, "instruction outside .func block");

    // Optional leading label.
    std::string_view rest = body;
    if (is_symbol_start(rest[0])) {
      std::size_t i = 0;
      while (i < rest.size() && is_symbol_char(rest[i])) ++i;
      if (i < rest.size() && rest[i] == ':') {
        pending_label = std::string(rest.substr(0, i));
        rest = std::string_view(body).substr(i + 1);
        while (!rest.empty() && (rest[0] == ' ' || rest[0] == '\t')) rest.remove_prefix(1);
      }
    }
    if (rest.empty()) continue;  // bare label line

    // Mnemonic token.
    std::size_t m_end = 0;
    while (m_end < rest.size() && rest[m_end] != ' ' && rest[m_end] != '\t') ++m_end;
    std::string mnemonic = to_lower(rest.substr(0, m_end));
    if (mnemonic.empty() || !std::isalpha(static_cast<unsigned char>(mnemonic[0]))) {
      throw ParseError(line_no, 1, "bad mnemonic '" + mnemonic + "'");
    }

    Instruction instr;
    instr.mnemonic = mnemonic;
    instr.label = pending_label;
    instr.opcode_bytes = opcode_bytes;
    pending_label.reset();

    std::string_view operand_text = rest.substr(m_end);
    std::string op_str = trim(operand_text);
    if (!op_str.empty()) {
      std::size_t start = 0;
      int col_base = static_cast<int>(m_end) + 1;
      while (true) {
        std::size_t comma = op_str.find(',', start);
        std::string piece =
            comma == std::string::npos ? op_str.substr(start) : op_str.substr(start, comma - start);
        LineContext ctx{line_no, col_base + static_cast<int>(start)};
        if (trim(piece).empty()) fail(ctx, "missing operand");
        instr.operands.push_back(parse_operand_text(piece, ctx));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }

    // Bare-symbol fixup: jump/call targets are code symbols, anything else
    // in a data position reads memory at the symbol.
    bool is_jump = mnemonic == "jmp" || is_conditional_jump(mnemonic);
    bool is_call = mnemonic == "call";
    if (is_jump || is_call) {
      for (auto& op : instr.operands) {
        if (auto* d = std::get_if<DerefAddrOp>(&op.value); d && !d->ds_prefix) {
          std::string sym = d->symbol;
          if (is_call) {
            op.value = CallTargetOp{sym};
          } else {
            op.value = JumpTargetOp{sym};
          }
        }
      }
    }

    auto it = arity_table().find(mnemonic);
    if (it == arity_table().end()) {
      if (opts.strict_mnemonics) {
        throw ParseError(line_no, 1, "unknown mnemonic '" + mnemonic + "'");
      }
    } else {
      int n = static_cast<int>(instr.operands.size());
      if (n < it->second.first || n > it->second.second) {
        throw ParseError(line_no, 1, "mnemonic '" + mnemonic + "' takes " +
                                         std::to_string(it->second.first) + ".." +
                                         std::to_string(it->second.second) + " operands, got " +
                                         std::to_string(n));
      }
    }
    current->instructions.push_back(std::move(instr));
  }
  if (current) throw ParseError(line_no, 1, "missing .endfunc at end of document");
  return functions;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

std::string render_operand(const Operand& op) {
  std::string out;
  if (op.size_hint) {
    switch (*op.size_hint) {
      case 8: out = "byte ptr "; break;
      case 16: out = "word ptr "; break;
      case 32: out = "dword ptr "; break;
      case 64: out = "qword ptr "; break;
      default: out = ""; break;
    }
  }
  struct Visitor {
    std::string operator()(const RegOp& r) const { return std::string(reg_name(r.reg)); }
    std::string operator()(const ImmOp& i) const { return std::to_string(i.value); }
    std::string operator()(const MemOp& m) const {
      std::string s = "[";
      bool first = true;
      auto append = [&](const std::string& part) {
        if (!first) s += "+";
        s += part;
        first = false;
      };
      if (m.base) append(std::string(reg_name(*m.base)));
      if (m.index) {
        std::string idx(reg_name(*m.index));
        if (m.scale != 1) idx += "*" + std::to_string(m.scale);
        append(idx);
      }
      if (const auto* num = std::get_if<std::int64_t>(&m.disp)) {
        if (*num < 0 && !first) {
          s += "-" + std::to_string(-*num);
        } else {
          append(std::to_string(*num));
        }
      } else if (const auto* sym = std::get_if<std::string>(&m.disp)) {
        append(*sym);
      }
      s += "]";
      return s;
    }
    std::string operator()(const AbsAddrOp& a) const { return "offset " + a.symbol; }
    std::string operator()(const DerefAddrOp& d) const {
      return d.ds_prefix ? "ds:" + d.symbol : d.symbol;
    }
    std::string operator()(const JumpTargetOp& j) const { return j.symbol; }
    std::string operator()(const CallTargetOp& c) const { return c.symbol; }
  };
  return out + std::visit(Visitor{}, op.value);
}

std::string render_instruction(const Instruction& instr) {
  std::string out;
  if (instr.label) out = *instr.label + ": ";
  out += instr.mnemonic;
  for (std::size_t i = 0; i < instr.operands.size(); ++i) {
    out += i == 0 ? " " : ", ";
    out += render_operand(instr.operands[i]);
  }
  if (!instr.opcode_bytes.empty()) {
    out += " ; !bytes";
    static const char* hex = "0123456789ABCDEF";
    for (std::uint8_t b : instr.opcode_bytes) {
      out += ' ';
      out += hex[b >> 4];
      out += hex[b & 0xf];
    }
  }
  return out;
}

std::string render_listing(const std::vector<FunctionListing>& functions) {
  std::string out;
  for (const auto& fn : functions) {
    out += ".func " + fn.name;
    if (fn.true_return_type) {
      out += " ret=" + std::string(type_label_name(*fn.true_return_type));
    }
    out += "\n";
    for (const auto& instr : fn.instructions) {
      out += "    " + render_instruction(instr) + "\n";
    }
    out += ".endfunc\n\n";
  }
  return out;
}

}  // namespace retypelab::asmx
