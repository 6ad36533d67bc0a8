#include "retypelab/generalize.hpp"

#include <algorithm>
#include <set>

namespace retypelab::gen {

using asmx::AbsAddrOp;
using asmx::CallTargetOp;
using asmx::DerefAddrOp;
using asmx::ImmOp;
using asmx::Instruction;
using asmx::JumpTargetOp;
using asmx::MemOp;
using asmx::Operand;
using asmx::RegName;
using asmx::RegOp;

// ---------------------------------------------------------------------------
// Spellings
// ---------------------------------------------------------------------------

std::string_view ph_spelling(Ph p) {
  switch (p) {
    case Ph::Lit: return "<lit>";
    case Ph::Reg: return "<reg>";
    case Ph::Addr: return "<addr>";
    case Ph::StarAddr: return "<*addr>";
    case Ph::Off: return "<off>";
    case Ph::Mem: return "<mem>";
  }
  return "";
}

std::string_view macro_name(MacroKind k) {
  switch (k) {
    case MacroKind::CalleeEpilogue: return "callee_epilogue";
    case MacroKind::CallerEpilogue: return "caller_epilogue";
    case MacroKind::MovChain: return "mov_chain";
    case MacroKind::BoolCast: return "bool_cast";
  }
  return "";
}

namespace {

std::string size_prefix(const std::optional<int>& bits) {
  if (!bits) return "";
  switch (*bits) {
    case 8: return "byte ptr ";
    case 16: return "word ptr ";
    case 32: return "dword ptr ";
    case 64: return "qword ptr ";
  }
  return "";
}

std::string render_gmem(const GMem& m) {
  std::string s = "[";
  bool first = true;
  auto append = [&](const std::string& part) {
    if (!first) s += "+";
    s += part;
    first = false;
  };
  if (const auto* r = std::get_if<RegName>(&m.base)) {
    append(std::string(asmx::reg_name(*r)));
  } else if (std::holds_alternative<Ph>(m.base)) {
    append("<reg>");
  }
  std::string idx;
  if (const auto* r = std::get_if<RegName>(&m.index)) {
    idx = std::string(asmx::reg_name(*r));
  } else if (std::holds_alternative<Ph>(m.index)) {
    idx = "<reg>";
  }
  if (!idx.empty()) {
    if (const auto* sc = std::get_if<int>(&m.scale)) {
      if (*sc != 1) idx += "*" + std::to_string(*sc);
    } else if (std::holds_alternative<Ph>(m.scale)) {
      idx += "*<lit>";
    }
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
  } else if (std::holds_alternative<Ph>(m.disp)) {
    append("<lit>");
  }
  s += "]";
  return s;
}

}  // namespace

std::string render_goperand(const GOperand& op) {
  std::string prefix = size_prefix(op.size_hint);
  if (const auto* concrete = std::get_if<Operand>(&op.value)) {
    return prefix + asmx::render_operand(*concrete);
  }
  if (const auto* p = std::get_if<Ph>(&op.value)) {
    return prefix + std::string(ph_spelling(*p));
  }
  return prefix + render_gmem(std::get<GMem>(op.value));
}

std::string render_element(const PatternElem& elem) {
  if (const auto* instr = std::get_if<GeneralizedInstruction>(&elem)) {
    std::string s = instr->mnemonic;
    for (std::size_t i = 0; i < instr->operands.size(); ++i) {
      s += i == 0 ? " " : ", ";
      s += render_goperand(instr->operands[i]);
    }
    return s;
  }
  if (const auto* macro = std::get_if<MacroElem>(&elem)) {
    std::string s(macro_name(macro->kind));
    if (!macro->args.empty()) {
      s += "(";
      for (std::size_t i = 0; i < macro->args.size(); ++i) {
        if (i) s += ", ";
        s += render_goperand(macro->args[i]);
      }
      s += ")";
    }
    return s;
  }
  return std::get<TagElem>(elem).tag;
}

std::string canonical_name(const GeneralizedPattern& p) {
  std::string s = p.kind == PatternKind::Ret ? "RET: " : "POST: ";
  for (std::size_t i = 0; i < p.elements.size(); ++i) {
    if (i) s += " | ";
    s += render_element(p.elements[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Operand lattice
// ---------------------------------------------------------------------------

namespace {

const std::string kMovClassRep = "mov";

bool in_mov_class(const std::string& mnemonic) {
  return mnemonic == "mov" || mnemonic == "movzx" || mnemonic == "movsx";
}

GOperand concrete(const Operand& op) { return GOperand{op, std::nullopt}; }

GOperand placeholder(Ph p, std::optional<int> hint) { return GOperand{p, hint}; }

void push_unique(std::vector<GOperand>& levels, GOperand op) {
  for (const auto& existing : levels) {
    if (existing == op) return;
  }
  levels.push_back(std::move(op));
}

/// Abstraction chain for one operand, most concrete first. `with_concrete`
/// forces a leading concrete level (macro argument slots keep it even for
/// literals and addresses).
std::vector<GOperand> operand_levels(const Operand& op, bool with_concrete) {
  std::vector<GOperand> levels;
  if (with_concrete) push_unique(levels, concrete(op));

  if (const auto* reg = std::get_if<RegOp>(&op.value)) {
    push_unique(levels, concrete(op));
    RegName fam = asmx::reg_family(reg->reg);
    if (fam != reg->reg) {
      Operand widened = op;
      widened.value = RegOp{fam};
      push_unique(levels, concrete(widened));
    }
    push_unique(levels, placeholder(Ph::Reg, op.size_hint));
  } else if (std::holds_alternative<ImmOp>(op.value)) {
    push_unique(levels, placeholder(Ph::Lit, op.size_hint));
  } else if (const auto* mem = std::get_if<MemOp>(&op.value)) {
    push_unique(levels, concrete(op));
    bool has_disp = !std::holds_alternative<std::monostate>(mem->disp);
    // literals (displacement, scale) abstracted
    GMem m1;
    m1.base = mem->base ? GMem::RegSlot(*mem->base) : GMem::RegSlot(std::monostate{});
    m1.index = mem->index ? GMem::RegSlot(*mem->index) : GMem::RegSlot(std::monostate{});
    m1.scale = !mem->index ? GMem::ScaleSlot(std::monostate{})
                           : (mem->scale != 1 ? GMem::ScaleSlot(Ph::Lit) : GMem::ScaleSlot(1));
    m1.disp = has_disp ? GMem::DispSlot(Ph::Lit) : GMem::DispSlot(std::monostate{});
    if (has_disp || (mem->index && mem->scale != 1)) {
      push_unique(levels, GOperand{m1, op.size_hint});
    }
    // index register abstracted
    if (mem->index) {
      GMem m2 = m1;
      m2.index = Ph::Reg;
      push_unique(levels, GOperand{m2, op.size_hint});
    }
    // whole-operand collapse
    if (mem->base || mem->index) {
      GMem m3;
      m3.base = Ph::Reg;
      push_unique(levels, GOperand{m3, op.size_hint});
    } else {
      push_unique(levels, placeholder(Ph::Mem, op.size_hint));
    }
  } else if (std::holds_alternative<AbsAddrOp>(op.value)) {
    push_unique(levels, placeholder(Ph::Addr, op.size_hint));
  } else if (std::holds_alternative<DerefAddrOp>(op.value)) {
    push_unique(levels, concrete(op));
    push_unique(levels, placeholder(Ph::StarAddr, op.size_hint));
  } else {
    // jump / call targets
    push_unique(levels, placeholder(Ph::Off, op.size_hint));
  }
  return levels;
}

bool level_is_concrete(const GOperand& level, const Operand& source) {
  const auto* c = std::get_if<Operand>(&level.value);
  return c && *c == source;
}

template <class Dims>
bool advance_odometer(std::vector<std::size_t>& idx, const Dims& dims) {
  for (std::size_t d = idx.size(); d-- > 0;) {
    if (++idx[d] < dims[d].size()) return true;
    idx[d] = 0;
  }
  return false;
}

}  // namespace

std::vector<GeneralizedInstruction> generalize_instruction(const Instruction& instr) {
  bool is_class = in_mov_class(instr.mnemonic);
  std::vector<std::string> mnemonic_levels;
  if (is_class && instr.mnemonic != kMovClassRep) {
    mnemonic_levels = {instr.mnemonic, kMovClassRep};
  } else {
    mnemonic_levels = {instr.mnemonic};
  }

  std::vector<std::vector<GOperand>> dims;
  dims.reserve(instr.operands.size());
  bool any_generalizable = false;
  for (const auto& op : instr.operands) {
    dims.push_back(operand_levels(op, /*with_concrete=*/false));
    const auto& levels = dims.back();
    if (levels.size() > 1 || (levels.size() == 1 && !level_is_concrete(levels[0], op))) {
      any_generalizable = true;
    }
  }

  std::vector<GeneralizedInstruction> out;
  std::set<std::string> seen;
  std::vector<std::size_t> idx(dims.size(), 0);
  for (std::size_t mi = 0; mi < mnemonic_levels.size(); ++mi) {
    std::fill(idx.begin(), idx.end(), 0);
    do {
      bool ops_concrete = true;
      for (std::size_t d = 0; d < dims.size(); ++d) {
        if (!level_is_concrete(dims[d][idx[d]], instr.operands[d])) {
          ops_concrete = false;
          break;
        }
      }
      // The fully concrete form only denotes a feature when the mnemonic is
      // the class representative (it then names the whole class) or when
      // nothing is generalizable.
      bool concrete_mnemonic = mnemonic_levels[mi] == instr.mnemonic;
      bool skip = ops_concrete && concrete_mnemonic && any_generalizable &&
                  !(is_class && instr.mnemonic == kMovClassRep);
      if (!skip) {
        GeneralizedInstruction g;
        g.mnemonic = mnemonic_levels[mi];
        for (std::size_t d = 0; d < dims.size(); ++d) g.operands.push_back(dims[d][idx[d]]);
        std::string name = render_element(PatternElem{g});
        if (seen.insert(name).second) out.push_back(std::move(g));
      }
    } while (advance_odometer(idx, dims));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subsumption
// ---------------------------------------------------------------------------

namespace {

bool reg_covers(RegName general, RegName specific) {
  return general == specific || general == asmx::reg_family(specific);
}

bool goperand_matches(const GOperand& g, const Operand& op) {
  // Concrete levels keep the size annotation inside the operand;
  // placeholder/GMem levels carry it on the GOperand.
  if (const auto* c = std::get_if<Operand>(&g.value)) {
    if (*c == op) return true;
    const auto* gr = std::get_if<RegOp>(&c->value);
    const auto* ir = std::get_if<RegOp>(&op.value);
    return gr && ir && c->size_hint == op.size_hint && reg_covers(gr->reg, ir->reg);
  }
  if (g.size_hint != op.size_hint) return false;
  if (const auto* p = std::get_if<Ph>(&g.value)) {
    switch (*p) {
      case Ph::Lit: return std::holds_alternative<ImmOp>(op.value);
      case Ph::Reg: return std::holds_alternative<RegOp>(op.value);
      case Ph::Addr: return std::holds_alternative<AbsAddrOp>(op.value);
      case Ph::StarAddr: return std::holds_alternative<DerefAddrOp>(op.value);
      case Ph::Off:
        return std::holds_alternative<JumpTargetOp>(op.value) ||
               std::holds_alternative<CallTargetOp>(op.value);
      case Ph::Mem: {
        const auto* m = std::get_if<MemOp>(&op.value);
        return m && !m->base && !m->index;
      }
    }
  }
  const auto& gm = std::get<GMem>(g.value);
  const auto* m = std::get_if<MemOp>(&op.value);
  if (!m) return false;
  // collapsed [<reg>] covers any register-relative address
  bool collapsed = std::holds_alternative<Ph>(gm.base) &&
                   std::holds_alternative<std::monostate>(gm.index) &&
                   std::holds_alternative<std::monostate>(gm.disp);
  if (collapsed) return m->base.has_value() || m->index.has_value();
  auto reg_slot_ok = [](const GMem::RegSlot& slot, const std::optional<RegName>& reg) {
    if (std::holds_alternative<std::monostate>(slot)) return !reg.has_value();
    if (const auto* r = std::get_if<RegName>(&slot)) return reg.has_value() && *r == *reg;
    return reg.has_value();
  };
  if (!reg_slot_ok(gm.base, m->base) || !reg_slot_ok(gm.index, m->index)) return false;
  if (const auto* sc = std::get_if<int>(&gm.scale)) {
    if (*sc != m->scale) return false;
  }
  if (std::holds_alternative<std::monostate>(gm.disp)) {
    return std::holds_alternative<std::monostate>(m->disp);
  }
  if (std::holds_alternative<Ph>(gm.disp)) {
    return !std::holds_alternative<std::monostate>(m->disp);
  }
  if (const auto* num = std::get_if<std::int64_t>(&gm.disp)) {
    const auto* mn = std::get_if<std::int64_t>(&m->disp);
    return mn && *mn == *num;
  }
  const auto* sym = std::get_if<std::string>(&gm.disp);
  const auto* ms = std::get_if<std::string>(&m->disp);
  return sym && ms && *sym == *ms;
}

}  // namespace

bool matches(const GeneralizedInstruction& g, const Instruction& instr) {
  bool mnemonic_ok = g.mnemonic == instr.mnemonic ||
                     (in_mov_class(instr.mnemonic) && g.mnemonic == kMovClassRep);
  if (!mnemonic_ok) return false;
  if (g.operands.size() != instr.operands.size()) return false;
  for (std::size_t i = 0; i < g.operands.size(); ++i) {
    if (!goperand_matches(g.operands[i], instr.operands[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Sequence macros
// ---------------------------------------------------------------------------

namespace {

bool is_pop_of(const Instruction& instr, std::initializer_list<RegName> regs) {
  if (instr.mnemonic != "pop" || instr.operands.size() != 1) return false;
  const auto* r = std::get_if<RegOp>(&instr.operands[0].value);
  if (!r) return false;
  return std::find(regs.begin(), regs.end(), r->reg) != regs.end();
}

bool is_mov_esp_ebp(const Instruction& instr) {
  if (instr.mnemonic != "mov" || instr.operands.size() != 2) return false;
  const auto* d = std::get_if<RegOp>(&instr.operands[0].value);
  const auto* s = std::get_if<RegOp>(&instr.operands[1].value);
  return d && s && d->reg == RegName::esp && s->reg == RegName::ebp;
}

bool is_mov_family(const Instruction& instr) {
  return in_mov_class(instr.mnemonic) && instr.operands.size() == 2;
}

bool imm_equals(const Operand& op, std::int64_t v) {
  const auto* imm = std::get_if<ImmOp>(&op.value);
  return imm && imm->value == v;
}

/// Backward match of the callee epilogue grammar
///   { pop ebx|esi|edi } [ mov esp, ebp ] [ pop ebp ] retn
/// returning the start index of the matched span (retn at seq.size()-1).
int callee_epilogue_start(std::span<const Instruction> seq) {
  int at = static_cast<int>(seq.size()) - 1;  // retn
  if (at - 1 >= 0 && is_pop_of(seq[at - 1], {RegName::ebp})) --at;
  if (at - 1 >= 0 && is_mov_esp_ebp(seq[at - 1])) --at;
  while (at - 1 >= 0 && is_pop_of(seq[at - 1], {RegName::ebx, RegName::esi, RegName::edi})) --at;
  return at;
}

std::optional<MacroMatch> try_caller_epilogue(std::span<const Instruction> seq, int i) {
  if (seq[i].mnemonic != "call" || seq[i].operands.size() != 1) return std::nullopt;
  if (!std::holds_alternative<CallTargetOp>(seq[i].operands[0].value)) return std::nullopt;
  int end = i + 1;
  if (end < static_cast<int>(seq.size()) && seq[end].mnemonic == "add" &&
      seq[end].operands.size() == 2) {
    const auto* r = std::get_if<RegOp>(&seq[end].operands[0].value);
    if (r && r->reg == RegName::esp && std::holds_alternative<ImmOp>(seq[end].operands[1].value)) {
      ++end;
    }
  }
  return MacroMatch{MacroElem{MacroKind::CallerEpilogue, {}}, i, end};
}

std::optional<MacroMatch> try_bool_cast(std::span<const Instruction> seq, int i) {
  if (i + 4 > static_cast<int>(seq.size())) return std::nullopt;
  if (!asmx::is_conditional_jump(seq[i].mnemonic)) return std::nullopt;
  const Instruction& set1 = seq[i + 1];
  const Instruction& jump = seq[i + 2];
  const Instruction& set0 = seq[i + 3];
  if (!is_mov_family(set1) || !imm_equals(set1.operands[1], 1)) return std::nullopt;
  if (jump.mnemonic != "jmp") return std::nullopt;
  if (!is_mov_family(set0) || !imm_equals(set0.operands[1], 0)) return std::nullopt;
  if (!(set1.operands[0] == set0.operands[0])) return std::nullopt;
  MacroElem elem{MacroKind::BoolCast, {GOperand{set1.operands[0], std::nullopt}}};
  return MacroMatch{std::move(elem), i, i + 4};
}

std::optional<MacroMatch> try_mov_chain(std::span<const Instruction> seq, int i) {
  if (!is_mov_family(seq[i])) return std::nullopt;
  int end = i + 1;
  while (end < static_cast<int>(seq.size()) && is_mov_family(seq[end]) &&
         seq[end].operands[1] == seq[end - 1].operands[0]) {
    ++end;
  }
  if (end - i < 2) return std::nullopt;
  MacroElem elem{MacroKind::MovChain, {}};
  // final destination, then each link's destination walking backwards,
  // ending at the original source
  for (int k = end - 1; k >= i; --k) {
    elem.args.push_back(GOperand{seq[k].operands[0], std::nullopt});
  }
  elem.args.push_back(GOperand{seq[i].operands[1], std::nullopt});
  return MacroMatch{std::move(elem), i, end};
}

}  // namespace

std::vector<MacroMatch> match_sequence_macros(std::span<const Instruction> seq) {
  std::vector<MacroMatch> out;
  int limit = static_cast<int>(seq.size());
  std::optional<MacroMatch> tail;
  if (!seq.empty() && seq.back().mnemonic == "retn") {
    int start = callee_epilogue_start(seq);
    tail = MacroMatch{MacroElem{MacroKind::CalleeEpilogue, {}}, start, limit};
    limit = start;
  }
  int i = 0;
  auto interior = seq.first(static_cast<std::size_t>(limit));
  while (i < limit) {
    std::optional<MacroMatch> best;
    for (const auto& candidate :
         {try_bool_cast(interior, i), try_mov_chain(interior, i), try_caller_epilogue(interior, i)}) {
      if (!candidate) continue;
      if (!best || candidate->end - candidate->start > best->end - best->start) best = candidate;
    }
    if (best) {
      i = best->end;
      out.push_back(std::move(*best));
    } else {
      ++i;
    }
  }
  if (tail) out.push_back(std::move(*tail));
  return out;
}

// ---------------------------------------------------------------------------
// Chunk generalization
// ---------------------------------------------------------------------------

namespace {

std::vector<PatternElem> macro_alternatives(const MacroElem& macro) {
  if (macro.args.empty()) return {PatternElem{macro}};
  std::vector<std::vector<GOperand>> dims;
  for (const auto& arg : macro.args) {
    const auto* concrete_arg = std::get_if<Operand>(&arg.value);
    if (!concrete_arg) {
      dims.push_back({arg});
      continue;
    }
    dims.push_back(operand_levels(*concrete_arg, /*with_concrete=*/true));
  }
  std::vector<PatternElem> out;
  std::vector<std::size_t> idx(dims.size(), 0);
  do {
    MacroElem variant{macro.kind, {}};
    for (std::size_t d = 0; d < dims.size(); ++d) variant.args.push_back(dims[d][idx[d]]);
    out.push_back(PatternElem{std::move(variant)});
  } while (advance_odometer(idx, dims));
  return out;
}

using ElemChoices = std::vector<PatternElem>;

void emit_cross_product(PatternKind kind, const std::vector<ElemChoices>& choices,
                        const GeneralizeOptions& opts, PatternSet& out,
                        std::set<std::string>& seen) {
  std::vector<std::size_t> idx(choices.size(), 0);
  do {
    GeneralizedPattern p;
    p.kind = kind;
    for (std::size_t d = 0; d < choices.size(); ++d) p.elements.push_back(choices[d][idx[d]]);
    std::string name = canonical_name(p);
    if (seen.count(name)) continue;
    if (static_cast<int>(out.patterns.size()) >= opts.pattern_budget) {
      out.truncated = true;
      return;
    }
    seen.insert(std::move(name));
    out.patterns.push_back(std::move(p));
  } while (advance_odometer(idx, choices));
}

}  // namespace

PatternSet generalize_ret_chunk(const extract::RetChunk& chunk, const GeneralizeOptions& opts) {
  std::vector<Instruction> seq = chunk.instructions;
  Instruction retn;
  retn.mnemonic = "retn";
  seq.push_back(retn);

  auto macros = match_sequence_macros(seq);
  // epilogue match is last; everything else is interior
  MacroMatch epilogue = macros.back();
  macros.pop_back();

  // Elements of the chunk in order: standalone instructions and macro spans.
  struct Slot {
    bool is_macro;
    MacroElem macro;
    Instruction instr;
  };
  std::vector<Slot> slots;
  int i = 0;
  std::size_t next_macro = 0;
  while (i < epilogue.start) {
    if (next_macro < macros.size() && macros[next_macro].start == i) {
      slots.push_back({true, macros[next_macro].elem, {}});
      i = macros[next_macro].end;
      ++next_macro;
    } else {
      slots.push_back({false, {}, seq[static_cast<std::size_t>(i)]});
      ++i;
    }
  }

  PatternSet out;
  std::set<std::string> seen;
  for (std::size_t k = 0; k <= slots.size(); ++k) {
    std::vector<ElemChoices> choices;
    for (std::size_t s = slots.size() - k; s < slots.size(); ++s) {
      const Slot& slot = slots[s];
      if (slot.is_macro) {
        choices.push_back(macro_alternatives(slot.macro));
      } else {
        ElemChoices alts;
        for (auto& g : generalize_instruction(slot.instr)) alts.push_back(PatternElem{std::move(g)});
        choices.push_back(std::move(alts));
      }
    }
    choices.push_back(macro_alternatives(epilogue.elem));
    emit_cross_product(PatternKind::Ret, choices, opts, out, seen);
    if (out.truncated) break;
  }
  return out;
}

PatternSet generalize_post_chunk(const extract::PostCallChunk& chunk,
                                 const GeneralizeOptions& opts) {
  PatternSet out;
  std::set<std::string> seen;
  MacroElem caller{MacroKind::CallerEpilogue, {}};
  emit_cross_product(PatternKind::Post, {{PatternElem{caller}}}, opts, out, seen);
  if (chunk.next_instruction) {
    std::vector<ElemChoices> choices;
    choices.push_back({PatternElem{caller}});
    ElemChoices alts;
    for (auto& g : generalize_instruction(*chunk.next_instruction)) {
      alts.push_back(PatternElem{std::move(g)});
    }
    choices.push_back(std::move(alts));
    emit_cross_product(PatternKind::Post, choices, opts, out, seen);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Advanced discriminators
// ---------------------------------------------------------------------------

namespace {

GeneralizedPattern tag_pattern(PatternKind kind, std::string tag) {
  return GeneralizedPattern{kind, {PatternElem{TagElem{std::move(tag)}}}};
}

bool is_accumulator(RegName r) { return asmx::reg_family(r) == RegName::eax; }

bool is_fp_load_store(const std::string& mnemonic) {
  return mnemonic == "fld" || mnemonic == "fst" || mnemonic == "fstp" || mnemonic == "fild" ||
         mnemonic == "fistp";
}

std::optional<std::string> fp_width_of(const Instruction& instr) {
  if (!is_fp_load_store(instr.mnemonic)) return std::nullopt;
  if (!instr.opcode_bytes.empty()) {
    if (instr.opcode_bytes[0] == 0xD9) return "dword";
    if (instr.opcode_bytes[0] == 0xDD) return "qword";
  }
  for (const auto& op : instr.operands) {
    if (op.size_hint == 32) return "dword";
    if (op.size_hint == 64) return "qword";
  }
  return std::nullopt;
}

bool writes_first_operand(const std::string& mnemonic) {
  return mnemonic != "cmp" && mnemonic != "test" && mnemonic != "push";
}

}  // namespace

std::vector<GeneralizedPattern> advanced_ret_features(const extract::RetChunk& chunk) {
  std::vector<GeneralizedPattern> out;
  const auto& body = chunk.instructions;

  // returned-literal class: last literal moved into the accumulator family
  for (auto it = body.rbegin(); it != body.rend(); ++it) {
    if (!is_mov_family(*it)) continue;
    const auto* dst = std::get_if<RegOp>(&it->operands[0].value);
    const auto* imm = std::get_if<ImmOp>(&it->operands[1].value);
    if (!dst || !imm || !is_accumulator(dst->reg)) continue;
    bool bool_like = imm->value == 0 || imm->value == 1;
    out.push_back(tag_pattern(PatternKind::Ret,
                              bool_like ? "literal_class=bool_like" : "literal_class=other"));
    break;
  }

  bool div_seen = false, lea_eax = false, edx_written = false, struct_shape = false;
  std::set<std::string> fp_widths;
  for (const auto& instr : body) {
    if (instr.mnemonic == "div" || instr.mnemonic == "idiv") div_seen = true;
    if (instr.mnemonic == "lea" && instr.operands.size() == 2) {
      const auto* dst = std::get_if<RegOp>(&instr.operands[0].value);
      if (dst && dst->reg == RegName::eax) lea_eax = true;
    }
    if (!instr.operands.empty() && writes_first_operand(instr.mnemonic)) {
      const auto* dst = std::get_if<RegOp>(&instr.operands[0].value);
      if (dst && dst->reg == RegName::edx) edx_written = true;
    }
    if (auto width = fp_width_of(instr)) fp_widths.insert(*width);
    // hidden-buffer struct return: eax loaded from the argument area
    if (is_mov_family(instr)) {
      const auto* dst = std::get_if<RegOp>(&instr.operands[0].value);
      const auto* src = std::get_if<MemOp>(&instr.operands[1].value);
      if (dst && src && dst->reg == RegName::eax && src->base == RegName::ebp) {
        if (const auto* sym = std::get_if<std::string>(&src->disp)) {
          if (sym->rfind("arg", 0) == 0) struct_shape = true;
        } else if (const auto* num = std::get_if<std::int64_t>(&src->disp)) {
          if (*num > 0) struct_shape = true;
        }
      }
    }
  }
  if (div_seen) out.push_back(tag_pattern(PatternKind::Ret, "div_present"));
  if (lea_eax) out.push_back(tag_pattern(PatternKind::Ret, "lea_into_eax"));
  if (edx_written) out.push_back(tag_pattern(PatternKind::Ret, "edx_written"));
  if (struct_shape) out.push_back(tag_pattern(PatternKind::Ret, "struct_ret_shape"));
  for (const auto& width : fp_widths) {
    out.push_back(tag_pattern(PatternKind::Ret, "fp_width=" + width));
  }
  return out;
}

std::vector<GeneralizedPattern> advanced_post_features(const extract::PostCallChunk& chunk) {
  std::vector<GeneralizedPattern> out;
  std::string result_use = "none";
  if (chunk.next_instruction) {
    const Instruction& next = *chunk.next_instruction;
    if (next.mnemonic == "movzx") out.push_back(tag_pattern(PatternKind::Post, "widen=zero"));
    if (next.mnemonic == "movsx") out.push_back(tag_pattern(PatternKind::Post, "widen=sign"));
    if (auto width = fp_width_of(next)) {
      out.push_back(tag_pattern(PatternKind::Post, "fp_width=" + *width));
    }
    if (is_mov_family(next)) {
      const auto* src = std::get_if<RegOp>(&next.operands[1].value);
      if (src && is_accumulator(src->reg)) {
        if (std::holds_alternative<RegOp>(next.operands[0].value)) {
          result_use = "reg";
        } else if (std::holds_alternative<MemOp>(next.operands[0].value) ||
                   std::holds_alternative<DerefAddrOp>(next.operands[0].value)) {
          result_use = "mem";
        }
      }
    } else if (next.mnemonic == "cwde" || next.mnemonic == "cdq") {
      result_use = "reg";
    }
  }
  out.push_back(tag_pattern(PatternKind::Post, "result_use=" + result_use));
  return out;
}

}  // namespace retypelab::gen
