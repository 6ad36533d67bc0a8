#include "retypelab/corpus_synth.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "retypelab/parallel.hpp"

namespace retypelab::synth {

using asmx::TypeLabel;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
  for (int c : counts) {
    if (c < 0) throw std::invalid_argument("synth config: negative per-type count");
  }
  if (callers_per_function < 0) {
    throw std::invalid_argument("synth config: callers_per_function must be >= 0");
  }
  if (distractor_probability < 0.0 || distractor_probability > 1.0) {
    throw std::invalid_argument("synth config: distractor_probability must be in [0,1]");
  }
  double sum = 0.0;
  for (double w : epilogue_variant_weights) {
    if (w < 0.0) throw std::invalid_argument("synth config: negative epilogue weight");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("synth config: epilogue weights must sum to 1");
  }
}

SynthConfig SynthConfig::from_kv(const KvConfig& kv) {
  SynthConfig cfg;
  long long all = kv.get_int("count.all", 0);
  for (int i = 0; i < asmx::kTypeLabelCount; ++i) {
    auto label = static_cast<TypeLabel>(i);
    cfg.counts[static_cast<std::size_t>(i)] = static_cast<int>(
        kv.get_int("count." + std::string(asmx::type_label_name(label)), all));
  }
  cfg.callers_per_function = static_cast<int>(kv.get_int("callers_per_function", 1));
  cfg.distractor_probability = kv.get_double("distractor_probability", 0.25);
  cfg.confusable_mode = kv.get_bool("confusable_mode", false);
  auto weights = kv.get_doubles("epilogue_weights", {0.2, 0.4, 0.4});
  if (weights.size() != 3) {
    throw std::invalid_argument("synth config: epilogue_weights needs three values");
  }
  for (int i = 0; i < 3; ++i) cfg.epilogue_variant_weights[static_cast<std::size_t>(i)] = weights[static_cast<std::size_t>(i)];
  cfg.rng_seed = static_cast<std::uint64_t>(kv.get_int("rng_seed", 1));
  cfg.validate();
  return cfg;
}

KvConfig SynthConfig::to_kv() const {
  KvConfig kv;
  for (int i = 0; i < asmx::kTypeLabelCount; ++i) {
    auto label = static_cast<TypeLabel>(i);
    kv.set("count." + std::string(asmx::type_label_name(label)),
           std::to_string(counts[static_cast<std::size_t>(i)]));
  }
  kv.set("callers_per_function", std::to_string(callers_per_function));
  kv.set("distractor_probability", std::to_string(distractor_probability));
  kv.set("confusable_mode", confusable_mode ? "true" : "false");
  kv.set("epilogue_weights", std::to_string(epilogue_variant_weights[0]) + "," +
                                 std::to_string(epilogue_variant_weights[1]) + "," +
                                 std::to_string(epilogue_variant_weights[2]));
  kv.set("rng_seed", std::to_string(rng_seed));
  return kv;
}

// ---------------------------------------------------------------------------
// Template catalog
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kVarPool = {"var_4", "var_8", "var_C", "var_10", "var_14", "var_18"};
const std::vector<std::string> kGlobalPool = {"_gbuf0", "_gbuf1", "_gtab", "_gstate"};

std::string pick(const std::vector<std::string>& pool, Rng& rng) {
  return pool[static_cast<std::size_t>(rng.next_below(pool.size()))];
}

std::string lit(std::int64_t v) { return std::to_string(v); }

std::int64_t printable_or_nul(Rng& rng) {
  // printable ASCII plus {0,1}; the overlap with the bool pool is deliberate
  std::uint64_t roll = rng.next_below(97);
  if (roll == 0) return 0;
  if (roll == 1) return 1;
  return 32 + static_cast<std::int64_t>(roll - 2);
}

std::string hex_byte(std::int64_t v) {
  static const char* digits = "0123456789ABCDEF";
  std::string s;
  s += digits[(v >> 4) & 0xf];
  s += digits[v & 0xf];
  return s;
}

/// Raw-opcode trailer for fld/fstp over an ebp-relative slot. D9 marks the
/// dword encodings, DD the qword ones.
std::string fp_bytes(bool qword, bool store, Rng& rng) {
  std::string first = qword ? "DD" : "D9";
  std::string modrm = store ? "5D" : "45";
  return " ; !bytes " + first + " " + modrm + " " + hex_byte(static_cast<std::int64_t>(rng.next_below(0x7f)) + 1);
}

struct TemplateDef {
  std::string id;
  TemplateInstance (*render)(Rng& rng);
};

TemplateInstance render_bool_cmp_sete(Rng& rng) {
  TemplateInstance t;
  t.template_id = "bool.cmp_sete";
  t.body_lines = {"mov ecx, " + lit(rng.next_int(-128, 127)),
                  "cmp ecx, " + lit(rng.next_int(-128, 127)), "sete al"};
  t.post_call_lines = {"movzx edx, al"};
  return t;
}

TemplateInstance render_bool_literal(Rng& rng) {
  TemplateInstance t;
  t.template_id = "intlike.mov_al_lit";
  t.body_lines = {"mov al, " + lit(rng.next_int(0, 1))};
  t.post_call_lines = {"movzx edx, al"};
  return t;
}

TemplateInstance render_char_store_load(Rng& rng) {
  TemplateInstance t;
  t.template_id = "char.store_load";
  std::string slot = pick(kVarPool, rng);
  t.body_lines = {"mov byte ptr [ebp+" + slot + "], " + lit(printable_or_nul(rng)),
                  "mov al, byte ptr [ebp+" + slot + "]"};
  t.post_call_lines = {"movsx edx, al"};
  return t;
}

TemplateInstance render_char_literal(Rng& rng) {
  TemplateInstance t;
  t.template_id = "intlike.mov_al_lit";
  t.body_lines = {"mov al, " + lit(printable_or_nul(rng))};
  t.post_call_lines = {"movsx edx, al"};
  return t;
}

TemplateInstance render_short_literal(Rng& rng) {
  TemplateInstance t;
  t.template_id = "short.mov_ax_lit";
  t.body_lines = {"mov ax, " + lit(rng.next_int(-32768, 32767))};
  t.post_call_lines = {"cwde"};
  return t;
}

TemplateInstance render_short_load(Rng& rng) {
  TemplateInstance t;
  t.template_id = "short.load_ax";
  t.body_lines = {"mov ax, word ptr [ebp+" + pick(kVarPool, rng) + "]"};
  t.post_call_lines = {"cwde"};
  return t;
}

std::vector<std::string> int_post(Rng& rng) {
  return {"mov [ebp+" + pick(kVarPool, rng) + "], eax"};
}

TemplateInstance render_int_literal(Rng& rng) {
  TemplateInstance t;
  t.template_id = "int.mov_eax_lit";
  t.body_lines = {"mov eax, " + lit(rng.next_int(-2147483648ll, 2147483647ll))};
  t.post_call_lines = int_post(rng);
  return t;
}

TemplateInstance render_int_div(Rng& rng) {
  TemplateInstance t;
  t.template_id = "int.div";
  t.body_lines = {"mov eax, [ebp+" + pick(kVarPool, rng) + "]",
                  "mov ecx, " + lit(rng.next_int(2, 99)), "cdq", "idiv ecx"};
  t.post_call_lines = int_post(rng);
  return t;
}

TemplateInstance render_int_cmp(Rng& rng) {
  TemplateInstance t;
  t.template_id = "int.cmp_as_int";
  t.body_lines = {"mov ecx, [ebp+" + pick(kVarPool, rng) + "]",
                  "cmp ecx, " + lit(rng.next_int(-64, 64)), "setle al", "movzx eax, al"};
  t.post_call_lines = int_post(rng);
  return t;
}

TemplateInstance render_long_long(Rng& rng) {
  TemplateInstance t;
  t.template_id = "ll.mov_pair";
  t.body_lines = {"mov eax, " + lit(rng.next_int(-2147483648ll, 2147483647ll)),
                  "mov edx, " + lit(rng.next_int(-2147483648ll, 2147483647ll))};
  std::string lo = pick(kVarPool, rng);
  t.post_call_lines = {"mov [ebp+" + lo + "], eax", "mov [ebp+" + pick(kVarPool, rng) + "], edx"};
  return t;
}

TemplateInstance render_float(Rng& rng) {
  TemplateInstance t;
  t.template_id = "float.fld_dword";
  t.body_lines = {"fld dword ptr [ebp+" + pick(kVarPool, rng) + "]" + fp_bytes(false, false, rng)};
  t.post_call_lines = {"fstp dword ptr [ebp+" + pick(kVarPool, rng) + "]" + fp_bytes(false, true, rng)};
  return t;
}

TemplateInstance render_double(Rng& rng) {
  TemplateInstance t;
  t.template_id = "double.fld_qword";
  t.body_lines = {"fld qword ptr [ebp+" + pick(kVarPool, rng) + "]" + fp_bytes(true, false, rng)};
  t.post_call_lines = {"fstp qword ptr [ebp+" + pick(kVarPool, rng) + "]" + fp_bytes(true, true, rng)};
  return t;
}

std::vector<std::string> pointer_post() { return {"mov ecx, eax"}; }

TemplateInstance render_pointer_lea(Rng& rng) {
  TemplateInstance t;
  t.template_id = "ptr.lea";
  t.body_lines = {"lea eax, [ebp+" + pick(kVarPool, rng) + "]"};
  t.post_call_lines = pointer_post();
  return t;
}

TemplateInstance render_pointer_offset(Rng& rng) {
  TemplateInstance t;
  t.template_id = "ptr.offset";
  t.body_lines = {"mov eax, offset " + pick(kGlobalPool, rng)};
  t.post_call_lines = pointer_post();
  return t;
}

TemplateInstance render_pointer_confusable(Rng& rng) {
  TemplateInstance t;
  t.template_id = "int.mov_eax_lit";
  t.body_lines = {"mov eax, " + lit(rng.next_int(4096, 2147483647ll))};
  t.post_call_lines = pointer_post();
  return t;
}

TemplateInstance render_struct(Rng& rng) {
  TemplateInstance t;
  t.template_id = "struct.hidden_buffer";
  t.body_lines = {"mov ecx, [ebp+arg_0]",
                  "mov [ecx], " + lit(rng.next_int(0, 255)),
                  "mov eax, [ebp+arg_0]"};
  t.post_call_lines = {"mov ecx, eax"};
  return t;
}

TemplateInstance render_void(Rng& rng) {
  TemplateInstance t;
  t.template_id = "void.plain";
  t.body_lines = {};
  t.post_call_lines = {"mov ecx, " + lit(rng.next_int(0, 255))};
  return t;
}

const std::vector<TemplateDef>& catalog_for(TypeLabel label, bool confusable) {
  static const std::vector<TemplateDef> bool_plain = {{"bool.cmp_sete", render_bool_cmp_sete}};
  static const std::vector<TemplateDef> bool_conf = {{"intlike.mov_al_lit", render_bool_literal}};
  static const std::vector<TemplateDef> char_plain = {{"char.store_load", render_char_store_load}};
  static const std::vector<TemplateDef> char_conf = {{"intlike.mov_al_lit", render_char_literal}};
  static const std::vector<TemplateDef> short_t = {{"short.mov_ax_lit", render_short_literal},
                                                   {"short.load_ax", render_short_load}};
  static const std::vector<TemplateDef> int_plain = {{"int.mov_eax_lit", render_int_literal},
                                                     {"int.div", render_int_div},
                                                     {"int.cmp_as_int", render_int_cmp}};
  static const std::vector<TemplateDef> int_conf = {{"int.mov_eax_lit", render_int_literal}};
  static const std::vector<TemplateDef> ll_t = {{"ll.mov_pair", render_long_long}};
  static const std::vector<TemplateDef> float_t = {{"float.fld_dword", render_float}};
  static const std::vector<TemplateDef> double_t = {{"double.fld_qword", render_double}};
  static const std::vector<TemplateDef> ptr_plain = {{"ptr.lea", render_pointer_lea},
                                                     {"ptr.offset", render_pointer_offset}};
  static const std::vector<TemplateDef> ptr_conf = {{"int.mov_eax_lit", render_pointer_confusable}};
  static const std::vector<TemplateDef> struct_t = {{"struct.hidden_buffer", render_struct}};
  static const std::vector<TemplateDef> void_t = {{"void.plain", render_void}};

  switch (label) {
    case TypeLabel::Bool: return confusable ? bool_conf : bool_plain;
    case TypeLabel::Char: return confusable ? char_conf : char_plain;
    case TypeLabel::Short: return short_t;
    case TypeLabel::Int: return confusable ? int_conf : int_plain;
    case TypeLabel::LongLong: return ll_t;
    case TypeLabel::Float: return float_t;
    case TypeLabel::Double: return double_t;
    case TypeLabel::Pointer: return confusable ? ptr_conf : ptr_plain;
    case TypeLabel::Struct: return struct_t;
    case TypeLabel::Void: return void_t;
  }
  return void_t;
}

}  // namespace

std::vector<std::string> ret_template_ids(TypeLabel label, bool confusable) {
  std::vector<std::string> ids;
  for (const auto& def : catalog_for(label, confusable)) ids.push_back(def.id);
  return ids;
}

TemplateInstance template_for(TypeLabel label, bool confusable, Rng& rng) {
  const auto& defs = catalog_for(label, confusable);
  const auto& def = defs[static_cast<std::size_t>(rng.next_below(defs.size()))];
  return def.render(rng);
}

std::string template_signature_feature(const std::string& template_id) {
  static const std::map<std::string, std::string> signatures = {
      {"bool.cmp_sete", "RET: sete <reg> | callee_epilogue"},
      {"intlike.mov_al_lit", "RET: mov al, <lit> | callee_epilogue"},
      {"char.store_load", "RET: mov_chain(al, byte ptr [ebp+<lit>], <lit>) | callee_epilogue"},
      {"short.mov_ax_lit", "RET: mov ax, <lit> | callee_epilogue"},
      {"short.load_ax", "RET: mov ax, word ptr [ebp+<lit>] | callee_epilogue"},
      {"int.mov_eax_lit", "RET: mov eax, <lit> | callee_epilogue"},
      {"int.div", "RET: idiv <reg> | callee_epilogue"},
      {"int.cmp_as_int", "RET: mov eax, al | callee_epilogue"},
      {"ll.mov_pair", "RET: mov edx, <lit> | callee_epilogue"},
      {"float.fld_dword", "RET: fld dword ptr [ebp+<lit>] | callee_epilogue"},
      {"double.fld_qword", "RET: fld qword ptr [ebp+<lit>] | callee_epilogue"},
      {"ptr.lea", "RET: lea eax, [ebp+<lit>] | callee_epilogue"},
      {"ptr.offset", "RET: mov eax, <addr> | callee_epilogue"},
      {"struct.hidden_buffer", "RET: struct_ret_shape"},
      {"void.plain", "RET: callee_epilogue"},
  };
  auto it = signatures.find(template_id);
  if (it == signatures.end()) throw std::invalid_argument("unknown template id: " + template_id);
  return it->second;
}

// ---------------------------------------------------------------------------
// Corpus assembly
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kDistractors = {
    "mov esi, {lit}", "add esi, {lit}", "xor esi, esi", "mov edi, esi",
    "mov [ebp+{var}], esi"};

std::string fill_distractor(const std::string& pattern, Rng& rng) {
  std::string out = pattern;
  if (auto pos = out.find("{lit}"); pos != std::string::npos) {
    out.replace(pos, 5, lit(rng.next_int(0, 4095)));
  }
  if (auto pos = out.find("{var}"); pos != std::string::npos) {
    out.replace(pos, 5, pick(kVarPool, rng));
  }
  return out;
}

int draw_epilogue_variant(const std::array<double, 3>& weights, Rng& rng) {
  double roll = rng.next_double();
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    acc += weights[static_cast<std::size_t>(i)];
    if (roll < acc) return i;
  }
  return 2;
}

/// Whole text of one labeled function.
std::string render_function(const std::string& name, TypeLabel label, const SynthConfig& cfg,
                            Rng rng, std::string* template_id) {
  TemplateInstance inst = template_for(label, cfg.confusable_mode, rng);
  *template_id = inst.template_id;
  int variant = draw_epilogue_variant(cfg.epilogue_variant_weights, rng);

  std::string out = ".func " + name + " ret=" + std::string(asmx::type_label_name(label)) + "\n";
  out += "    push ebp\n    mov ebp, esp\n    sub esp, " + lit(8 * rng.next_int(1, 8)) + "\n";
  if (variant == 0) out += "    push edi\n    push esi\n";

  int n_distractors = static_cast<int>(rng.next_below(3));
  for (int i = 0; i < n_distractors; ++i) {
    out += "    " + fill_distractor(pick(kDistractors, rng), rng) + "\n";
  }
  if (label == TypeLabel::Void && rng.next_bool(cfg.distractor_probability)) {
    // throwaway computation in eax, then ignored
    out += "    mov eax, " + lit(rng.next_int(0, 4095)) + "\n";
    out += "    mov [ebp+" + pick(kVarPool, rng) + "], eax\n";
  }
  for (const auto& line : inst.body_lines) out += "    " + line + "\n";

  if (variant == 0) out += "    pop esi\n    pop edi\n";
  if (variant <= 1) out += "    mov esp, ebp\n";
  out += "    pop ebp\n    retn\n.endfunc\n\n";
  return out;
}

struct CallSite {
  std::string callee;
  TypeLabel label;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// One unlabeled caller hosting a batch of synthetic call sites.
std::string render_caller(const std::string& name, const std::vector<CallSite>& sites,
                          const SynthConfig& cfg, Rng rng) {
  std::string out = ".func " + name + "\n";
  out += "    push ebp\n    mov ebp, esp\n    sub esp, " + lit(8 * rng.next_int(2, 8)) + "\n";
  for (const auto& site : sites) {
    Rng srng = rng.derive(fnv1a(site.callee));
    int args = static_cast<int>(srng.next_below(3));
    for (int a = 0; a < args; ++a) {
      out += "    push " + lit(srng.next_int(0, 255)) + "\n";
    }
    int pushed = args;
    if (site.label == TypeLabel::Struct) {
      // hidden result buffer, pushed last so it is the first argument
      out += "    lea eax, [ebp+" + pick(kVarPool, srng) + "]\n    push eax\n";
      ++pushed;
    }
    out += "    call " + site.callee + "\n";
    if (pushed > 0) out += "    add esp, " + lit(4 * pushed) + "\n";
    TemplateInstance inst = template_for(site.label, cfg.confusable_mode, srng);
    for (const auto& line : inst.post_call_lines) out += "    " + line + "\n";
  }
  int variant = draw_epilogue_variant(cfg.epilogue_variant_weights, rng);
  if (variant <= 1) out += "    mov esp, ebp\n";
  out += "    pop ebp\n    retn\n.endfunc\n\n";
  return out;
}

}  // namespace

SynthCorpus synthesize_corpus(const SynthConfig& cfg) {
  cfg.validate();
  Rng root(cfg.rng_seed);

  struct Job {
    std::string name;
    TypeLabel label;
    std::uint64_t stream;
  };
  std::vector<Job> jobs;
  for (int t = 0; t < asmx::kTypeLabelCount; ++t) {
    auto label = static_cast<TypeLabel>(t);
    for (int i = 0; i < cfg.counts[static_cast<std::size_t>(t)]; ++i) {
      std::string name = "_" + std::string(asmx::type_label_name(label)) + "_" + std::to_string(i);
      jobs.push_back({name, label, static_cast<std::uint64_t>(jobs.size())});
    }
  }

  SynthCorpus corpus;
  corpus.records.resize(jobs.size());
  std::vector<std::string> rendered(jobs.size());
  par::parallel_for(static_cast<std::int64_t>(jobs.size()), [&](std::int64_t i) {
    const Job& job = jobs[static_cast<std::size_t>(i)];
    std::string template_id;
    rendered[static_cast<std::size_t>(i)] =
        render_function(job.name, job.label, cfg, root.derive(job.stream), &template_id);
    corpus.records[static_cast<std::size_t>(i)] = SynthRecord{job.name, job.label, template_id};
  });

  std::string text;
  for (const auto& fn : rendered) text += fn;

  // Call sites grouped into unlabeled caller functions, eight sites each.
  if (cfg.callers_per_function > 0 && !jobs.empty()) {
    std::vector<CallSite> sites;
    for (const auto& job : jobs) {
      for (int c = 0; c < cfg.callers_per_function; ++c) {
        sites.push_back(CallSite{job.name, job.label});
      }
    }
    const std::size_t batch = 8;
    std::size_t n_callers = (sites.size() + batch - 1) / batch;
    std::vector<std::string> callers(n_callers);
    par::parallel_for(static_cast<std::int64_t>(n_callers), [&](std::int64_t i) {
      auto idx = static_cast<std::size_t>(i);
      std::vector<CallSite> slice(
          sites.begin() + static_cast<std::ptrdiff_t>(idx * batch),
          sites.begin() + static_cast<std::ptrdiff_t>(std::min(sites.size(), (idx + 1) * batch)));
      callers[idx] = render_caller("_caller_" + std::to_string(idx), slice, cfg,
                                   root.derive(0x10000000ull + static_cast<std::uint64_t>(i)));
    });
    for (const auto& caller : callers) text += caller;
  }

  corpus.listing_text = text;
  corpus.functions = asmx::parse_listing(text);
  return corpus;
}

std::string emit_listing(const SynthCorpus& corpus) { return corpus.listing_text; }

}  // namespace retypelab::synth
