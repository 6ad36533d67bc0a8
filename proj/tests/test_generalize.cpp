#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "retypelab/generalize.hpp"
#include "retypelab/rng.hpp"

using namespace retypelab;
using namespace retypelab::asmx;
using namespace retypelab::gen;

namespace {

Instruction parse_one(const std::string& line) { return parse_instruction_line(line); }

std::vector<Instruction> parse_body(const std::string& body) {
  return parse_listing(".func _t\n" + body + "\n.endfunc\n").at(0).instructions;
}

std::set<std::string> gen_names(const std::string& line) {
  std::set<std::string> names;
  for (const auto& g : generalize_instruction(parse_one(line))) {
    names.insert(render_element(PatternElem{g}));
  }
  return names;
}

std::set<std::string> macro_names(const std::string& body) {
  auto seq = parse_body(body);
  std::set<std::string> names;
  for (const auto& match : match_sequence_macros(seq)) {
    names.insert(render_element(PatternElem{match.elem}));
  }
  return names;
}

extract::RetChunk chunk_of(const std::string& body) {
  auto fns = parse_listing(".func _t\n" + body + "\nretn\n.endfunc\n");
  auto chunks = extract::extract_ret_chunks(fns.at(0), 16);
  REQUIRE(chunks.size() == 1);
  return chunks[0];
}

std::set<std::string> ret_pattern_names(const std::string& body, int budget = 256) {
  GeneralizeOptions opts;
  opts.pattern_budget = budget;
  std::set<std::string> names;
  for (const auto& p : generalize_ret_chunk(chunk_of(body), opts).patterns) {
    names.insert(canonical_name(p));
  }
  return names;
}

}  // namespace

// The golden suite: every row of the generalization table reproduces with a
// byte-identical canonical spelling (rows 1-12 instruction generalizations,
// rows 13-19 sequence macros, row 20 the bare-return epilogue).
TEST_CASE("golden: operand generalization rows") {
  CHECK(gen_names("sub al, 1").count("sub al, <lit>"));                               // 1
  CHECK(gen_names("mov ecx, [ebp+var_1AC8]").count("mov ecx, [ebp+<lit>]"));          // 2
  CHECK(gen_names("mov ecx, [ebp+var_1AC8]").count("mov ecx, [<reg>]"));              // 3
  CHECK(gen_names("push offset $SG25215").count("push <addr>"));                      // 4
  CHECK(gen_names("movsd xmm0, ds:__real@43e2eb565391bf9e").count("movsd xmm0, <*addr>"));  // 5
  CHECK(gen_names("jmp loc_22F").count("jmp <off>"));                                 // 6
  CHECK(gen_names("mov cx, [ebp+eax*2+var_10]").count("mov cx, [ebp+eax*<lit>+<lit>]"));    // 7
  CHECK(gen_names("mov cx, [ebp+eax*2+var_10]").count("mov cx, [ebp+<reg>*<lit>+<lit>]"));  // 8
  CHECK(gen_names("mov cx, [ebp+eax*2+var_10]").count("mov ecx, [<reg>]"));           // 9
}

TEST_CASE("golden: mnemonic generalization rows") {
  CHECK(gen_names("movzx ecx, [ebp+var_A]").count("mov ecx, [ebp+var_A]"));       // 10
  CHECK(gen_names("movsx ecx, _global_var_1234").count("mov ecx, _global_var_1234"));  // 11
  CHECK(gen_names("mov [eax], edx").count("mov [eax], edx"));                     // 12
}

TEST_CASE("golden: sequence macro rows") {
  CHECK(macro_names("pop esi\npop edi\nmov esp, ebp\npop ebp\nretn").count("callee_epilogue"));  // 13
  CHECK(macro_names("mov esp, ebp\npop ebp\nretn").count("callee_epilogue"));                    // 14
  CHECK(macro_names("pop ebp\nretn").count("callee_epilogue"));                                  // 15
  CHECK(macro_names("call _func56\nadd esp, 4").count("caller_epilogue"));                       // 16
  CHECK(macro_names("call _proc2").count("caller_epilogue"));                                    // 17
  CHECK(macro_names("mov eax, 0\nmov ebx, eax\nmov [ebp+var_8], ebx")
            .count("mov_chain([ebp+var_8], ebx, eax, 0)"));                                      // 18
  CHECK(macro_names("ja loc_D9B6B\nmov [ebp+var_10], 1\njmp loc_D9B72\nmov [ebp+var_10], 0")
            .count("bool_cast([ebp+var_10])"));                                                  // 19
  CHECK(macro_names("retn").count("callee_epilogue"));                                           // 20
}

TEST_CASE("macro spans consume their instructions exactly") {
  auto seq = parse_body("pop esi\npop edi\nmov esp, ebp\npop ebp\nretn");
  auto matches = match_sequence_macros(seq);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].start == 0);
  CHECK(matches[0].end == 5);
  // pops of non-callee-saved registers break the epilogue match
  auto seq2 = parse_body("pop ecx\npop ebp\nretn");
  auto matches2 = match_sequence_macros(seq2);
  REQUIRE(matches2.size() == 1);
  CHECK(matches2[0].start == 1);
}

TEST_CASE("instructions with nothing to abstract generalize to themselves") {
  auto names = gen_names("cwde");
  CHECK(names == std::set<std::string>{"cwde"});
}

TEST_CASE("the fully concrete form is excluded when operands are generalizable") {
  CHECK_FALSE(gen_names("sub al, 1").count("sub al, 1"));
  CHECK_FALSE(gen_names("push offset $SG25215").count("push offset $SG25215"));
  // movzx keeps its own spelling only with at least one abstracted operand
  auto names = gen_names("movzx ecx, [ebp+var_A]");
  CHECK_FALSE(names.count("movzx ecx, [ebp+var_A]"));
  CHECK(names.count("movzx ecx, [ebp+<lit>]"));
  // prose example: mov eax, 32 generalizes to both mov eax, literal and
  // mov reg, literal
  auto lit = gen_names("mov eax, 32");
  CHECK(lit.count("mov eax, <lit>"));
  CHECK(lit.count("mov <reg>, <lit>"));
  CHECK_FALSE(lit.count("mov eax, 32"));
}

TEST_CASE("size annotations survive generalization") {
  auto names = gen_names("fld dword ptr [ebp+var_8]");
  CHECK(names.count("fld dword ptr [ebp+<lit>]"));
  CHECK(names.count("fld dword ptr [<reg>]"));
}

TEST_CASE("memory operands without registers collapse to <mem>") {
  auto names = gen_names("inc byte ptr [var_counter]");
  CHECK(names.count("inc byte ptr <mem>"));
}

TEST_CASE("coverage: every generalization subsumes its source instruction") {
  Rng rng(99);
  const char* lines[] = {
      "sub al, 1",
      "mov ecx, [ebp+var_1AC8]",
      "mov cx, [ebp+eax*2+var_10]",
      "push offset $SG25215",
      "movsd xmm0, ds:__real@43e2eb565391bf9e",
      "jmp loc_22F",
      "movzx ecx, [ebp+var_A]",
      "movsx ecx, _global_var_1234",
      "mov [eax], edx",
      "fld dword ptr [ebp+var_8]",
      "lea eax, [ebx+esi*4+16]",
      "cwde",
      "call _f",
      "idiv ecx",
  };
  for (const char* line : lines) {
    Instruction instr = parse_one(line);
    for (const auto& g : generalize_instruction(instr)) {
      CAPTURE(line);
      CAPTURE(render_element(PatternElem{g}));
      CHECK(matches(g, instr));
    }
  }
}

TEST_CASE("canonical names are injective over distinct structures") {
  // collect generalizations of many instructions; equal names must mean
  // structurally equal GeneralizedInstruction values
  std::map<std::string, GeneralizedInstruction> by_name;
  const char* lines[] = {
      "mov eax, 1",  "mov eax, 2",       "mov ecx, [ebp+var_8]", "mov ecx, [ebp+var_10]",
      "movzx ecx, [ebp+var_8]", "mov cx, [ebp+eax*2+var_10]", "sub al, 1", "sub eax, 5",
      "push eax",    "push offset _g",   "fld dword ptr [ebp+var_8]",
      "fld qword ptr [ebp+var_8]", "mov [eax], edx", "mov [ecx], edx",
  };
  int collisions = 0;
  for (const char* line : lines) {
    for (const auto& g : generalize_instruction(parse_one(line))) {
      std::string name = render_element(PatternElem{g});
      auto it = by_name.find(name);
      if (it != by_name.end()) {
        if (!(it->second == g)) ++collisions;
      } else {
        by_name.emplace(name, g);
      }
    }
  }
  CHECK(collisions == 0);
}

TEST_CASE("property: random producible patterns collide only when equal") {
  // random patterns over the producible element vocabulary: lattice levels
  // of random instructions, macros with lattice-level arguments, and the
  // advanced tag set
  Rng rng(1234);
  const std::vector<std::string> instruction_pool = {
      "mov eax, 1",  "mov ax, 2",   "mov al, 3",     "mov ecx, [ebp+var_8]",
      "mov cx, [ebp+eax*2+var_10]", "movzx ecx, al", "movsx edx, al",
      "sub al, 1",   "push offset _g", "fld dword ptr [ebp+var_8]",
      "lea eax, [ebp+var_8]",       "idiv ecx",      "cwde",
      "mov [eax], edx", "movsd xmm0, ds:__real@1", "jmp loc_1",
  };
  const std::vector<std::string> tag_pool = {
      "literal_class=bool_like", "literal_class=other", "widen=zero",  "widen=sign",
      "div_present",             "lea_into_eax",        "edx_written", "struct_ret_shape",
      "fp_width=dword",          "fp_width=qword",      "result_use=reg"};

  auto random_element = [&](std::vector<PatternElem>& out) {
    switch (rng.next_below(4)) {
      case 0: {
        const auto& line = instruction_pool[static_cast<std::size_t>(
            rng.next_below(instruction_pool.size()))];
        auto forms = generalize_instruction(parse_one(line));
        out.push_back(PatternElem{forms[static_cast<std::size_t>(rng.next_below(forms.size()))]});
        break;
      }
      case 1:
        out.push_back(PatternElem{MacroElem{rng.next_bool(0.5) ? MacroKind::CalleeEpilogue
                                                               : MacroKind::CallerEpilogue,
                                            {}}});
        break;
      case 2: {
        auto matches = match_sequence_macros(
            parse_body("mov eax, 0\nmov ebx, eax\nmov [ebp+var_8], ebx"));
        out.push_back(PatternElem{matches.at(0).elem});
        break;
      }
      default:
        out.push_back(PatternElem{
            TagElem{tag_pool[static_cast<std::size_t>(rng.next_below(tag_pool.size()))]}});
        break;
    }
  };

  std::map<std::string, GeneralizedPattern> by_name;
  int collisions = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    GeneralizedPattern p;
    p.kind = rng.next_bool(0.5) ? PatternKind::Ret : PatternKind::Post;
    int n = 1 + static_cast<int>(rng.next_below(3));
    for (int e = 0; e < n; ++e) random_element(p.elements);
    std::string name = canonical_name(p);
    auto it = by_name.find(name);
    if (it != by_name.end()) {
      if (!(it->second == p)) ++collisions;
    } else {
      by_name.emplace(std::move(name), std::move(p));
    }
  }
  CHECK(collisions == 0);
}

TEST_CASE("RET chunk patterns: macros first, then prefix growth") {
  auto names = ret_pattern_names("mov eax, 7\nmov esp, ebp\npop ebp");
  CHECK(names.count("RET: callee_epilogue"));
  CHECK(names.count("RET: mov eax, <lit> | callee_epilogue"));
  CHECK(names.count("RET: mov <reg>, <lit> | callee_epilogue"));
  // the epilogue instructions never appear as standalone elements
  for (const auto& name : names) {
    CHECK(name.find("mov esp") == std::string::npos);
    CHECK(name.find("pop ebp") == std::string::npos);
  }
}

TEST_CASE("bare-return chunk yields only the epilogue pattern") {
  auto names = ret_pattern_names("");
  CHECK(names == std::set<std::string>{"RET: callee_epilogue"});
}

TEST_CASE("POST chunk patterns start with caller_epilogue") {
  extract::PostCallChunk chunk;
  chunk.callee = "_f";
  chunk.stack_adjust = parse_one("add esp, 4");
  chunk.next_instruction = parse_one("cwde");
  auto set = generalize_post_chunk(chunk);
  std::set<std::string> names;
  for (const auto& p : set.patterns) names.insert(canonical_name(p));
  CHECK(names.count("POST: caller_epilogue"));
  CHECK(names.count("POST: caller_epilogue | cwde"));

  extract::PostCallChunk no_next;
  no_next.callee = "_g";
  auto set2 = generalize_post_chunk(no_next);
  REQUIRE(set2.patterns.size() == 1);
  CHECK(canonical_name(set2.patterns[0]) == "POST: caller_epilogue");
}

TEST_CASE("interior macros participate in prefix growth") {
  // chunks like this come from anchor-mode extraction; built directly here
  extract::RetChunk chunk;
  chunk.function = "_t";
  chunk.instructions = parse_body(
      "ja L1\nmov [ebp+var_10], 1\njmp L2\nmov [ebp+var_10], 0\nmov al, byte ptr [ebp+var_10]");
  GeneralizeOptions opts;
  opts.pattern_budget = 512;
  std::set<std::string> names;
  for (const auto& p : generalize_ret_chunk(chunk, opts).patterns) {
    names.insert(canonical_name(p));
  }
  bool found = false;
  for (const auto& name : names) {
    if (name.find("bool_cast([ebp+var_10])") != std::string::npos &&
        name.find("callee_epilogue") != std::string::npos) {
      found = true;
    }
  }
  CHECK(found);
  // macro arguments are operand-generalized like instruction operands
  bool generalized_arg = false;
  for (const auto& name : names) {
    if (name.find("bool_cast([ebp+<lit>])") != std::string::npos) generalized_arg = true;
  }
  CHECK(generalized_arg);
}

TEST_CASE("pattern budget truncates deterministically, shortest first") {
  std::string body =
      "mov cx, [ebp+eax*2+var_10]\nmov cx, [ebp+eax*4+var_14]\nmov cx, [ebp+eax*8+var_18]";
  GeneralizeOptions tight;
  tight.pattern_budget = 10;
  auto tight_set = generalize_ret_chunk(chunk_of(body), tight);
  CHECK(tight_set.truncated);
  CHECK(tight_set.patterns.size() == 10);
  GeneralizeOptions loose;
  loose.pattern_budget = 100000;
  auto loose_set = generalize_ret_chunk(chunk_of(body), loose);
  CHECK_FALSE(loose_set.truncated);
  // the tight set is a prefix of the loose set (same generation order)
  for (std::size_t i = 0; i < tight_set.patterns.size(); ++i) {
    CHECK(canonical_name(tight_set.patterns[i]) == canonical_name(loose_set.patterns[i]));
  }
}

TEST_CASE("advanced RET discriminators") {
  auto tags = [](const std::string& body) {
    std::set<std::string> names;
    for (const auto& p : advanced_ret_features(chunk_of(body))) {
      names.insert(canonical_name(p));
    }
    return names;
  };
  CHECK(tags("mov al, 1").count("RET: literal_class=bool_like"));
  CHECK(tags("mov al, 0").count("RET: literal_class=bool_like"));
  CHECK(tags("mov al, 65").count("RET: literal_class=other"));
  CHECK(tags("mov eax, 42").count("RET: literal_class=other"));
  CHECK(tags("idiv ebx").count("RET: div_present"));
  CHECK(tags("div ecx").count("RET: div_present"));
  CHECK(tags("lea eax, [ebp+var_8]").count("RET: lea_into_eax"));
  CHECK_FALSE(tags("lea ecx, [ebp+var_8]").count("RET: lea_into_eax"));
  CHECK(tags("mov eax, 1\nmov edx, 2").count("RET: edx_written"));
  CHECK_FALSE(tags("cmp edx, 2").count("RET: edx_written"));
  CHECK(tags("mov eax, [ebp+arg_0]").count("RET: struct_ret_shape"));
  CHECK(tags("mov eax, [ebp+8]").count("RET: struct_ret_shape"));
  CHECK_FALSE(tags("mov eax, [ebp+var_8]").count("RET: struct_ret_shape"));
  // FP width via opcode bytes, with size hints as fallback
  CHECK(tags("fld dword ptr [ebp+var_8] ; !bytes D9 45 F8").count("RET: fp_width=dword"));
  CHECK(tags("fld qword ptr [ebp+var_8] ; !bytes DD 45 F8").count("RET: fp_width=qword"));
  CHECK(tags("fstp dword ptr [ebp+var_8]").count("RET: fp_width=dword"));
  CHECK(tags("fstp qword ptr [ebp+var_8]").count("RET: fp_width=qword"));
}

TEST_CASE("advanced POST discriminators") {
  auto tags = [](const char* next) {
    extract::PostCallChunk chunk;
    chunk.callee = "_f";
    if (next) chunk.next_instruction = parse_one(next);
    std::set<std::string> names;
    for (const auto& p : advanced_post_features(chunk)) names.insert(canonical_name(p));
    return names;
  };
  CHECK(tags("movzx edx, al").count("POST: widen=zero"));
  CHECK(tags("movsx ecx, al").count("POST: widen=sign"));
  CHECK(tags("mov ecx, eax").count("POST: result_use=reg"));
  CHECK(tags("mov [ebp+var_4], eax").count("POST: result_use=mem"));
  CHECK(tags("cwde").count("POST: result_use=reg"));
  CHECK(tags("mov ecx, 5").count("POST: result_use=none"));
  CHECK(tags(nullptr).count("POST: result_use=none"));
  CHECK(tags("fstp dword ptr [ebp+var_4] ; !bytes D9 5D FC").count("POST: fp_width=dword"));
}
