#include "retypelab/pattern_extract.hpp"

#include <cctype>

#include "retypelab/parallel.hpp"

namespace retypelab::extract {

namespace {

bool is_return_anchor(const std::string& label) {
  // __RETURN<n>__ instrumentation labels.
  if (label.rfind("__RETURN", 0) != 0) return false;
  std::size_t i = 8;
  while (i < label.size() && std::isdigit(static_cast<unsigned char>(label[i]))) ++i;
  return label.size() - i == 2 && label[i] == '_' && label[i + 1] == '_';
}

bool is_stack_adjust(const asmx::Instruction& instr) {
  if (instr.mnemonic != "add" || instr.operands.size() != 2) return false;
  const auto* reg = std::get_if<asmx::RegOp>(&instr.operands[0].value);
  return reg && reg->reg == asmx::RegName::esp &&
         std::holds_alternative<asmx::ImmOp>(instr.operands[1].value);
}

}  // namespace

std::vector<RetChunk> extract_ret_chunks(const asmx::FunctionListing& fn, int max_len,
                                         ScanMode mode) {
  std::vector<RetChunk> chunks;
  const auto& body = fn.instructions;
  for (int i = 0; i < static_cast<int>(body.size()); ++i) {
    if (body[i].mnemonic != "retn") continue;
    RetChunk chunk;
    chunk.function = fn.name;
    chunk.retn_index = i;
    std::vector<asmx::Instruction> rev;
    for (int j = i - 1; j >= 0 && static_cast<int>(rev.size()) < max_len; --j) {
      const asmx::Instruction& instr = body[j];
      if (instr.mnemonic == "retn") break;  // never cross another return
      if (mode == ScanMode::Window) {
        if (instr.mnemonic == "jmp") break;  // no fall-through past here
        rev.push_back(instr);
        if (instr.label) break;  // jump target: include it, then stop
      } else {
        rev.push_back(instr);
        if (instr.label && is_return_anchor(*instr.label)) break;
      }
    }
    chunk.instructions.assign(rev.rbegin(), rev.rend());
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

std::vector<std::vector<asmx::Instruction>> prefix_patterns(const RetChunk& chunk) {
  std::vector<std::vector<asmx::Instruction>> out;
  asmx::Instruction retn;
  retn.mnemonic = "retn";
  int n = static_cast<int>(chunk.instructions.size());
  for (int k = 1; k <= n; ++k) {
    std::vector<asmx::Instruction> seq(chunk.instructions.end() - k, chunk.instructions.end());
    seq.push_back(retn);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<PostCallChunk> extract_post_call_chunks(
    const std::vector<asmx::FunctionListing>& functions) {
  std::vector<PostCallChunk> chunks;
  for (const auto& fn : functions) {
    const auto& body = fn.instructions;
    for (int i = 0; i < static_cast<int>(body.size()); ++i) {
      const asmx::Instruction& instr = body[i];
      if (instr.mnemonic != "call" || instr.operands.size() != 1) continue;
      const auto* target = std::get_if<asmx::CallTargetOp>(&instr.operands[0].value);
      if (!target) continue;  // indirect call: no callee to attribute to
      PostCallChunk chunk;
      chunk.callee = target->symbol;
      chunk.caller = fn.name;
      chunk.call_index = i;
      int j = i + 1;
      if (j < static_cast<int>(body.size()) && is_stack_adjust(body[j])) {
        chunk.stack_adjust = body[j];
        ++j;
      }
      if (j < static_cast<int>(body.size())) chunk.next_instruction = body[j];
      chunks.push_back(std::move(chunk));
    }
  }
  return chunks;
}

ChunkBundle extract_all(const std::vector<asmx::FunctionListing>& functions,
                        const ExtractOptions& opts) {
  ChunkBundle bundle;
  std::vector<std::vector<RetChunk>> per_fn(functions.size());
  par::parallel_for(static_cast<std::int64_t>(functions.size()), [&](std::int64_t i) {
    per_fn[static_cast<std::size_t>(i)] =
        extract_ret_chunks(functions[static_cast<std::size_t>(i)], opts.max_len, opts.mode);
  });
  for (std::size_t i = 0; i < functions.size(); ++i) {
    bundle.function_order.push_back(functions[i].name);
    if (per_fn[i].empty()) {
      bundle.diagnostics.push_back("function '" + functions[i].name + "' has no retn; no RET chunks");
    }
    bundle.ret_chunks[functions[i].name] = std::move(per_fn[i]);
  }
  for (auto& chunk : extract_post_call_chunks(functions)) {
    bundle.post_chunks[chunk.callee].push_back(std::move(chunk));
  }
  return bundle;
}

}  // namespace retypelab::extract
