#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "retypelab/asm_core.hpp"

namespace retypelab::extract {

/// Contiguous instruction suffix ending at (and excluding) a `retn`.
struct RetChunk {
  std::string function;
  std::vector<asmx::Instruction> instructions;
  int retn_index = 0;
};

/// call + optional stack restore + the first following instruction,
/// attributed to the callee.
struct PostCallChunk {
  std::string callee;
  std::string caller;
  int call_index = 0;
  std::optional<asmx::Instruction> stack_adjust;
  std::optional<asmx::Instruction> next_instruction;
};

enum class ScanMode {
  /// Backward scan stopping at any label, unconditional jump, or another
  /// retn. For corpora without instrumentation labels.
  Window,
  /// Listings carrying __RETURN<n>__ labels: those labels are hard anchors;
  /// other control flow inside the chunk is kept.
  Anchor,
};

struct ExtractOptions {
  int max_len = 8;
  ScanMode mode = ScanMode::Window;
};

struct ChunkBundle {
  /// RET chunks keyed by the defining function.
  std::map<std::string, std::vector<RetChunk>> ret_chunks;
  /// POST CALL chunks keyed by the *callee*, gathered across all callers.
  std::map<std::string, std::vector<PostCallChunk>> post_chunks;
  /// Functions in first-seen (document) order; drives deterministic row order.
  std::vector<std::string> function_order;
  std::vector<std::string> diagnostics;
};

std::vector<RetChunk> extract_ret_chunks(const asmx::FunctionListing& fn, int max_len,
                                         ScanMode mode = ScanMode::Window);

/// The growing pattern sequences of a chunk: entry k holds the last k+1
/// instructions plus the terminating retn marker. Entry k is a strict suffix
/// of entry k+1.
std::vector<std::vector<asmx::Instruction>> prefix_patterns(const RetChunk& chunk);

std::vector<PostCallChunk> extract_post_call_chunks(
    const std::vector<asmx::FunctionListing>& functions);

/// Full extraction over a corpus; per-function work runs in parallel and is
/// merged back in document order.
ChunkBundle extract_all(const std::vector<asmx::FunctionListing>& functions,
                        const ExtractOptions& opts = {});

}  // namespace retypelab::extract
