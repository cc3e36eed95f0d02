#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dotrag/dot_builder.hpp"
#include "dotrag/pathfind.hpp"

namespace dotrag {

struct SearchParams {
  std::size_t candidates = 5;      // K
  std::size_t paths_per_pair = 3;  // P
  std::size_t path_cap = 20;       // C
  std::size_t iterations = 3;      // T_max
  unsigned hops = 3;               // h_max, also the path length bound
  bool batch_judging = false;

  void validate() const;
  /// Upper bound on LLM calls one DOT may issue, rule generation included.
  std::uint64_t call_bound() const { return iterations * (path_cap + 2) + 1; }
};

/// Renders "A --[d1; d2]--> B <--[d3]-- C". Parallel relations contribute all
/// their descriptions, ordered by relation id.
std::string textualize_path(const GraphIndex& index, const RelPath& path);

struct SearchResult {
  std::vector<RelPath> accepted;
  std::vector<EntityIndex> evaluated;  // in evaluation order
  std::vector<nlohmann::json> trace;
  std::size_t iterations = 0;
  std::uint64_t llm_calls = 0;  // logical calls, excluding rule generation
  bool truncated = false;
};

/// Iterative retrieve / path / judge loop inside one DOT. A provider failure
/// ends the loop early with `truncated` set and the paths accepted so far.
SearchResult search_dot(const DotWorkspace& dot, const std::string& query, LlmClient& llm, Embedder& embedder,
                        const PromptLibrary& prompts, const SearchParams& params);

}  // namespace dotrag
