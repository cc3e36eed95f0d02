#pragma once

#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "dotrag/pathfind.hpp"
#include "dotrag/prompts.hpp"
#include "dotrag/providers.hpp"

namespace dotrag {

/// Union with exact node-sequence dedup; first occurrence wins, so the order
/// is DOT index, then path rank.
std::vector<RelPath> aggregate_paths(const std::vector<std::vector<RelPath>>& per_dot);

/// Chunk embeddings computed on first use and kept per chunk id.
class ChunkEmbeddingCache {
 public:
  Embedding get(const Chunk& chunk, Embedder& embedder);

 private:
  std::mutex mutex_;
  std::unordered_map<std::string, Embedding> cache_;
};

struct RankedChunk {
  std::string chunk_id;
  double score = 0;
};

/// Chunks linked to any entity on `paths`, scored against `query_embedding`,
/// best `n_chunks` first; ties by chunk id.
std::vector<RankedChunk> rank_chunks(const std::vector<RelPath>& paths, const GraphIndex& index,
                                     const Embedding& query_embedding, Embedder& embedder, std::size_t n_chunks,
                                     ChunkEmbeddingCache& cache);

inline constexpr std::string_view kNoEvidenceMarker = "NO EVIDENCE RETRIEVED";

/// One final-answer call. Each chunk's text is cut to `chunk_char_budget`
/// characters in the prompt. Returns the reply verbatim.
std::string generate_answer(const std::string& query, const std::vector<RelPath>& paths,
                            const std::vector<RankedChunk>& chunks, const GraphIndex& index, LlmClient& llm,
                            const PromptLibrary& prompts, std::size_t chunk_char_budget);

}  // namespace dotrag
