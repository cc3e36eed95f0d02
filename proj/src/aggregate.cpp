#include "dotrag/aggregate.hpp"

#include <algorithm>
#include <set>

namespace dotrag {

std::vector<RelPath> aggregate_paths(const std::vector<std::vector<RelPath>>& per_dot) {
  std::vector<RelPath> out;
  std::set<std::vector<EntityIndex>> seen;
  for (const auto& paths : per_dot) {
    for (const auto& p : paths) {
      if (seen.insert(p.nodes).second) out.push_back(p);
    }
  }
  return out;
}

Embedding ChunkEmbeddingCache::get(const Chunk& chunk, Embedder& embedder) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(chunk.id); it != cache_.end()) return it->second;
  }
  Embedding v = embedder.embed(chunk.text);
  std::lock_guard lock(mutex_);
  return cache_.try_emplace(chunk.id, std::move(v)).first->second;
}

std::vector<RankedChunk> rank_chunks(const std::vector<RelPath>& paths, const GraphIndex& index,
                                     const Embedding& query_embedding, Embedder& embedder, std::size_t n_chunks,
                                     ChunkEmbeddingCache& cache) {
  if (n_chunks == 0) throw Error("rank_chunks: n_chunks must be >= 1");
  std::set<ChunkIndex> linked;
  for (const auto& p : paths) {
    for (EntityIndex e : p.nodes) {
      for (ChunkIndex c : index.chunks_mentioning(e)) linked.insert(c);
    }
  }
  std::vector<RankedChunk> ranked;
  ranked.reserve(linked.size());
  for (ChunkIndex c : linked) {
    const Chunk& chunk = index.chunk(c);
    ranked.push_back({chunk.id, cosine_similarity(query_embedding, cache.get(chunk, embedder))});
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedChunk& a, const RankedChunk& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk_id < b.chunk_id;
  });
  if (ranked.size() > n_chunks) ranked.resize(n_chunks);
  return ranked;
}

std::string generate_answer(const std::string& query, const std::vector<RelPath>& paths,
                            const std::vector<RankedChunk>& chunks, const GraphIndex& index, LlmClient& llm,
                            const PromptLibrary& prompts, std::size_t chunk_char_budget) {
  std::string path_block;
  for (std::size_t i = 0; i < paths.size(); ++i) path_block += std::to_string(i + 1) + ". " + paths[i].text + "\n";
  std::string chunk_block;
  for (const auto& rc : chunks) {
    const Chunk& c = index.chunk(*index.find_chunk(rc.chunk_id));
    std::string body = c.text.size() > chunk_char_budget ? c.text.substr(0, chunk_char_budget) + "..." : c.text;
    chunk_block += "[" + c.id + "] " + body + "\n";
  }
  if (paths.empty()) path_block = std::string(kNoEvidenceMarker) + "\n";
  if (chunks.empty()) chunk_block = std::string(kNoEvidenceMarker) + "\n";
  LlmRequest req{LlmStage::final_answer,
                 prompts.render("final_answer", {{"query", query}, {"paths", path_block}, {"chunks", chunk_block}}),
                 {{"query", query}, {"paths", paths.size()}, {"chunks", chunks.size()}}};
  return llm.complete_as<TextResponse>(req).text;
}

}  // namespace dotrag
