#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dotrag/aggregate.hpp"
#include "dotrag/dot_builder.hpp"
#include "dotrag/search.hpp"
#include "dotrag/selection.hpp"

namespace dotrag {

struct EngineParams {
  GroundingParams grounding;
  SearchParams search;
  std::size_t n_chunks = 8;
  std::size_t chunk_char_budget = 1200;
  unsigned parallel = 1;  // concurrent DOT workers

  void validate() const;
};

struct DotReport {
  std::size_t dot_id = 0;
  Concept subject;
  std::vector<std::string> anchors;
  DotRules rules;
  std::size_t subgraph_nodes = 0;
  std::size_t subgraph_relations = 0;
  std::vector<RelPath> accepted;
  std::vector<std::string> evaluated;
  std::size_t iterations = 0;
  std::uint64_t llm_calls = 0;  // rule generation included
  bool truncated = false;
};

struct AnswerBundle {
  std::string query;
  std::string answer;
  std::vector<RelPath> paths;
  std::vector<RankedChunk> chunks;
  AnchorMap concepts;
  std::vector<DotReport> dots;
  std::vector<std::string> retrieved_nodes;  // entities on accepted paths, ascending
  std::uint64_t llm_calls = 0;
  std::vector<nlohmann::json> trace;

  /// Serialised bundle; the trace is written separately.
  nlohmann::json to_json(const GraphIndex& index) const;
};

/// Query pipeline over one index. Safe to call query() concurrently.
class Engine {
 public:
  Engine(const GraphIndex& index, ProviderPair providers, PromptLibrary prompts, EngineParams params);

  AnswerBundle query(const std::string& question);

  const GraphIndex& index() const noexcept { return index_; }
  const IndexStores& stores() const noexcept { return stores_; }
  const EngineParams& params() const noexcept { return params_; }

 private:
  const GraphIndex& index_;
  ProviderPair providers_;
  PromptLibrary prompts_;
  EngineParams params_;
  IndexStores stores_;
  ChunkEmbeddingCache chunk_cache_;
};

nlohmann::json path_to_json(const GraphIndex& index, const RelPath& path);

}  // namespace dotrag
