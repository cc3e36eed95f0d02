#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "dotrag/graph_store.hpp"
#include "dotrag/prompts.hpp"
#include "dotrag/providers.hpp"

namespace dotrag {

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;
};

/// head<TAB>relation<TAB>tail or head|relation|tail per line; blank lines skipped.
std::vector<Triple> parse_triples(std::istream& in);
std::vector<Triple> load_triples(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Textualization

struct BracketMentions {
  std::vector<std::string> angular;  // <x> or ⟨x⟩
  std::vector<std::string> square;   // [x]
};

BracketMentions parse_brackets(std::string_view text);

struct Coverage {
  bool center_found = false;
  std::vector<std::string> missing;  // required names without a [..] mention
  bool complete() const { return center_found && missing.empty(); }
};

/// Matching is case-insensitive after whitespace normalisation.
Coverage check_coverage(std::string_view text, const std::string& center, const std::vector<std::string>& required);

struct Neighbor {
  std::string id;
  std::string name;
  std::string relation;
  bool outgoing = true;  // center -> neighbor
};

struct MarkedChunk {
  std::string center_id;
  std::string text;
  std::vector<std::string> required;  // neighbor ids
};

struct TextualizeOutcome {
  MarkedChunk chunk;  // last attempt
  bool ok = false;
  int calls = 0;
  std::vector<std::string> missing;  // names still missing when !ok
  bool center_found = false;
};

/// Generates a marked passage, re-prompting with the missing names up to
/// `max_retries` times after the first call.
TextualizeOutcome textualize_entity(const std::string& center_id, const std::string& center_name,
                                    const std::vector<Neighbor>& neighborhood, LlmClient& llm,
                                    const PromptLibrary& prompts, int max_retries);

/// Inferred type (mapped to "unsure" when outside the schema) and description.
SummaryResponse summarize_entity(const std::string& entity_name, const std::string& chunk_text,
                                 const std::string& current_type, const Schema& schema, LlmClient& llm,
                                 const PromptLibrary& prompts);

/// One description per triple (names, not ids). A count mismatch is
/// re-prompted once, then reported as a ProviderError.
std::vector<std::string> describe_relations(const std::string& entity_name, const std::string& chunk_text,
                                            const std::vector<Triple>& triples, LlmClient& llm,
                                            const PromptLibrary& prompts);

// ---------------------------------------------------------------------------
// Deduplication

/// Single-link components of the graph joining rows i, j whenever their
/// cosine similarity is >= tau. Components are listed by smallest member and
/// hold ascending row numbers; singletons included.
template <typename Derived>
std::vector<std::vector<std::size_t>> candidate_components(const Eigen::MatrixBase<Derived>& vectors,
                                                           typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  const auto n = static_cast<std::size_t>(vectors.rows());
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> unit = vectors.rowwise().normalized();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sim = unit * unit.transpose();

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= tau) {
        const auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = find(i);
    if (slot[r] == n) {
      slot[r] = out.size();
      out.emplace_back();
    }
    out[slot[r]].push_back(i);
  }
  return out;
}

struct DedupItem {
  std::string id;
  std::string name;
  std::string description;
  Embedding embedding;
};

struct MergeCluster {
  std::vector<std::string> members;  // ascending
  std::string canonical;             // smallest member id
  std::vector<std::string> aliases;  // names of the other members
};

struct DedupResult {
  std::vector<std::vector<std::string>> candidates;  // multi-member components
  std::vector<MergeCluster> clusters;                // partition of all ids
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Components at `tau` go to the curator; only confirmed groups merge. A
/// failed curator call leaves that component unmerged with a warning.
DedupResult dedup_entities(const std::vector<DedupItem>& items, double tau, LlmClient& llm,
                           const PromptLibrary& prompts, unsigned workers = 1);

/// Collapses each cluster into its canonical entity: descriptions appended,
/// aliases and chunk links kept, relations re-pointed, self-loops dropped.
GraphIndex apply_merges(const GraphIndex& index, const std::vector<MergeCluster>& clusters);

// ---------------------------------------------------------------------------
// Type relabeling

struct RelabelResult {
  std::vector<std::pair<std::string, std::string>> decisions;  // input order
  std::size_t batches = 0;
  std::size_t calls = 0;

  nlohmann::json to_json() const;
};

/// Batches of `batch_size` entities; a reply whose ids differ from the batch
/// or whose labels fall outside the schema is re-prompted up to `max_retries`
/// times, then reported as a ProviderError.
RelabelResult relabel_types(const std::vector<Entity>& entities, const Schema& schema, LlmClient& llm,
                            const PromptLibrary& prompts, std::size_t batch_size, int max_retries,
                            unsigned workers = 1);

GraphIndex apply_relabel(const GraphIndex& index, const RelabelResult& result);

// ---------------------------------------------------------------------------
// Index building

struct BuildOptions {
  int max_retries = 3;
  bool dedup = true;
  double tau_dedup = 0.60;
  unsigned workers = 1;
};

struct BuildReport {
  std::vector<nlohmann::json> failures;  // textualization / description failures
  DedupResult dedup;
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t chunks = 0;
};

/// Schema file: {"graph_description", "entity_types": [{"label", "definition"}],
/// "relation_types": {"<relation>": ["<head type>", "<tail type>"]}}.
struct PrepSchema {
  Schema schema;
  std::map<std::string, std::pair<std::string, std::string>, std::less<>> relation_types;
};

PrepSchema load_prep_schema(const std::filesystem::path& path);

/// Triples to a complete index: optional name dedup, one marked chunk per
/// entity, summaries, relation descriptions and stored embeddings.
GraphIndex build_index(const std::vector<Triple>& triples, const PrepSchema& schema, LlmClient& llm,
                       Embedder& embedder, const PromptLibrary& prompts, const BuildOptions& options,
                       BuildReport& report);

}  // namespace dotrag
