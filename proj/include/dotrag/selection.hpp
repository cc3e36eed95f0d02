#pragma once

#include <string>
#include <vector>

#include "dotrag/graph_store.hpp"
#include "dotrag/prompts.hpp"
#include "dotrag/providers.hpp"
#include "dotrag/vector_index.hpp"

namespace dotrag {

enum class ConceptLevel { low, high };

std::string_view level_name(ConceptLevel level);

struct Concept {
  std::string span;
  std::string gloss;
  ConceptLevel level = ConceptLevel::low;

  /// Text embedded for grounding and for the first search round.
  std::string query_text() const;
};

struct ConceptExtraction {
  std::vector<Concept> low;
  std::vector<Concept> high;
  bool low_and_high = false;
};

/// Schema type list as "- label: definition" lines.
std::string format_entity_types(const Schema& schema);

ConceptExtraction extract_concepts(const std::string& query, const Schema& schema, LlmClient& llm,
                                   const PromptLibrary& prompts);

/// Concepts that get grounded: low, plus high when the routing asked for
/// both. When that leaves nothing, the whole query becomes one high concept.
std::vector<Concept> accepted_concepts(const ConceptExtraction& extraction, const std::string& query);

struct GroundingParams {
  double tau = 0.5;
  std::size_t k_high = 10;
  std::size_t low_cap = 10;

  void validate() const;
};

struct AnchoredConcept {
  Concept subject;
  std::vector<EntityIndex> anchors;  // score order
  std::vector<ScoredHit> hits;
};

using AnchorMap = std::vector<AnchoredConcept>;

AnchorMap ground_concepts(const std::vector<Concept>& concepts, const GraphIndex& index, const VectorStore& entities,
                          Embedder& embedder, const GroundingParams& params);

}  // namespace dotrag
