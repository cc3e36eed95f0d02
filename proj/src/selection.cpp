#include "dotrag/selection.hpp"

#include <algorithm>

namespace dotrag {

std::string_view level_name(ConceptLevel level) { return level == ConceptLevel::low ? "low" : "high"; }

std::string Concept::query_text() const { return text::trim(span + " " + gloss); }

std::string format_entity_types(const Schema& schema) {
  std::string out;
  for (const auto& t : schema.entity_types) {
    out += "- " + t.label;
    if (!t.definition.empty()) out += ": " + t.definition;
    out += "\n";
  }
  return out;
}

ConceptExtraction extract_concepts(const std::string& query, const Schema& schema, LlmClient& llm,
                                   const PromptLibrary& prompts) {
  if (text::trim(query).empty()) throw Error("extract_concepts: empty query");
  LlmRequest req{LlmStage::concept_extraction,
                 prompts.render("concept_extraction", {{"query", query},
                                                       {"graph_description", schema.graph_description},
                                                       {"entity_types", format_entity_types(schema)}}),
                 {{"query", query}}};
  const auto reply = llm.complete_as<ConceptResponse>(req);
  ConceptExtraction out;
  out.low_and_high = reply.low_and_high;
  for (const auto& c : reply.low) out.low.push_back({c.span, c.gloss, ConceptLevel::low});
  for (const auto& c : reply.high) out.high.push_back({c.span, c.gloss, ConceptLevel::high});
  return out;
}

std::vector<Concept> accepted_concepts(const ConceptExtraction& extraction, const std::string& query) {
  std::vector<Concept> out = extraction.low;
  if (extraction.low_and_high) out.insert(out.end(), extraction.high.begin(), extraction.high.end());
  if (out.empty()) out.push_back({text::trim(query), "", ConceptLevel::high});
  return out;
}

void GroundingParams::validate() const {
  if (!(tau > 0 && tau <= 1)) throw ConfigError("retrieval.tau must lie in (0, 1]");
  if (k_high == 0) throw ConfigError("retrieval.k_high must be >= 1");
  if (low_cap == 0) throw ConfigError("retrieval.low_cap must be >= 1");
}

AnchorMap ground_concepts(const std::vector<Concept>& concepts, const GraphIndex& index, const VectorStore& entities,
                          Embedder& embedder, const GroundingParams& params) {
  params.validate();
  AnchorMap out;
  out.reserve(concepts.size());
  for (const auto& c : concepts) {
    const Embedding q = embedder.embed(c.query_text());
    AnchoredConcept a{c, {}, {}};
    if (c.level == ConceptLevel::low) {
      a.hits = entities.above_threshold(q, params.tau);
      if (a.hits.size() > params.low_cap) a.hits.resize(params.low_cap);
    } else {
      a.hits = entities.top_k(q, params.k_high);
    }
    for (const auto& h : a.hits) {
      const EntityIndex e = index.entity_index(h.item_id);
      if (std::find(a.anchors.begin(), a.anchors.end(), e) == a.anchors.end()) a.anchors.push_back(e);
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace dotrag
