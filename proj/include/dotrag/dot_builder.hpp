#pragma once

#include <string>
#include <vector>

#include "dotrag/graph_store.hpp"
#include "dotrag/prompts.hpp"
#include "dotrag/providers.hpp"
#include "dotrag/selection.hpp"
#include "dotrag/vector_index.hpp"

namespace dotrag {

struct DotRules {
  std::string intermediate_rule;
  std::string terminal_rule;
  std::vector<std::string> allowed_types;  // empty: no type filter
  std::vector<std::string> dropped_types;  // labels the LLM proposed outside the schema
};

/// One independent retrieval workspace. Only reads the index it was built from.
struct DotWorkspace {
  std::size_t dot_id = 0;
  Concept subject;
  std::vector<EntityIndex> anchors;  // ascending
  DotRules rules;
  Subgraph subgraph;
  IndexStores local;

  const GraphIndex& index() const { return subgraph.index(); }
  bool is_anchor(EntityIndex e) const;
};

/// Anchor list as "- name (type): description" lines.
std::string format_anchors(const GraphIndex& index, const std::vector<EntityIndex>& anchors);

DotRules generate_rules(const std::string& query, const Concept& subject, const std::vector<EntityIndex>& anchors,
                        const GraphIndex& index, LlmClient& llm, const PromptLibrary& prompts);

DotWorkspace build_dot(std::size_t dot_id, const std::string& query, const Concept& subject,
                       std::vector<EntityIndex> anchors, const GraphIndex& index, const IndexStores& global,
                       LlmClient& llm, const PromptLibrary& prompts, unsigned h_max);

}  // namespace dotrag
