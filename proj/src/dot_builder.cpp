#include "dotrag/dot_builder.hpp"

#include <algorithm>
#include <stdexcept>

namespace dotrag {

bool DotWorkspace::is_anchor(EntityIndex e) const { return std::binary_search(anchors.begin(), anchors.end(), e); }

std::string format_anchors(const GraphIndex& index, const std::vector<EntityIndex>& anchors) {
  std::string out;
  for (EntityIndex a : anchors) {
    const Entity& e = index.entity(a);
    out += "- " + e.name + " (" + e.entity_type + "): " + e.description + "\n";
  }
  return out;
}

DotRules generate_rules(const std::string& query, const Concept& subject, const std::vector<EntityIndex>& anchors,
                        const GraphIndex& index, LlmClient& llm, const PromptLibrary& prompts) {
  nlohmann::json anchor_ids = nlohmann::json::array();
  for (EntityIndex a : anchors) anchor_ids.push_back(index.entity(a).id);
  LlmRequest req{LlmStage::heuristic_generation,
                 prompts.render("heuristic_generation", {{"query", query},
                                                         {"concept", subject.query_text()},
                                                         {"anchors", format_anchors(index, anchors)},
                                                         {"entity_types", format_entity_types(index.schema())}}),
                 {{"query", query}, {"concept", subject.span}, {"anchors", anchor_ids}}};
  const auto reply = llm.complete_as<RulesResponse>(req);
  DotRules rules{reply.intermediate_rule, reply.terminal_rule, {}, {}};
  for (const auto& t : reply.allowed_types) {
    if (index.schema().accepts_type(t)) {
      if (std::find(rules.allowed_types.begin(), rules.allowed_types.end(), t) == rules.allowed_types.end()) {
        rules.allowed_types.push_back(t);
      }
    } else {
      rules.dropped_types.push_back(t);
    }
  }
  return rules;
}

DotWorkspace build_dot(std::size_t dot_id, const std::string& query, const Concept& subject,
                       std::vector<EntityIndex> anchors, const GraphIndex& index, const IndexStores& global,
                       LlmClient& llm, const PromptLibrary& prompts, unsigned h_max) {
  if (anchors.empty()) throw Error("build_dot: no anchors");
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
  DotRules rules = generate_rules(query, subject, anchors, index, llm, prompts);
  Subgraph sub = expand_hops(index, anchors, h_max, rules.allowed_types);
  for (EntityIndex a : anchors) {
    if (!sub.contains(a)) throw std::logic_error("build_dot: anchor missing from its subgraph");
  }
  IndexStores local = scoped_store(global, sub);
  return DotWorkspace{dot_id, subject, std::move(anchors), std::move(rules), std::move(sub), std::move(local)};
}

}  // namespace dotrag
