#include "dotrag/engine.hpp"

#include <set>

#include "dotrag/parallel.hpp"

namespace dotrag {

using json = nlohmann::json;

void EngineParams::validate() const {
  grounding.validate();
  search.validate();
  if (n_chunks == 0) throw ConfigError("retrieval.chunks must be >= 1");
  if (chunk_char_budget == 0) throw ConfigError("retrieval.chunk_char_budget must be >= 1");
  if (parallel == 0) throw ConfigError("parallel must be >= 1");
}

json path_to_json(const GraphIndex& index, const RelPath& path) {
  json ids = json::array();
  for (EntityIndex e : path.nodes) ids.push_back(index.entity(e).id);
  return {{"nodes", ids}, {"text", path.text}, {"status", status_name(path.status)}};
}

json AnswerBundle::to_json(const GraphIndex& index) const {
  json j;
  j["query"] = query;
  j["answer"] = answer;
  j["paths"] = json::array();
  for (const auto& p : paths) j["paths"].push_back(path_to_json(index, p));
  j["chunks"] = json::array();
  for (const auto& c : chunks) j["chunks"].push_back({{"id", c.chunk_id}, {"score", c.score}});
  j["concepts"] = json::array();
  for (const auto& c : concepts) {
    json anchors = json::array();
    for (EntityIndex a : c.anchors) anchors.push_back(index.entity(a).id);
    j["concepts"].push_back({{"span", c.subject.span},
                             {"gloss", c.subject.gloss},
                             {"level", level_name(c.subject.level)},
                             {"anchors", anchors}});
  }
  j["dots"] = json::array();
  for (const auto& d : dots) {
    json accepted = json::array();
    for (const auto& p : d.accepted) accepted.push_back(path_to_json(index, p));
    j["dots"].push_back({{"dot", d.dot_id},
                         {"concept", d.subject.span},
                         {"anchors", d.anchors},
                         {"intermediate_rule", d.rules.intermediate_rule},
                         {"terminal_rule", d.rules.terminal_rule},
                         {"allowed_types", d.rules.allowed_types},
                         {"dropped_types", d.rules.dropped_types},
                         {"subgraph_nodes", d.subgraph_nodes},
                         {"subgraph_relations", d.subgraph_relations},
                         {"accepted", accepted},
                         {"evaluated", d.evaluated},
                         {"iterations", d.iterations},
                         {"llm_calls", d.llm_calls},
                         {"truncated", d.truncated}});
  }
  j["retrieved_nodes"] = retrieved_nodes;
  j["llm_calls"] = llm_calls;
  return j;
}

Engine::Engine(const GraphIndex& index, ProviderPair providers, PromptLibrary prompts, EngineParams params)
    : index_(index), providers_(std::move(providers)), prompts_(std::move(prompts)), params_(params) {
  params_.validate();
  if (!providers_.llm || !providers_.embedder) throw ConfigError("engine: missing provider");
  stores_ = build_global_stores(index_, *providers_.embedder);
}

AnswerBundle Engine::query(const std::string& question) {
  AnswerBundle bundle;
  bundle.query = question;
  LlmClient& llm = *providers_.llm;
  Embedder& embedder = *providers_.embedder;

  const auto extraction = extract_concepts(question, index_.schema(), llm, prompts_);
  bundle.llm_calls += 1;
  const auto concepts = accepted_concepts(extraction, question);
  {
    json e = {{"event", "concepts"},
              {"mode", extraction.low_and_high ? "low_and_high" : "low_only"},
              {"fallback", extraction.low.empty() && (!extraction.low_and_high || extraction.high.empty())}};
    e["accepted"] = json::array();
    for (const auto& c : concepts) e["accepted"].push_back({{"span", c.span}, {"level", level_name(c.level)}});
    bundle.trace.push_back(std::move(e));
  }
  bundle.concepts = ground_concepts(concepts, index_, stores_.entities, embedder, params_.grounding);

  std::vector<std::size_t> grounded;
  for (std::size_t i = 0; i < bundle.concepts.size(); ++i) {
    const auto& c = bundle.concepts[i];
    json hits = json::array();
    for (const auto& h : c.hits) hits.push_back({{"id", h.item_id}, {"score", h.score}});
    bundle.trace.push_back({{"event", "grounding"},
                            {"concept", c.subject.span},
                            {"level", level_name(c.subject.level)},
                            {"hits", hits},
                            {"dot", c.anchors.empty() ? json(nullptr) : json(grounded.size())}});
    if (!c.anchors.empty()) grounded.push_back(i);
  }

  struct DotOutcome {
    DotReport report;
    std::vector<json> trace;
  };
  auto outcomes = parallel_map(grounded.size(), params_.parallel, [&](std::size_t d) {
    const auto& ac = bundle.concepts[grounded[d]];
    DotOutcome out;
    out.report.dot_id = d;
    out.report.subject = ac.subject;
    try {
      const DotWorkspace dot = build_dot(d, question, ac.subject, ac.anchors, index_, stores_, llm, prompts_,
                                         params_.search.hops);
      out.report.llm_calls = 1;
      for (EntityIndex a : dot.anchors) out.report.anchors.push_back(index_.entity(a).id);
      out.report.rules = dot.rules;
      out.report.subgraph_nodes = dot.subgraph.size();
      out.report.subgraph_relations = dot.subgraph.relations().size();
      json built = {{"event", "dot"},
                    {"dot", d},
                    {"anchors", out.report.anchors},
                    {"allowed_types", dot.rules.allowed_types},
                    {"subgraph_nodes", out.report.subgraph_nodes}};
      if (!dot.rules.dropped_types.empty()) built["dropped_types"] = dot.rules.dropped_types;
      out.trace.push_back(std::move(built));

      SearchResult r = search_dot(dot, question, llm, embedder, prompts_, params_.search);
      out.report.accepted = std::move(r.accepted);
      for (EntityIndex e : r.evaluated) out.report.evaluated.push_back(index_.entity(e).id);
      out.report.iterations = r.iterations;
      out.report.llm_calls += r.llm_calls;
      out.report.truncated = r.truncated;
      for (auto& e : r.trace) out.trace.push_back(std::move(e));
    } catch (const ProviderError& e) {
      out.report.llm_calls = std::max<std::uint64_t>(out.report.llm_calls, 1);
      out.report.truncated = true;
      out.trace.push_back({{"event", "truncated"}, {"dot", d}, {"iteration", 0}, {"error", e.what()}});
    }
    return out;
  });

  std::vector<std::vector<RelPath>> per_dot;
  for (auto& o : outcomes) {
    per_dot.push_back(o.report.accepted);
    bundle.llm_calls += o.report.llm_calls;
    for (auto& e : o.trace) bundle.trace.push_back(std::move(e));
    bundle.dots.push_back(std::move(o.report));
  }
  bundle.paths = aggregate_paths(per_dot);

  std::set<std::string> nodes;
  for (const auto& p : bundle.paths) {
    for (EntityIndex e : p.nodes) nodes.insert(index_.entity(e).id);
  }
  bundle.retrieved_nodes.assign(nodes.begin(), nodes.end());

  if (!bundle.paths.empty()) {
    const Embedding q = embedder.embed(question);
    bundle.chunks = rank_chunks(bundle.paths, index_, q, embedder, params_.n_chunks, chunk_cache_);
  }
  bundle.answer =
      generate_answer(question, bundle.paths, bundle.chunks, index_, llm, prompts_, params_.chunk_char_budget);
  bundle.llm_calls += 1;
  bundle.trace.push_back({{"event", "answer"}, {"paths", bundle.paths.size()}, {"chunks", bundle.chunks.size()}});
  return bundle;
}

}  // namespace dotrag
