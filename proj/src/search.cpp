#include "dotrag/search.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace dotrag {

using json = nlohmann::json;

void SearchParams::validate() const {
  if (candidates == 0) throw ConfigError("retrieval.candidates (K) must be >= 1");
  if (paths_per_pair == 0) throw ConfigError("retrieval.paths_per_pair (P) must be >= 1");
  if (path_cap == 0) throw ConfigError("retrieval.cap (C) must be >= 1");
  if (iterations == 0) throw ConfigError("retrieval.iterations (T_max) must be >= 1");
  if (hops == 0) throw ConfigError("retrieval.hops (h_max) must be >= 1");
}

namespace {

std::string relation_label(const Relation& r) {
  if (!text::trim(r.description).empty()) return text::trim(r.description);
  if (!r.keywords.empty()) return text::join(r.keywords, ", ");
  return "related to";
}

json id_list(const GraphIndex& index, std::span<const EntityIndex> nodes) {
  json out = json::array();
  for (EntityIndex e : nodes) out.push_back(index.entity(e).id);
  return out;
}

}  // namespace

std::string textualize_path(const GraphIndex& index, const RelPath& path) {
  if (path.nodes.empty()) return "";
  std::string out = index.entity(path.nodes.front()).name;
  for (std::size_t i = 1; i < path.nodes.size(); ++i) {
    const EntityIndex u = path.nodes[i - 1];
    const EntityIndex v = path.nodes[i];
    std::vector<const Relation*> forward, backward;
    for (RelationIndex r : index.incident(u)) {
      if (index.source(r) == u && index.target(r) == v) forward.push_back(&index.relation(r));
      if (index.source(r) == v && index.target(r) == u) backward.push_back(&index.relation(r));
    }
    auto by_id = [](const Relation* a, const Relation* b) { return a->id < b->id; };
    std::sort(forward.begin(), forward.end(), by_id);
    std::sort(backward.begin(), backward.end(), by_id);
    auto joined = [](const std::vector<const Relation*>& rs) {
      std::vector<std::string> parts;
      for (const auto* r : rs) parts.push_back(relation_label(*r));
      return text::join(parts, "; ");
    };
    std::string edge;
    if (!forward.empty()) edge += " --[" + joined(forward) + "]-->";
    if (!backward.empty()) edge += (edge.empty() ? " " : " / ") + std::string("<--[") + joined(backward) + "]--";
    if (edge.empty()) edge = " --";
    out += edge + " " + index.entity(v).name;
  }
  return out;
}

namespace {

struct Candidate {
  RelPath path;
  double score = 0;
};

class DotSearch {
 public:
  DotSearch(const DotWorkspace& dot, const std::string& query, LlmClient& llm, Embedder& embedder,
            const PromptLibrary& prompts, const SearchParams& params)
      : dot_(dot), index_(dot.index()), query_(query), llm_(llm), embedder_(embedder), prompts_(prompts),
        params_(params) {}

  SearchResult run() {
    params_.validate();
    enqueue(dot_.subject.query_text(), "concept");
    try {
      loop();
    } catch (const ProviderError& e) {
      result_.truncated = true;
      emit({{"event", "truncated"}, {"error", e.what()}});
    }
    result_.iterations = t_;
    prefix_filter(result_.accepted);
    for (const auto& p : result_.accepted) {
      if (p.nodes.empty() || !dot_.is_anchor(p.source())) {
        throw std::logic_error("search_dot: accepted path does not start at an anchor");
      }
    }
    return std::move(result_);
  }

 private:
  void loop() {
    while (t_ < params_.iterations) {
      std::optional<std::pair<std::string, std::string>> next;
      while (!pending_.empty() && !next) {
        auto q = std::move(pending_.front());
        pending_.pop_front();
        if (issued_.insert(text::normalize(q.first)).second) next = std::move(q);
      }
      if (!next) {
        stop("no_queries");
        return;
      }
      ++t_;
      issued_texts_.push_back(next->first);
      emit({{"event", "query"}, {"query", next->first}, {"origin", next->second}});

      const Embedding q = embedder_.embed(next->first);
      auto hits = dot_.local.entities.top_k(q, params_.candidates, [&](const std::string& id) {
        const EntityIndex e = index_.entity_index(id);
        return evaluated_.count(e) != 0 || dot_.is_anchor(e);
      });
      json retrieved = json::array();
      for (const auto& h : hits) retrieved.push_back({{"id", h.item_id}, {"score", h.score}});
      emit({{"event", "retrieval"}, {"candidates", retrieved}});
      if (hits.empty()) {
        stop("store_exhausted");
        return;
      }

      // Hits are already in (score desc, id asc) order, and for each
      // destination the anchors and Yen ranks are visited in order, so the
      // generated list is sorted by the pruning key.
      std::vector<Candidate> candidates;
      for (const auto& h : hits) {
        const EntityIndex v = index_.entity_index(h.item_id);
        for (EntityIndex a : dot_.anchors) {
          for (auto& p : yen_paths(dot_.subgraph, a, v, params_.paths_per_pair, params_.hops)) {
            candidates.push_back({std::move(p), h.score});
          }
        }
      }
      const std::size_t generated = candidates.size();
      json dropped = json::array();
      if (candidates.size() > params_.path_cap) {
        for (std::size_t i = params_.path_cap; i < candidates.size(); ++i) {
          dropped.push_back(path_json(candidates[i]));
        }
        candidates.resize(params_.path_cap);
      }
      json kept = json::array();
      for (const auto& c : candidates) kept.push_back(path_json(c));
      emit({{"event", "prune"}, {"generated", generated}, {"kept", kept}, {"dropped", dropped}});

      for (auto& c : candidates) c.path.text = textualize_path(index_, c.path);
      judge(candidates);

      std::vector<const RelPath*> partial;
      for (auto& c : candidates) {
        if (c.path.status == PathStatus::partial) partial.push_back(&c.path);
      }
      for (auto& c : candidates) {
        if (c.path.status == PathStatus::partial || c.path.status == PathStatus::complete) {
          result_.accepted.push_back(c.path);
        }
      }
      prefix_filter(result_.accepted);

      for (const auto& h : hits) {
        const EntityIndex v = index_.entity_index(h.item_id);
        if (evaluated_.insert(v).second) result_.evaluated.push_back(v);
      }

      if (t_ == params_.iterations) {
        stop("t_max");
        return;
      }
      const bool added = partial.empty() ? false : followups(partial);
      if (!added && !fallback()) {
        if (pending_.empty()) {
          stop("exhausted");
          return;
        }
      }
    }
    stop("t_max");
  }

  void judge(std::vector<Candidate>& candidates) {
    if (candidates.empty()) return;
    if (params_.batch_judging) {
      std::string listing;
      json payload = json::array();
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        listing += std::to_string(i + 1) + ". " + candidates[i].path.text + "\n";
        payload.push_back(id_list(index_, candidates[i].path.nodes));
      }
      const auto reply = call<VerdictResponse>(LlmRequest{
          LlmStage::path_judgment,
          prompts_.render("path_judgment_batch", {{"query", query_},
                                                  {"intermediate_rule", dot_.rules.intermediate_rule},
                                                  {"terminal_rule", dot_.rules.terminal_rule},
                                                  {"paths", listing}}),
          {{"paths", payload}}});
      for (auto& c : candidates) c.path.status = PathStatus::irrelevant;
      for (const auto& [n, status] : reply.verdicts) {
        if (n >= 1 && static_cast<std::size_t>(n) <= candidates.size()) {
          candidates[static_cast<std::size_t>(n) - 1].path.status = status;
        }
      }
      for (std::size_t i = 0; i < candidates.size(); ++i) emit_judgment(candidates[i], i);
      return;
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      auto& c = candidates[i];
      const Entity& dest = index_.entity(c.path.destination());
      const auto reply = call<VerdictResponse>(LlmRequest{
          LlmStage::path_judgment,
          prompts_.render("path_judgment", {{"query", query_},
                                            {"intermediate_rule", dot_.rules.intermediate_rule},
                                            {"terminal_rule", dot_.rules.terminal_rule},
                                            {"path_text", c.path.text},
                                            {"destination", dest.name}}),
          {{"path", id_list(index_, c.path.nodes)}, {"destination", dest.id}}});
      c.path.status = reply.verdicts.empty() ? PathStatus::irrelevant : reply.verdicts.front().second;
      emit_judgment(c, i);
    }
  }

  bool followups(const std::vector<const RelPath*>& partial) {
    std::string listing;
    for (const auto* p : partial) listing += "- " + p->text + "\n";
    const auto reply = call<FollowupResponse>(
        LlmRequest{LlmStage::followup_queries,
                   prompts_.render("followup_queries", {{"query", query_},
                                                        {"concept", dot_.subject.query_text()},
                                                        {"partial_paths", listing},
                                                        {"previous_queries", previous_queries()}}),
                   {{"query", query_}}});
    json added = json::array();
    for (const auto& q : reply.queries) {
      if (enqueue(q, "followup")) added.push_back(q);
    }
    emit({{"event", "followup"}, {"queries", reply.queries}, {"added", added}});
    return !added.empty();
  }

  bool fallback() {
    const auto reply = call<FollowupResponse>(
        LlmRequest{LlmStage::followup_queries,
                   prompts_.render("fallback_query", {{"query", query_},
                                                      {"concept", dot_.subject.query_text()},
                                                      {"previous_queries", previous_queries()}}),
                   {{"query", query_}, {"fallback", true}}});
    json added = nullptr;
    for (const auto& q : reply.queries) {
      if (enqueue(q, "fallback")) {
        added = q;
        break;
      }
    }
    emit({{"event", "fallback"}, {"query", added}});
    return !added.is_null();
  }

  template <typename T>
  T call(const LlmRequest& req) {
    ++result_.llm_calls;
    try {
      const auto done = llm_.complete(req);
      emit({{"event", "llm_call"}, {"stage", stage_name(req.stage)}, {"attempts", done.attempts}});
      return std::get<T>(done.response);
    } catch (const ProviderError&) {
      emit({{"event", "llm_call"}, {"stage", stage_name(req.stage)}, {"failed", true}});
      throw;
    }
  }

  bool enqueue(const std::string& q, const char* origin) {
    const std::string norm = text::normalize(q);
    if (norm.empty() || issued_.count(norm)) return false;
    for (const auto& p : pending_) {
      if (text::normalize(p.first) == norm) return false;
    }
    pending_.emplace_back(text::trim(q), origin);
    return true;
  }

  std::string previous_queries() const {
    std::string out;
    for (const auto& q : issued_texts_) out += "- " + q + "\n";
    return out;
  }

  json path_json(const Candidate& c) const {
    return {{"path", id_list(index_, c.path.nodes)},
            {"destination", index_.entity(c.path.destination()).id},
            {"score", c.score}};
  }

  void emit_judgment(const Candidate& c, std::size_t rank) {
    json e = path_json(c);
    e["event"] = "judgment";
    e["rank"] = rank;
    e["text"] = c.path.text;
    e["verdict"] = status_name(c.path.status);
    emit(std::move(e));
  }

  void stop(const char* reason) { emit({{"event", "stop"}, {"reason", reason}}); }

  void emit(json event) {
    event["dot"] = dot_.dot_id;
    event["iteration"] = t_;
    result_.trace.push_back(std::move(event));
  }

  const DotWorkspace& dot_;
  const GraphIndex& index_;
  const std::string& query_;
  LlmClient& llm_;
  Embedder& embedder_;
  const PromptLibrary& prompts_;
  const SearchParams& params_;

  SearchResult result_;
  std::size_t t_ = 0;
  std::deque<std::pair<std::string, std::string>> pending_;
  std::unordered_set<std::string> issued_;
  std::vector<std::string> issued_texts_;
  std::set<EntityIndex> evaluated_;
};

}  // namespace

SearchResult search_dot(const DotWorkspace& dot, const std::string& query, LlmClient& llm, Embedder& embedder,
                        const PromptLibrary& prompts, const SearchParams& params) {
  return DotSearch(dot, query, llm, embedder, prompts, params).run();
}

}  // namespace dotrag
