#include "dotrag/corpus_prep.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>
#include <unordered_map>

#include "dotrag/parallel.hpp"
#include "dotrag/selection.hpp"
#include "dotrag/vector_index.hpp"

namespace dotrag {

using json = nlohmann::json;

std::vector<Triple> parse_triples(std::istream& in) {
  std::vector<Triple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const char sep = line.find('\t') != std::string::npos ? '\t' : '|';
    auto parts = text::split(line, sep);
    if (parts.size() != 3) throw ParseError(lineno, "expected head, relation and tail");
    Triple t{text::trim(parts[0]), text::trim(parts[1]), text::trim(parts[2])};
    if (t.head.empty() || t.relation.empty() || t.tail.empty()) throw ParseError(lineno, "empty triple field");
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Triple> load_triples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open triple file '" + path.string() + "'");
  return parse_triples(in);
}

// ---------------------------------------------------------------------------
// Textualization

namespace {

constexpr std::string_view kAngleOpen = "\xE2\x9F\xA8";   // ⟨
constexpr std::string_view kAngleClose = "\xE2\x9F\xA9";  // ⟩

std::string words(std::string_view relation) {
  std::string out(relation);
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

}  // namespace

BracketMentions parse_brackets(std::string_view s) {
  BracketMentions out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::string_view close;
    std::size_t body = 0;
    std::vector<std::string>* sink = nullptr;
    if (s[i] == '<') {
      close = ">", body = i + 1, sink = &out.angular;
    } else if (s.substr(i, kAngleOpen.size()) == kAngleOpen) {
      close = kAngleClose, body = i + kAngleOpen.size(), sink = &out.angular;
    } else if (s[i] == '[') {
      close = "]", body = i + 1, sink = &out.square;
    }
    if (!sink) {
      ++i;
      continue;
    }
    const auto end = s.find(close, body);
    if (end == std::string_view::npos) {
      ++i;
      continue;
    }
    sink->push_back(std::string(s.substr(body, end - body)));
    i = end + close.size();
  }
  return out;
}

Coverage check_coverage(std::string_view text, const std::string& center, const std::vector<std::string>& required) {
  const auto found = parse_brackets(text);
  std::set<std::string> angular, square;
  for (const auto& a : found.angular) angular.insert(text::normalize(a));
  for (const auto& q : found.square) square.insert(text::normalize(q));
  Coverage c;
  c.center_found = angular.count(text::normalize(center)) != 0;
  std::set<std::string> seen;
  for (const auto& r : required) {
    const auto key = text::normalize(r);
    if (!square.count(key) && seen.insert(key).second) c.missing.push_back(r);
  }
  return c;
}

TextualizeOutcome textualize_entity(const std::string& center_id, const std::string& center_name,
                                    const std::vector<Neighbor>& neighborhood, LlmClient& llm,
                                    const PromptLibrary& prompts, int max_retries) {
  if (neighborhood.empty()) throw Error("textualize_entity: empty neighborhood for '" + center_id + "'");
  std::string facts;
  json neighbors = json::array();
  std::vector<std::string> names;
  std::vector<std::string> ids;
  for (const auto& n : neighborhood) {
    facts += n.outgoing ? "- " + center_name + " " + words(n.relation) + " " + n.name + "\n"
                        : "- " + n.name + " " + words(n.relation) + " " + center_name + "\n";
    neighbors.push_back({{"name", n.name}, {"relation", n.relation}, {"direction", n.outgoing ? "out" : "in"}});
    if (std::find(ids.begin(), ids.end(), n.id) == ids.end()) {
      ids.push_back(n.id);
      names.push_back(n.name);
    }
  }
  TextualizeOutcome out;
  out.chunk.center_id = center_id;
  out.chunk.required = ids;
  std::string note;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    LlmRequest req{LlmStage::textualize_chunk,
                   prompts.render("textualize_chunk",
                                  {{"center", center_name}, {"neighborhood", facts}, {"missing_note", note}}),
                   {{"center", center_name}, {"neighbors", neighbors}, {"attempt", attempt + 1}}};
    out.chunk.text = llm.complete_as<TextResponse>(req).text;
    ++out.calls;
    const Coverage c = check_coverage(out.chunk.text, center_name, names);
    out.center_found = c.center_found;
    out.missing = c.missing;
    if (c.complete()) {
      out.ok = true;
      return out;
    }
    std::string listing = c.missing.empty() ? "" : text::join(c.missing, ", ");
    note = "Your previous passage was incomplete.";
    if (!c.center_found) note += " The central entity <" + center_name + "> was not marked.";
    if (!listing.empty()) note += " These entities were missing from square brackets: " + listing + ".";
    note += "\n";
  }
  return out;
}

SummaryResponse summarize_entity(const std::string& entity_name, const std::string& chunk_text,
                                 const std::string& current_type, const Schema& schema, LlmClient& llm,
                                 const PromptLibrary& prompts) {
  LlmRequest req{LlmStage::entity_summary,
                 prompts.render("entity_summary", {{"entity", entity_name},
                                                   {"chunk", chunk_text},
                                                   {"entity_types", format_entity_types(schema)}}),
                 {{"entity", entity_name},
                  {"chunk", chunk_text},
                  {"current_type", current_type},
                  {"labels", schema.labels()}}};
  auto r = llm.complete_as<SummaryResponse>(req);
  if (!schema.accepts_type(r.entity_type)) r.entity_type = std::string(Schema::kUnsureLabel);
  return r;
}

std::vector<std::string> describe_relations(const std::string& entity_name, const std::string& chunk_text,
                                            const std::vector<Triple>& triples, LlmClient& llm,
                                            const PromptLibrary& prompts) {
  std::string listing;
  json payload = json::array();
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const auto& t = triples[i];
    listing += std::to_string(i + 1) + ". (" + t.head + ", " + t.relation + ", " + t.tail + ")\n";
    payload.push_back({{"head", t.head}, {"relation", t.relation}, {"tail", t.tail}});
  }
  LlmRequest req{LlmStage::relation_describe,
                 prompts.render("relation_describe",
                                {{"entity", entity_name}, {"chunk", chunk_text}, {"triples", listing}}),
                 {{"entity", entity_name}, {"triples", payload}}};
  std::size_t got = 0;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto r = llm.complete_as<RelationDescriptions>(req);
    if (r.descriptions.size() == triples.size()) return std::move(r.descriptions);
    got = r.descriptions.size();
  }
  throw ProviderError("relation descriptions for '" + entity_name + "': expected " + std::to_string(triples.size()) +
                      ", got " + std::to_string(got));
}

// ---------------------------------------------------------------------------
// Deduplication

json DedupResult::to_json() const {
  json j;
  j["candidates"] = candidates;
  j["clusters"] = json::array();
  for (const auto& c : clusters) {
    j["clusters"].push_back({{"members", c.members}, {"canonical", c.canonical}, {"aliases", c.aliases}});
  }
  j["warnings"] = warnings;
  return j;
}

DedupResult dedup_entities(const std::vector<DedupItem>& items, double tau, LlmClient& llm,
                           const PromptLibrary& prompts, unsigned workers) {
  if (!(tau > 0 && tau <= 1)) throw ConfigError("prep.tau_dedup must lie in (0, 1]");
  DedupResult out;
  if (items.empty()) return out;
  const Eigen::Index dim = items.front().embedding.size();
  Eigen::MatrixXd vectors(static_cast<Eigen::Index>(items.size()), dim);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& v = items[i].embedding;
    if (v.size() != dim) throw DimensionError("dedup: embedding of '" + items[i].id + "' has the wrong dimension");
    if (!(v.norm() > 0)) throw Error("dedup: zero embedding for '" + items[i].id + "'");
    vectors.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  const auto components = candidate_components(vectors, tau);

  std::vector<std::vector<std::size_t>> multi;
  for (const auto& c : components) {
    if (c.size() > 1) multi.push_back(c);
  }
  struct Confirmed {
    std::vector<std::vector<std::string>> groups;
    std::vector<std::string> warnings;
  };
  auto confirmed = parallel_map(multi.size(), workers, [&](std::size_t k) {
    Confirmed res;
    const auto& comp = multi[k];
    std::set<std::string> members;
    std::string listing;
    json ids = json::array();
    for (auto i : comp) {
      members.insert(items[i].id);
      listing += "- " + items[i].id + " | " + items[i].name;
      if (!items[i].description.empty()) listing += " | " + items[i].description;
      listing += "\n";
      ids.push_back(items[i].id);
    }
    try {
      LlmRequest req{LlmStage::merge_confirm, prompts.render("merge_confirm", {{"members", listing}}),
                     {{"members", ids}}};
      const auto reply = llm.complete_as<MergeResponse>(req);
      std::set<std::string> used;
      for (const auto& g : reply.groups) {
        std::vector<std::string> group;
        for (const auto& id : g) {
          if (!members.count(id)) {
            res.warnings.push_back("curator named '" + id + "' outside its candidate component");
          } else if (!used.insert(id).second) {
            res.warnings.push_back("curator placed '" + id + "' in two groups");
          } else {
            group.push_back(id);
          }
        }
        std::sort(group.begin(), group.end());
        if (group.size() > 1) res.groups.push_back(std::move(group));
      }
    } catch (const ProviderError& e) {
      res.warnings.push_back(std::string("component left unmerged: ") + e.what());
    }
    return res;
  });

  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < items.size(); ++i) by_id.emplace(items[i].id, i);
  std::set<std::string> merged;
  for (std::size_t k = 0; k < multi.size(); ++k) {
    std::vector<std::string> ids;
    for (auto i : multi[k]) ids.push_back(items[i].id);
    std::sort(ids.begin(), ids.end());
    out.candidates.push_back(ids);
    for (auto& w : confirmed[k].warnings) out.warnings.push_back(std::move(w));
    for (auto& g : confirmed[k].groups) {
      MergeCluster c{g, g.front(), {}};
      for (std::size_t m = 1; m < g.size(); ++m) {
        const auto& name = items[by_id.at(g[m])].name;
        if (std::find(c.aliases.begin(), c.aliases.end(), name) == c.aliases.end()) c.aliases.push_back(name);
        merged.insert(g[m]);
      }
      merged.insert(g.front());
      out.clusters.push_back(std::move(c));
    }
  }
  for (const auto& item : items) {
    if (!merged.count(item.id)) out.clusters.push_back({{item.id}, item.id, {}});
  }
  std::sort(out.clusters.begin(), out.clusters.end(),
            [](const MergeCluster& a, const MergeCluster& b) { return a.canonical < b.canonical; });
  return out;
}

GraphIndex apply_merges(const GraphIndex& index, const std::vector<MergeCluster>& clusters) {
  std::unordered_map<std::string, std::string> canonical;
  for (const auto& c : clusters) {
    for (const auto& m : c.members) canonical[m] = c.canonical;
  }
  auto map_id = [&](const std::string& id) {
    auto it = canonical.find(id);
    return it == canonical.end() ? id : it->second;
  };

  std::vector<Entity> entities;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& e : index.entities()) {  // ascending id, so canonicals come first in each cluster
    const std::string target = map_id(e.id);
    if (target == e.id) {
      slot[e.id] = entities.size();
      entities.push_back(e);
    }
  }
  for (const auto& e : index.entities()) {
    const std::string target = map_id(e.id);
    if (target == e.id) continue;
    auto it = slot.find(target);
    if (it == slot.end()) throw ReferentialError("merge: canonical '" + target + "' not in the index");
    Entity& c = entities[it->second];
    c.description += " " + e.description;
    for (const auto& name : std::vector<std::string>{e.name}) {
      if (name != c.name && std::find(c.aliases.begin(), c.aliases.end(), name) == c.aliases.end()) {
        c.aliases.push_back(name);
      }
    }
    for (const auto& a : e.aliases) {
      if (std::find(c.aliases.begin(), c.aliases.end(), a) == c.aliases.end()) c.aliases.push_back(a);
    }
    for (const auto& ch : e.chunk_ids) {
      if (std::find(c.chunk_ids.begin(), c.chunk_ids.end(), ch) == c.chunk_ids.end()) c.chunk_ids.push_back(ch);
    }
    c.embedding.reset();
  }

  std::vector<Relation> relations;
  for (const auto& r : index.relations()) {
    Relation copy = r;
    copy.src = map_id(r.src);
    copy.dst = map_id(r.dst);
    if (copy.src == copy.dst) continue;
    relations.push_back(std::move(copy));
  }
  std::vector<Chunk> chunks;
  for (const auto& ch : index.chunks()) {
    Chunk copy = ch;
    copy.entity_ids.clear();
    for (const auto& id : ch.entity_ids) {
      const auto m = map_id(id);
      if (std::find(copy.entity_ids.begin(), copy.entity_ids.end(), m) == copy.entity_ids.end()) {
        copy.entity_ids.push_back(m);
      }
    }
    if (!copy.center_id.empty()) copy.center_id = map_id(copy.center_id);
    chunks.push_back(std::move(copy));
  }
  return GraphIndex::build(index.schema(), std::move(entities), std::move(relations), std::move(chunks));
}

// ---------------------------------------------------------------------------
// Type relabeling

json RelabelResult::to_json() const {
  json j;
  j["batches"] = batches;
  j["calls"] = calls;
  j["decisions"] = json::array();
  for (const auto& [id, label] : decisions) j["decisions"].push_back({{"id", id}, {"label", label}});
  return j;
}

RelabelResult relabel_types(const std::vector<Entity>& entities, const Schema& schema, LlmClient& llm,
                            const PromptLibrary& prompts, std::size_t batch_size, int max_retries,
                            unsigned workers) {
  if (batch_size == 0) throw ConfigError("prep.batch_size must be >= 1");
  const std::size_t batches = (entities.size() + batch_size - 1) / batch_size;
  struct BatchOut {
    std::vector<std::pair<std::string, std::string>> decisions;
    std::size_t calls = 0;
  };
  auto results = parallel_map(batches, workers, [&](std::size_t b) {
    const std::size_t begin = b * batch_size;
    const std::size_t end = std::min(entities.size(), begin + batch_size);
    std::string listing;
    json payload = json::array();
    std::set<std::string> expected;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& e = entities[i];
      listing += e.id + " | " + e.name + " | " + e.description + "\n";
      payload.push_back({{"id", e.id}, {"current_type", e.entity_type}});
      expected.insert(e.id);
    }
    LlmRequest req{LlmStage::type_relabel,
                   prompts.render("type_relabel", {{"entity_types", format_entity_types(schema)}, {"entities", listing}}),
                   {{"entities", payload}, {"labels", schema.labels()}}};
    BatchOut out;
    std::string problem;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
      ++out.calls;
      const auto reply = llm.complete_as<RelabelResponse>(req);
      std::map<std::string, std::string> got;
      problem.clear();
      for (const auto& [id, label] : reply.decisions) {
        if (!expected.count(id)) {
          problem = "unexpected id '" + id + "'";
        } else if (!got.emplace(id, label).second) {
          problem = "duplicate id '" + id + "'";
        } else if (!schema.accepts_type(label)) {
          problem = "label '" + label + "' not in schema";
        }
        if (!problem.empty()) break;
      }
      if (problem.empty() && got.size() != expected.size()) problem = "missing ids";
      if (problem.empty()) {
        for (std::size_t i = begin; i < end; ++i) out.decisions.emplace_back(entities[i].id, got.at(entities[i].id));
        return out;
      }
    }
    throw ProviderError("relabel batch " + std::to_string(b + 1) + ": " + problem + " after " +
                        std::to_string(out.calls) + " calls");
  });
  RelabelResult r;
  r.batches = batches;
  for (auto& b : results) {
    r.calls += b.calls;
    for (auto& d : b.decisions) r.decisions.push_back(std::move(d));
  }
  return r;
}

GraphIndex apply_relabel(const GraphIndex& index, const RelabelResult& result) {
  std::unordered_map<std::string, std::string> label(result.decisions.begin(), result.decisions.end());
  std::vector<Entity> entities(index.entities().begin(), index.entities().end());
  for (auto& e : entities) {
    if (auto it = label.find(e.id); it != label.end()) e.entity_type = it->second;
  }
  return GraphIndex::build(index.schema(), std::move(entities),
                           std::vector<Relation>(index.relations().begin(), index.relations().end()),
                           std::vector<Chunk>(index.chunks().begin(), index.chunks().end()));
}

// ---------------------------------------------------------------------------
// Index building

PrepSchema load_prep_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file '" + path.string() + "'");
  PrepSchema out;
  try {
    const json j = json::parse(in);
    out.schema.graph_description = j.at("graph_description").get<std::string>();
    for (const auto& t : j.at("entity_types")) {
      out.schema.entity_types.push_back({t.at("label").get<std::string>(), t.value("definition", "")});
    }
    if (auto it = j.find("relation_types"); it != j.end()) {
      for (const auto& [rel, types] : it->items()) {
        out.relation_types[rel] = {types.at(0).get<std::string>(), types.at(1).get<std::string>()};
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("schema file '" + path.string() + "': " + e.what());
  }
  if (text::trim(out.schema.graph_description).empty()) throw SchemaError("schema: empty graph_description");
  return out;
}

GraphIndex build_index(const std::vector<Triple>& input, const PrepSchema& prep, LlmClient& llm, Embedder& embedder,
                       const PromptLibrary& prompts, const BuildOptions& options, BuildReport& report) {
  const Schema& schema = prep.schema;
  std::vector<Triple> triples;
  for (const auto& t : input) {
    if (t.head == t.tail) {
      report.failures.push_back({{"stage", "triples"}, {"entity", t.head}, {"error", "self-loop dropped"}});
    } else {
      triples.push_back(t);
    }
  }

  std::set<std::string> names;
  for (const auto& t : triples) {
    names.insert(t.head);
    names.insert(t.tail);
  }

  std::map<std::string, std::vector<std::string>> aliases;
  if (options.dedup && names.size() > 1) {
    std::vector<DedupItem> items;
    for (const auto& n : names) items.push_back({n, n, "", embedder.embed(n)});
    report.dedup = dedup_entities(items, options.tau_dedup, llm, prompts, options.workers);
    std::map<std::string, std::string> canonical;
    for (const auto& c : report.dedup.clusters) {
      for (const auto& m : c.members) canonical[m] = c.canonical;
      if (!c.aliases.empty()) aliases[c.canonical] = c.aliases;
    }
    std::vector<Triple> mapped;
    for (auto t : triples) {
      t.head = canonical.at(t.head);
      t.tail = canonical.at(t.tail);
      if (t.head != t.tail) mapped.push_back(std::move(t));
    }
    triples = std::move(mapped);
    names.clear();
    for (const auto& c : report.dedup.clusters) names.insert(c.canonical);
  }
  const std::vector<std::string> ids(names.begin(), names.end());

  std::map<std::string, std::vector<Neighbor>> hood;
  std::map<std::string, std::vector<std::size_t>> outgoing;
  std::map<std::string, std::string> hinted;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const auto& t = triples[i];
    hood[t.head].push_back({t.tail, t.tail, t.relation, true});
    hood[t.tail].push_back({t.head, t.head, t.relation, false});
    outgoing[t.head].push_back(i);
    if (auto it = prep.relation_types.find(t.relation); it != prep.relation_types.end()) {
      hinted.emplace(t.head, it->second.first);
      hinted.emplace(t.tail, it->second.second);
    }
  }

  struct EntityWork {
    TextualizeOutcome chunk;
    SummaryResponse summary;
    std::vector<std::string> descriptions;
    std::vector<json> failures;
  };
  auto work = parallel_map(ids.size(), options.workers, [&](std::size_t k) {
    const std::string& id = ids[k];
    EntityWork w;
    const auto& nbrs = hood[id];
    if (nbrs.empty()) {
      w.chunk.chunk = {id, "<" + id + ">", {}};
      w.chunk.ok = true;
    } else {
      w.chunk = textualize_entity(id, id, nbrs, llm, prompts, options.max_retries);
      if (!w.chunk.ok) {
        w.failures.push_back({{"stage", "textualize"},
                              {"entity", id},
                              {"calls", w.chunk.calls},
                              {"center_found", w.chunk.center_found},
                              {"missing", w.chunk.missing}});
      }
    }
    const std::string hint = hinted.count(id) ? hinted.at(id) : std::string(Schema::kUnsureLabel);
    w.summary = summarize_entity(id, w.chunk.chunk.text, hint, schema, llm, prompts);
    if (text::trim(w.summary.description).empty()) w.summary.description = id;

    std::vector<Triple> own;
    for (auto i : outgoing[id]) own.push_back(triples[i]);
    if (!own.empty()) {
      try {
        w.descriptions = describe_relations(id, w.chunk.chunk.text, own, llm, prompts);
      } catch (const ProviderError& e) {
        w.failures.push_back({{"stage", "relation_describe"}, {"entity", id}, {"error", e.what()}});
        w.descriptions.clear();
        for (const auto& t : own) w.descriptions.push_back(t.head + " " + words(t.relation) + " " + t.tail + ".");
      }
    }
    return w;
  });

  std::vector<Entity> entities;
  std::vector<Chunk> chunks;
  std::vector<std::string> relation_desc(triples.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const std::string& id = ids[k];
    auto& w = work[k];
    for (auto& f : w.failures) report.failures.push_back(std::move(f));

    Chunk chunk;
    chunk.id = "chunk:" + id;
    chunk.text = w.chunk.chunk.text;
    chunk.center_id = id;
    chunk.entity_ids.push_back(id);
    std::set<std::string> missing(w.chunk.missing.begin(), w.chunk.missing.end());
    for (const auto& n : w.chunk.chunk.required) {
      if (!missing.count(n) && std::find(chunk.entity_ids.begin(), chunk.entity_ids.end(), n) == chunk.entity_ids.end()) {
        chunk.entity_ids.push_back(n);
      }
    }
    chunks.push_back(std::move(chunk));

    Entity e;
    e.id = id;
    e.name = id;
    e.entity_type = w.summary.entity_type;
    e.description = w.summary.description;
    e.chunk_ids = {"chunk:" + id};
    e.embedding_id = id;
    if (auto it = aliases.find(id); it != aliases.end()) e.aliases = it->second;
    e.embedding = embedder.embed(entity_embedding_text(e));
    entities.push_back(std::move(e));

    const auto& own = outgoing[id];
    for (std::size_t j = 0; j < own.size(); ++j) relation_desc[own[j]] = w.descriptions[j];
  }

  std::vector<Relation> relations;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    Relation r;
    r.id = "rel-" + std::to_string(i);
    r.src = triples[i].head;
    r.dst = triples[i].tail;
    r.description = relation_desc[i];
    r.keywords = {triples[i].relation};
    r.embedding_id = r.id;
    r.embedding = embedder.embed(relation_embedding_text(r));
    relations.push_back(std::move(r));
  }
  report.entities = entities.size();
  report.relations = relations.size();
  report.chunks = chunks.size();
  return GraphIndex::build(schema, std::move(entities), std::move(relations), std::move(chunks));
}

}  // namespace dotrag
