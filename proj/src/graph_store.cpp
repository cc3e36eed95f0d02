#include "dotrag/graph_store.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace dotrag {

using json = nlohmann::json;

bool Schema::has_type(std::string_view label) const {
  return std::any_of(entity_types.begin(), entity_types.end(),
                     [&](const EntityTypeDef& t) { return t.label == label; });
}

bool Schema::accepts_type(std::string_view label) const { return label == kUnsureLabel || has_type(label); }

std::vector<std::string> Schema::labels() const {
  std::vector<std::string> out;
  out.reserve(entity_types.size());
  for (const auto& t : entity_types) out.push_back(t.label);
  return out;
}

GraphIndex GraphIndex::build(Schema schema, std::vector<Entity> entities, std::vector<Relation> relations,
                             std::vector<Chunk> chunks) {
  if (text::trim(schema.graph_description).empty()) throw SchemaError("schema: graph_description is empty");
  {
    std::set<std::string> labels;
    for (const auto& t : schema.entity_types) {
      if (t.label.empty()) throw SchemaError("schema: empty entity type label");
      if (!labels.insert(t.label).second) throw SchemaError("schema: duplicate entity type '" + t.label + "'");
    }
  }

  GraphIndex g;
  g.schema_ = std::move(schema);

  std::sort(entities.begin(), entities.end(), [](const Entity& a, const Entity& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < entities.size(); ++i) {
    auto& e = entities[i];
    if (e.id.empty()) throw ReferentialError("entity with empty id");
    if (i > 0 && entities[i - 1].id == e.id) throw ReferentialError("duplicate entity id '" + e.id + "'");
    if (!g.schema_.accepts_type(e.entity_type)) {
      throw SchemaError("entity '" + e.id + "' has type '" + e.entity_type + "' not declared in the schema");
    }
    if (text::trim(e.description).empty()) throw SchemaError("entity '" + e.id + "' has an empty description");
    if (e.embedding_id.empty()) e.embedding_id = e.id;
    g.entity_pos_.emplace(e.id, EntityIndex{static_cast<std::uint32_t>(i)});
  }
  g.entities_ = std::move(entities);

  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const auto& c = chunks[i];
    if (c.id.empty()) throw ReferentialError("chunk with empty id");
    if (!g.chunk_pos_.emplace(c.id, ChunkIndex{static_cast<std::uint32_t>(i)}).second) {
      throw ReferentialError("duplicate chunk id '" + c.id + "'");
    }
  }
  g.chunks_ = std::move(chunks);

  for (const auto& e : g.entities_) {
    for (const auto& cid : e.chunk_ids) {
      if (!g.chunk_pos_.count(cid)) {
        throw ReferentialError("entity '" + e.id + "' references unknown chunk id '" + cid + "'");
      }
    }
  }

  g.incident_.assign(g.entities_.size(), {});
  g.mentions_.assign(g.entities_.size(), {});

  std::unordered_set<std::string> relation_ids;
  for (std::size_t i = 0; i < relations.size(); ++i) {
    auto& r = relations[i];
    if (r.id.empty()) r.id = "rel-" + std::to_string(i + 1);
    if (!relation_ids.insert(r.id).second) throw ReferentialError("duplicate relation id '" + r.id + "'");
    auto s = g.find_entity(r.src);
    if (!s) throw ReferentialError("relation '" + r.id + "' references unknown entity id '" + r.src + "'");
    auto d = g.find_entity(r.dst);
    if (!d) throw ReferentialError("relation '" + r.id + "' references unknown entity id '" + r.dst + "'");
    if (*s == *d) throw ReferentialError("relation '" + r.id + "' is a self-loop on '" + r.src + "'");
    if (r.embedding_id.empty()) r.embedding_id = r.id;
    const RelationIndex ri{static_cast<std::uint32_t>(i)};
    g.endpoints_.emplace_back(*s, *d);
    g.incident_[s->value].push_back(ri);
    g.incident_[d->value].push_back(ri);
  }
  g.relations_ = std::move(relations);

  for (std::size_t i = 0; i < g.chunks_.size(); ++i) {
    const auto& c = g.chunks_[i];
    std::set<std::uint32_t> linked;
    for (const auto& eid : c.entity_ids) {
      auto e = g.find_entity(eid);
      if (!e) throw ReferentialError("chunk '" + c.id + "' references unknown entity id '" + eid + "'");
      linked.insert(e->value);
    }
    if (!c.center_id.empty()) {
      auto e = g.find_entity(c.center_id);
      if (!e) throw ReferentialError("chunk '" + c.id + "' has unknown center entity '" + c.center_id + "'");
      linked.insert(e->value);
    }
    for (auto e : linked) g.mentions_[e].push_back(ChunkIndex{static_cast<std::uint32_t>(i)});
  }
  return g;
}

std::optional<EntityIndex> GraphIndex::find_entity(std::string_view id) const {
  auto it = entity_pos_.find(std::string(id));
  if (it == entity_pos_.end()) return std::nullopt;
  return it->second;
}

EntityIndex GraphIndex::entity_index(std::string_view id) const {
  auto e = find_entity(id);
  if (!e) throw ReferentialError("unknown entity id '" + std::string(id) + "'");
  return *e;
}

std::optional<ChunkIndex> GraphIndex::find_chunk(std::string_view id) const {
  auto it = chunk_pos_.find(std::string(id));
  if (it == chunk_pos_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Record format

namespace {

std::string required_string(const json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    throw ParseError(line, std::string("missing or non-string field \"") + key + "\"");
  }
  return it->get<std::string>();
}

std::string optional_string(const json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return {};
  if (!it->is_string()) throw ParseError(line, std::string("field \"") + key + "\" must be a string");
  return it->get<std::string>();
}

std::vector<std::string> string_list(const json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return {};
  if (!it->is_array()) throw ParseError(line, std::string("field \"") + key + "\" must be an array");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw ParseError(line, std::string("field \"") + key + "\" must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::optional<Embedding> embedding_field(const json& rec, std::size_t line) {
  auto it = rec.find("embedding");
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_array() || it->empty()) throw ParseError(line, "field \"embedding\" must be a non-empty array");
  Embedding v(static_cast<Eigen::Index>(it->size()));
  Eigen::Index i = 0;
  for (const auto& x : *it) {
    if (!x.is_number()) throw ParseError(line, "field \"embedding\" must hold numbers");
    v(i++) = x.get<double>();
  }
  return v;
}

json embedding_json(const Embedding& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

GraphIndex parse_index(std::istream& in) {
  std::optional<Schema> schema;
  std::vector<Entity> entities;
  std::vector<Relation> relations;
  std::vector<Chunk> chunks;

  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (text::trim(raw).empty()) continue;
    json rec;
    try {
      rec = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw ParseError(line, std::string("malformed JSON: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(line, "record is not a JSON object");
    const std::string kind = required_string(rec, "kind", line);

    if (kind == "schema") {
      if (schema) throw ParseError(line, "more than one schema record");
      Schema s;
      s.graph_description = required_string(rec, "graph_description", line);
      auto it = rec.find("entity_types");
      if (it == rec.end() || !it->is_array()) throw ParseError(line, "schema needs an \"entity_types\" array");
      for (const auto& t : *it) {
        if (!t.is_object()) throw ParseError(line, "entity_types entries must be objects");
        s.entity_types.push_back({required_string(t, "label", line), optional_string(t, "definition", line)});
      }
      schema = std::move(s);
    } else if (kind == "entity") {
      Entity e;
      e.id = required_string(rec, "id", line);
      e.name = required_string(rec, "name", line);
      e.entity_type = required_string(rec, "entity_type", line);
      e.description = required_string(rec, "description", line);
      e.chunk_ids = string_list(rec, "chunk_ids", line);
      e.embedding_id = optional_string(rec, "embedding_id", line);
      e.aliases = string_list(rec, "aliases", line);
      e.embedding = embedding_field(rec, line);
      entities.push_back(std::move(e));
    } else if (kind == "relation") {
      Relation r;
      r.id = optional_string(rec, "id", line);
      r.src = required_string(rec, "src", line);
      r.dst = required_string(rec, "dst", line);
      r.description = required_string(rec, "description", line);
      r.keywords = string_list(rec, "keywords", line);
      r.embedding_id = optional_string(rec, "embedding_id", line);
      r.embedding = embedding_field(rec, line);
      relations.push_back(std::move(r));
    } else if (kind == "chunk") {
      Chunk c;
      c.id = required_string(rec, "id", line);
      c.text = required_string(rec, "text", line);
      c.entity_ids = string_list(rec, "entity_ids", line);
      c.center_id = optional_string(rec, "center_id", line);
      chunks.push_back(std::move(c));
    } else {
      throw ParseError(line, "unknown record kind \"" + kind + "\"");
    }
  }
  if (!schema) throw ParseError(line, "index has no schema record");
  return GraphIndex::build(std::move(*schema), std::move(entities), std::move(relations), std::move(chunks));
}

GraphIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open index file '" + path.string() + "'");
  return parse_index(in);
}

void write_index(std::ostream& out, const GraphIndex& index) {
  json schema = {{"kind", "schema"}, {"graph_description", index.schema().graph_description}};
  schema["entity_types"] = json::array();
  for (const auto& t : index.schema().entity_types) {
    schema["entity_types"].push_back({{"label", t.label}, {"definition", t.definition}});
  }
  out << schema.dump() << '\n';
  for (const auto& e : index.entities()) {
    json rec = {{"kind", "entity"},        {"id", e.id},
                {"name", e.name},          {"entity_type", e.entity_type},
                {"description", e.description}, {"chunk_ids", e.chunk_ids}};
    if (!e.aliases.empty()) rec["aliases"] = e.aliases;
    if (e.embedding_id != e.id) rec["embedding_id"] = e.embedding_id;
    if (e.embedding) rec["embedding"] = embedding_json(*e.embedding);
    out << rec.dump() << '\n';
  }
  for (const auto& r : index.relations()) {
    json rec = {{"kind", "relation"}, {"id", r.id}, {"src", r.src}, {"dst", r.dst}, {"description", r.description},
                {"keywords", r.keywords}};
    if (r.embedding_id != r.id) rec["embedding_id"] = r.embedding_id;
    if (r.embedding) rec["embedding"] = embedding_json(*r.embedding);
    out << rec.dump() << '\n';
  }
  for (const auto& c : index.chunks()) {
    json rec = {{"kind", "chunk"}, {"id", c.id}, {"text", c.text}, {"entity_ids", c.entity_ids}};
    if (!c.center_id.empty()) rec["center_id"] = c.center_id;
    out << rec.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Subgraphs

Subgraph::Subgraph(const GraphIndex& index, std::vector<EntityIndex> nodes) : index_(&index), nodes_(std::move(nodes)) {
  std::sort(nodes_.begin(), nodes_.end());
  nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());
  adjacency_.assign(nodes_.size(), {});

  std::set<std::uint32_t> seen_relations;
  for (std::uint32_t pos = 0; pos < nodes_.size(); ++pos) {
    for (RelationIndex r : index.incident(nodes_[pos])) {
      const EntityIndex other = index.source(r) == nodes_[pos] ? index.target(r) : index.source(r);
      auto other_pos = position(other);
      if (!other_pos) continue;
      adjacency_[pos].push_back(*other_pos);
      seen_relations.insert(r.value);
    }
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  relations_.reserve(seen_relations.size());
  for (auto r : seen_relations) relations_.push_back(RelationIndex{r});
}

Subgraph Subgraph::whole(const GraphIndex& index) {
  std::vector<EntityIndex> all(index.entity_count());
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = EntityIndex{i};
  return Subgraph(index, std::move(all));
}

std::optional<std::uint32_t> Subgraph::position(EntityIndex e) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), e);
  if (it == nodes_.end() || *it != e) return std::nullopt;
  return static_cast<std::uint32_t>(it - nodes_.begin());
}

std::vector<std::string> Subgraph::entity_ids() const {
  std::vector<std::string> ids;
  ids.reserve(nodes_.size());
  for (auto e : nodes_) ids.push_back(index_->entity(e).id);
  return ids;
}

std::vector<std::string> Subgraph::relation_ids() const {
  std::vector<std::string> ids;
  ids.reserve(relations_.size());
  for (auto r : relations_) ids.push_back(index_->relation(r).id);
  return ids;
}

Subgraph expand_hops(const GraphIndex& index, std::span<const EntityIndex> seeds, unsigned h_max,
                     const std::vector<std::string>& allowed_types) {
  if (seeds.empty()) throw Error("expand_hops: no seed entities");
  if (h_max == 0) throw Error("expand_hops: h_max must be >= 1");
  for (const auto& t : allowed_types) {
    if (!index.schema().accepts_type(t)) throw SchemaError("expand_hops: type '" + t + "' not in schema");
  }
  const std::set<std::string> allowed(allowed_types.begin(), allowed_types.end());

  std::vector<int> depth(index.entity_count(), -1);
  std::deque<EntityIndex> frontier;
  for (auto s : seeds) {
    if (s.value >= index.entity_count()) throw ReferentialError("expand_hops: seed out of range");
    if (depth[s.value] < 0) {
      depth[s.value] = 0;
      frontier.push_back(s);
    }
  }
  std::vector<EntityIndex> kept(frontier.begin(), frontier.end());
  while (!frontier.empty()) {
    const EntityIndex u = frontier.front();
    frontier.pop_front();
    if (depth[u.value] >= static_cast<int>(h_max)) continue;
    for (RelationIndex r : index.incident(u)) {
      const EntityIndex v = index.source(r) == u ? index.target(r) : index.source(r);
      if (depth[v.value] >= 0) continue;
      if (!allowed.empty() && !allowed.count(index.entity(v).entity_type)) continue;
      depth[v.value] = depth[u.value] + 1;
      kept.push_back(v);
      frontier.push_back(v);
    }
  }
  return Subgraph(index, std::move(kept));
}

Subgraph expand_hops(const GraphIndex& index, const std::vector<std::string>& seed_ids, unsigned h_max,
                     const std::vector<std::string>& allowed_types) {
  std::vector<EntityIndex> seeds;
  seeds.reserve(seed_ids.size());
  for (const auto& id : seed_ids) seeds.push_back(index.entity_index(id));
  return expand_hops(index, seeds, h_max, allowed_types);
}

}  // namespace dotrag
