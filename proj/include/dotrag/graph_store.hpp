#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dotrag/common.hpp"
#include "dotrag/embedding.hpp"

namespace dotrag {

struct EntityTypeDef {
  std::string label;
  std::string definition;
};

struct Schema {
  static constexpr std::string_view kUnsureLabel = "unsure";

  std::string graph_description;
  std::vector<EntityTypeDef> entity_types;

  bool has_type(std::string_view label) const;
  /// Declared labels plus "unsure" when the schema does not declare it.
  bool accepts_type(std::string_view label) const;
  std::vector<std::string> labels() const;
};

struct Entity {
  std::string id;
  std::string name;
  std::string entity_type;
  std::string description;
  std::vector<std::string> chunk_ids;
  std::string embedding_id;
  std::vector<std::string> aliases;
  std::optional<Embedding> embedding;
};

struct Relation {
  std::string id;
  std::string src;
  std::string dst;
  std::string description;
  std::vector<std::string> keywords;
  std::string embedding_id;
  std::optional<Embedding> embedding;
};

struct Chunk {
  std::string id;
  std::string text;
  std::vector<std::string> entity_ids;
  // Entity the passage was generated around; empty for ordinary corpora.
  std::string center_id;
};

/// Immutable knowledge-graph index: entities sorted by id, relations and
/// chunks in file order, plus incidence and chunk-mention maps.
class GraphIndex {
 public:
  /// Validates every invariant; throws ParseError / ReferentialError /
  /// SchemaError on the first violation.
  static GraphIndex build(Schema schema, std::vector<Entity> entities, std::vector<Relation> relations,
                          std::vector<Chunk> chunks);

  const Schema& schema() const noexcept { return schema_; }
  std::span<const Entity> entities() const noexcept { return entities_; }
  std::span<const Relation> relations() const noexcept { return relations_; }
  std::span<const Chunk> chunks() const noexcept { return chunks_; }

  std::size_t entity_count() const noexcept { return entities_.size(); }
  std::size_t relation_count() const noexcept { return relations_.size(); }

  std::optional<EntityIndex> find_entity(std::string_view id) const;
  /// Throws ReferentialError naming the id when absent.
  EntityIndex entity_index(std::string_view id) const;
  std::optional<ChunkIndex> find_chunk(std::string_view id) const;

  const Entity& entity(EntityIndex e) const { return entities_[e.value]; }
  const Relation& relation(RelationIndex r) const { return relations_[r.value]; }
  const Chunk& chunk(ChunkIndex c) const { return chunks_[c.value]; }

  EntityIndex source(RelationIndex r) const { return endpoints_[r.value].first; }
  EntityIndex target(RelationIndex r) const { return endpoints_[r.value].second; }

  std::span<const RelationIndex> incident(EntityIndex e) const { return incident_[e.value]; }
  /// Chunks whose entity_ids (or center) include `e`, in chunk order.
  std::span<const ChunkIndex> chunks_mentioning(EntityIndex e) const { return mentions_[e.value]; }

 private:
  GraphIndex() = default;

  Schema schema_;
  std::vector<Entity> entities_;
  std::vector<Relation> relations_;
  std::vector<Chunk> chunks_;
  std::unordered_map<std::string, EntityIndex> entity_pos_;
  std::unordered_map<std::string, ChunkIndex> chunk_pos_;
  std::vector<std::pair<EntityIndex, EntityIndex>> endpoints_;
  std::vector<std::vector<RelationIndex>> incident_;
  std::vector<std::vector<ChunkIndex>> mentions_;
};

GraphIndex parse_index(std::istream& in);
GraphIndex load_index(const std::filesystem::path& path);
/// Writes the newline-delimited record format read by load_index.
void write_index(std::ostream& out, const GraphIndex& index);

/// Node-induced subgraph of a GraphIndex. Holds a non-owning pointer to the
/// index, which must outlive it. Nodes are kept sorted (hence id-ordered);
/// parallel relations collapse to a single neighbor entry.
class Subgraph {
 public:
  Subgraph(const GraphIndex& index, std::vector<EntityIndex> nodes);
  static Subgraph whole(const GraphIndex& index);

  const GraphIndex& index() const noexcept { return *index_; }
  std::span<const EntityIndex> nodes() const noexcept { return nodes_; }
  std::span<const RelationIndex> relations() const noexcept { return relations_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  bool contains(EntityIndex e) const { return position(e).has_value(); }
  std::optional<std::uint32_t> position(EntityIndex e) const;
  EntityIndex node_at(std::uint32_t pos) const { return nodes_[pos]; }
  /// Neighbor positions of the node at `pos`, ascending.
  std::span<const std::uint32_t> neighbors(std::uint32_t pos) const { return adjacency_[pos]; }

  std::vector<std::string> entity_ids() const;
  std::vector<std::string> relation_ids() const;

 private:
  const GraphIndex* index_;
  std::vector<EntityIndex> nodes_;
  std::vector<RelationIndex> relations_;
  std::vector<std::vector<std::uint32_t>> adjacency_;
};

/// Undirected BFS from `seeds` up to `h_max` edges. Non-seed nodes whose type
/// is not in `allowed_types` are never entered, so they also block paths
/// through them. Empty `allowed_types` disables the filter.
Subgraph expand_hops(const GraphIndex& index, std::span<const EntityIndex> seeds, unsigned h_max,
                     const std::vector<std::string>& allowed_types);

Subgraph expand_hops(const GraphIndex& index, const std::vector<std::string>& seed_ids, unsigned h_max,
                     const std::vector<std::string>& allowed_types);

}  // namespace dotrag
