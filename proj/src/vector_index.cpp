#include "dotrag/vector_index.hpp"

#include "dotrag/providers.hpp"

namespace dotrag {

std::string entity_embedding_text(const Entity& entity) { return entity.name + " " + entity.description; }

std::string relation_embedding_text(const Relation& relation) {
  std::string out = relation.description;
  if (!relation.keywords.empty()) out += " " + text::join(relation.keywords, " ");
  if (text::trim(out).empty()) out = relation.src + " " + relation.dst;
  return out;
}

namespace {

Embedding checked(const std::string& id, Embedding v, Eigen::Index dim) {
  if (v.size() != dim) {
    throw DimensionError("embedding for '" + id + "' has dimension " + std::to_string(v.size()) + ", expected " +
                         std::to_string(dim));
  }
  return v;
}

}  // namespace

IndexStores build_global_stores(const GraphIndex& index, Embedder& embedder) {
  const Eigen::Index dim = embedder.dim();
  std::vector<VectorStore::Item> entities;
  entities.reserve(index.entity_count());
  for (const auto& e : index.entities()) {
    Embedding v = e.embedding ? *e.embedding : embedder.embed(entity_embedding_text(e));
    entities.push_back({e.id, checked(e.id, std::move(v), dim)});
  }
  std::vector<VectorStore::Item> relations;
  relations.reserve(index.relation_count());
  for (const auto& r : index.relations()) {
    Embedding v = r.embedding ? *r.embedding : embedder.embed(relation_embedding_text(r));
    relations.push_back({r.id, checked(r.id, std::move(v), dim)});
  }
  return {VectorStore(dim, std::move(entities)), VectorStore(dim, std::move(relations))};
}

IndexStores scoped_store(const IndexStores& global, const Subgraph& subgraph) {
  const auto eids = subgraph.entity_ids();
  const auto rids = subgraph.relation_ids();
  return {global.entities.subset(eids), global.relations.subset(rids)};
}

}  // namespace dotrag
