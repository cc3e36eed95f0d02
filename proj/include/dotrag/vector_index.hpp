#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "dotrag/embedding.hpp"
#include "dotrag/graph_store.hpp"

namespace dotrag {

template <typename Scalar>
struct BasicScoredHit {
  std::string item_id;
  Scalar score = 0;
};

using ScoredHit = BasicScoredHit<double>;

/// Exhaustive cosine-similarity store. Immutable once constructed; all
/// queries are const and safe to run concurrently.
///
/// Result ordering is score descending, ties broken by ascending item id.
template <typename Scalar>
class BasicVectorStore {
 public:
  using Vector = EmbeddingT<Scalar>;
  using Hit = BasicScoredHit<Scalar>;

  struct Item {
    std::string id;
    Vector values;
  };

  explicit BasicVectorStore(Eigen::Index dim = 0) : dim_(dim), rows_(0, dim) {}

  BasicVectorStore(Eigen::Index dim, std::vector<Item> items) : dim_(dim), rows_(items.size(), dim) {
    ids_.reserve(items.size());
    norms_.resize(static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto& item = items[i];
      if (item.values.size() != dim_) {
        throw DimensionError("vector store: item '" + item.id + "' has dimension " +
                             std::to_string(item.values.size()) + ", store expects " + std::to_string(dim_));
      }
      const Scalar norm = item.values.norm();
      if (!(norm > 0) || !std::isfinite(static_cast<double>(norm))) {
        throw Error("vector store: item '" + item.id + "' has zero or non-finite norm");
      }
      if (!position_.emplace(item.id, i).second) {
        throw Error("vector store: duplicate item id '" + item.id + "'");
      }
      rows_.row(static_cast<Eigen::Index>(i)) = item.values.transpose();
      norms_(static_cast<Eigen::Index>(i)) = norm;
      ids_.push_back(std::move(item.id));
    }
  }

  Eigen::Index dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  bool contains(const std::string& id) const { return position_.count(id) != 0; }

  std::optional<Vector> values(const std::string& id) const {
    auto it = position_.find(id);
    if (it == position_.end()) return std::nullopt;
    return Vector(rows_.row(static_cast<Eigen::Index>(it->second)).transpose());
  }

  /// Cosine score of every stored item against `query`, in storage order.
  Vector scores(const Vector& query) const {
    check_query(query);
    if (ids_.empty()) return Vector(0);
    const Scalar qnorm = query.norm();
    Vector dots = rows_ * query;
    return dots.array() / (norms_.array() * qnorm);
  }

  std::vector<Hit> top_k(const Vector& query, std::size_t k) const {
    return top_k(query, k, [](const std::string&) { return false; });
  }

  /// top_k over the items for which `exclude(id)` is false.
  template <typename Excluded>
  std::vector<Hit> top_k(const Vector& query, std::size_t k, Excluded&& exclude) const {
    if (k == 0) throw Error("top_k: k must be >= 1");
    const Vector s = scores(query);
    std::vector<Hit> hits;
    hits.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (exclude(ids_[i])) continue;
      hits.push_back({ids_[i], s(static_cast<Eigen::Index>(i))});
    }
    const auto keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), hit_order);
    hits.resize(keep);
    return hits;
  }

  std::vector<Hit> above_threshold(const Vector& query, Scalar tau) const {
    if (!(tau >= Scalar(-1) && tau <= Scalar(1))) {
      throw Error("above_threshold: tau must lie in [-1, 1]");
    }
    const Vector s = scores(query);
    std::vector<Hit> hits;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      const Scalar score = s(static_cast<Eigen::Index>(i));
      if (score >= tau) hits.push_back({ids_[i], score});
    }
    std::sort(hits.begin(), hits.end(), hit_order);
    return hits;
  }

  /// New store holding only the listed ids (unknown ids are skipped). Cost is
  /// proportional to the number of ids requested, not to the store size.
  BasicVectorStore subset(std::span<const std::string> wanted) const {
    std::vector<Item> items;
    items.reserve(wanted.size());
    for (const auto& id : wanted) {
      auto it = position_.find(id);
      if (it == position_.end()) continue;
      items.push_back({id, rows_.row(static_cast<Eigen::Index>(it->second)).transpose()});
    }
    return BasicVectorStore(dim_, std::move(items));
  }

  static bool hit_order(const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  }

 private:
  void check_query(const Vector& query) const {
    if (query.size() != dim_) {
      throw DimensionError("vector store: query dimension " + std::to_string(query.size()) +
                           " does not match store dimension " + std::to_string(dim_));
    }
    if (!(query.norm() > 0)) throw Error("vector store: zero-norm query");
  }

  Eigen::Index dim_;
  std::vector<std::string> ids_;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows_;
  Vector norms_;
  std::unordered_map<std::string, std::size_t> position_;
};

using VectorStore = BasicVectorStore<double>;

class Embedder;

/// Entity and relation stores for one graph. Relation items are keyed by
/// relation id.
struct IndexStores {
  VectorStore entities;
  VectorStore relations;
};

/// Text embedded for an entity when the index carries no stored vector.
std::string entity_embedding_text(const Entity& entity);
std::string relation_embedding_text(const Relation& relation);

/// Global stores for `index`: stored vectors are used as-is, missing ones are
/// computed with `embedder`. Every vector must match embedder.dim().
IndexStores build_global_stores(const GraphIndex& index, Embedder& embedder);

/// DOT-local stores: exactly the entity (and relation) vectors of `subgraph`.
IndexStores scoped_store(const IndexStores& global, const Subgraph& subgraph);

}  // namespace dotrag
