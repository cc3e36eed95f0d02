#pragma once

#include <span>
#include <string>
#include <vector>

#include "dotrag/graph_store.hpp"
#include "dotrag/structured.hpp"

namespace dotrag {

struct RelPath {
  std::vector<EntityIndex> nodes;
  std::string text;
  PathStatus status = PathStatus::unjudged;

  std::size_t length() const noexcept { return nodes.empty() ? 0 : nodes.size() - 1; }
  EntityIndex source() const { return nodes.front(); }
  EntityIndex destination() const { return nodes.back(); }
};

/// Up to `p` loopless source-target paths of at most `max_len` edges in
/// `subgraph`, ordered by (edge count, node-id sequence). Unit weights;
/// parallel relations count as one edge. Empty when no path exists.
std::vector<RelPath> yen_paths(const Subgraph& subgraph, EntityIndex source, EntityIndex target, std::size_t p,
                               unsigned max_len);

/// True iff `shorter` is a proper leading subsequence of `longer`.
bool is_prefix(std::span<const EntityIndex> shorter, std::span<const EntityIndex> longer);
bool is_prefix(const RelPath& shorter, const RelPath& longer);

/// Drops every path that is a proper prefix of another path in the list, and
/// repeated node sequences after their first occurrence. Order is kept.
void prefix_filter(std::vector<RelPath>& paths);

/// Structural check: non-empty, loopless, consecutive nodes adjacent.
bool is_valid_path(const Subgraph& subgraph, std::span<const EntityIndex> nodes);

}  // namespace dotrag
