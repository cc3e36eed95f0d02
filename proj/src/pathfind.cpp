#include "dotrag/pathfind.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <set>

namespace dotrag {

namespace {

using Pos = std::uint32_t;
using PosPath = std::vector<Pos>;

constexpr unsigned kUnreached = std::numeric_limits<unsigned>::max();

struct ByLengthThenLex {
  bool operator()(const PosPath& a, const PosPath& b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
};

// Lexicographically smallest shortest path from `from` to `to` avoiding
// `blocked` nodes and the edges from `from` to any node in `banned_next`.
// Positions ascend with entity ids, so lex order on positions is lex order
// on ids.
PosPath smallest_shortest_path(const Subgraph& g, Pos from, Pos to, const std::vector<char>& blocked,
                               const std::vector<Pos>& banned_next, unsigned budget) {
  const auto n = static_cast<Pos>(g.size());
  auto edge_ok = [&](Pos u, Pos v) {
    if (blocked[v]) return false;
    if (u == from && std::find(banned_next.begin(), banned_next.end(), v) != banned_next.end()) return false;
    return true;
  };
  // Distances to `to`; the graph is undirected so a BFS from `to` suffices.
  std::vector<unsigned> dist(n, kUnreached);
  std::deque<Pos> queue{to};
  dist[to] = 0;
  while (!queue.empty()) {
    const Pos u = queue.front();
    queue.pop_front();
    if (dist[u] >= budget) continue;
    for (Pos v : g.neighbors(u)) {
      if (dist[v] != kUnreached) continue;
      if (v != from && blocked[v]) continue;
      if (!edge_ok(v, u)) continue;
      dist[v] = dist[u] + 1;
      queue.push_back(v);
    }
  }
  if (dist[from] == kUnreached) return {};
  PosPath path{from};
  Pos cur = from;
  while (cur != to) {
    Pos next = n;
    for (Pos v : g.neighbors(cur)) {  // ascending
      if (dist[v] == dist[cur] - 1 && (v == to || !blocked[v]) && edge_ok(cur, v)) {
        next = v;
        break;
      }
    }
    path.push_back(next);
    cur = next;
  }
  return path;
}

}  // namespace

std::vector<RelPath> yen_paths(const Subgraph& subgraph, EntityIndex source, EntityIndex target, std::size_t p,
                               unsigned max_len) {
  if (p == 0) throw Error("yen_paths: p must be >= 1");
  const auto s = subgraph.position(source);
  const auto t = subgraph.position(target);
  if (!s || !t) throw ReferentialError("yen_paths: source or target outside the subgraph");

  std::vector<PosPath> found;
  if (*s == *t) {
    found.push_back({*s});
  } else {
    std::vector<char> blocked(subgraph.size(), 0);
    PosPath first = smallest_shortest_path(subgraph, *s, *t, blocked, {}, max_len);
    if (!first.empty()) found.push_back(std::move(first));

    std::set<PosPath, ByLengthThenLex> candidates;
    while (!found.empty() && found.size() < p) {
      const PosPath& last = found.back();
      for (std::size_t i = 0; i + 1 < last.size(); ++i) {
        const Pos spur = last[i];
        const std::size_t root_edges = i;
        if (root_edges >= max_len) break;

        std::vector<Pos> banned_next;
        for (const auto& q : found) {
          if (q.size() > i + 1 && std::equal(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(i) + 1, last.begin())) {
            banned_next.push_back(q[i + 1]);
          }
        }
        std::fill(blocked.begin(), blocked.end(), 0);
        for (std::size_t j = 0; j < i; ++j) blocked[last[j]] = 1;

        PosPath tail = smallest_shortest_path(subgraph, spur, *t, blocked, banned_next,
                                              max_len - static_cast<unsigned>(root_edges));
        if (tail.empty()) continue;
        PosPath full(last.begin(), last.begin() + static_cast<std::ptrdiff_t>(i));
        full.insert(full.end(), tail.begin(), tail.end());
        candidates.insert(std::move(full));
      }
      if (candidates.empty()) break;
      auto best = candidates.begin();
      found.push_back(*best);
      candidates.erase(best);
    }
  }

  std::vector<RelPath> out;
  out.reserve(found.size());
  for (const auto& path : found) {
    if (path.size() - 1 > max_len) break;
    RelPath r;
    r.nodes.reserve(path.size());
    for (Pos v : path) r.nodes.push_back(subgraph.node_at(v));
    out.push_back(std::move(r));
  }
  return out;
}

bool is_prefix(std::span<const EntityIndex> shorter, std::span<const EntityIndex> longer) {
  return shorter.size() < longer.size() && std::equal(shorter.begin(), shorter.end(), longer.begin());
}

bool is_prefix(const RelPath& shorter, const RelPath& longer) { return is_prefix(shorter.nodes, longer.nodes); }

void prefix_filter(std::vector<RelPath>& paths) {
  std::vector<bool> drop(paths.size(), false);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (std::size_t j = 0; j < paths.size() && !drop[i]; ++j) {
      if (i == j) continue;
      if (is_prefix(paths[i], paths[j])) drop[i] = true;
      if (j < i && paths[j].nodes == paths[i].nodes) drop[i] = true;
    }
  }
  std::vector<RelPath> kept;
  kept.reserve(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (!drop[i]) kept.push_back(std::move(paths[i]));
  }
  paths = std::move(kept);
}

bool is_valid_path(const Subgraph& subgraph, std::span<const EntityIndex> nodes) {
  if (nodes.empty()) return false;
  std::vector<EntityIndex> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return false;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!subgraph.contains(nodes[i])) return false;
    if (i == 0) continue;
    const auto a = *subgraph.position(nodes[i - 1]);
    const auto b = *subgraph.position(nodes[i]);
    const auto nb = subgraph.neighbors(a);
    if (!std::binary_search(nb.begin(), nb.end(), b)) return false;
  }
  return true;
}

}  // namespace dotrag
