#pragma once

// Transit graph shared by the planner and its brute-force oracle.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rknnt/binary_io.hpp"
#include "rknnt/geometry.hpp"
#include "rknnt/index.hpp"
#include "rknnt/model.hpp"

namespace rknnt {

using VertexId = std::uint32_t;
using Path = std::vector<VertexId>;

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

class TransitGraph {
 public:
  struct Edge {
    VertexId to;
    double weight;
  };

  VertexId add_vertex(const GeoPoint& p) {
    const auto key = PointKey::of(p);
    if (auto it = by_key_.find(key); it != by_key_.end()) return it->second;
    const auto id = static_cast<VertexId>(points_.size());
    points_.push_back(p);
    adj_.emplace_back();
    by_key_.emplace(key, id);
    return id;
  }

  /// Adds an undirected edge; a parallel edge is ignored and the first weight kept.
  void add_edge(VertexId u, VertexId v, double w) {
    check_vertex(u);
    check_vertex(v);
    if (u == v) return;
    if (!(w > 0)) throw std::invalid_argument("edge weights must be positive");
    if (has_edge(u, v)) return;
    insert_sorted(adj_[u], Edge{v, w});
    insert_sorted(adj_[v], Edge{u, w});
    ++edge_count_;
  }

  bool has_edge(VertexId u, VertexId v) const { return weight(u, v).has_value(); }

  std::optional<double> weight(VertexId u, VertexId v) const {
    const auto& a = adj_.at(u);
    auto it = std::lower_bound(a.begin(), a.end(), v, [](const Edge& e, VertexId x) { return e.to < x; });
    if (it == a.end() || it->to != v) return std::nullopt;
    return it->weight;
  }

  std::optional<VertexId> vertex_at(const GeoPoint& p) const {
    auto it = by_key_.find(PointKey::of(p));
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t vertex_count() const { return points_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  const GeoPoint& point(VertexId v) const { return points_.at(v); }
  std::span<const Edge> neighbors(VertexId v) const { return adj_.at(v); }

  void check_vertex(VertexId v) const {
    if (v >= points_.size()) throw std::out_of_range("unknown vertex " + std::to_string(v));
  }

  // Precomputed state -------------------------------------------------------

  /// k the endpoint sets were computed for; 0 when not precomputed.
  std::size_t k = 0;
  /// Per-vertex endpoints that take the vertex (as a one-point query) among their k nearest routes.
  std::vector<EndpointSet> rknnt_sets;
  /// Dense all-pairs shortest distances, row-major; empty when not materialized.
  std::vector<double> m_psi;

  bool has_matrix() const { return !m_psi.empty(); }
  double shortest(VertexId u, VertexId v) const { return m_psi[std::size_t{u} * vertex_count() + v]; }

  void save(std::ostream& out) const {
    io::write_header(out, "RKNNTGR", kVersion);
    io::write_pod<std::uint64_t>(out, k);
    io::write_vec(out, points_);
    std::vector<StoredEdge> edges;
    for (VertexId u = 0; u < adj_.size(); ++u)
      for (const auto& e : adj_[u])
        if (u < e.to) edges.push_back({u, e.to, e.weight});
    io::write_vec(out, edges);
    io::write_pod<std::uint64_t>(out, rknnt_sets.size());
    for (const auto& s : rknnt_sets) io::write_vec(out, s);
    io::write_vec(out, m_psi);
  }

  static TransitGraph load(std::istream& in) {
    io::read_header(in, "RKNNTGR", kVersion);
    TransitGraph g;
    g.k = io::read_pod<std::uint64_t>(in);
    for (const auto& p : io::read_vec<GeoPoint>(in)) g.add_vertex(p);
    for (const auto& e : io::read_vec<StoredEdge>(in)) g.add_edge(e.u, e.v, e.weight);
    const auto n = io::read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < n; ++i) g.rknnt_sets.push_back(io::read_vec<EndpointKey>(in));
    g.m_psi = io::read_vec<double>(in);
    if (!g.m_psi.empty() && g.m_psi.size() != g.vertex_count() * g.vertex_count())
      throw io::SnapshotError("distance matrix has the wrong shape");
    return g;
  }

 private:
  static constexpr std::uint32_t kVersion = 1;

  struct StoredEdge {
    VertexId u, v;
    double weight;
  };

  static void insert_sorted(std::vector<Edge>& a, Edge e) {
    auto it = std::lower_bound(a.begin(), a.end(), e.to, [](const Edge& x, VertexId v) { return x.to < v; });
    a.insert(it, e);
  }

  std::vector<GeoPoint> points_;
  std::vector<std::vector<Edge>> adj_;
  std::unordered_map<PointKey, VertexId, PointKeyHash> by_key_;
  std::size_t edge_count_ = 0;
};

/// Stops become vertices (same stop identity as the route index) and
/// consecutive stops of a route become edges weighted by planar distance.
inline TransitGraph build_graph(std::span<const Route> routes) {
  TransitGraph g;
  for (const auto& r : routes) {
    std::optional<VertexId> prev;
    for (const auto& p : r.points) {
      const VertexId v = g.add_vertex(p);
      if (prev && *prev != v) g.add_edge(*prev, v, dist(g.point(*prev), g.point(v)));
      prev = v;
    }
  }
  return g;
}

/// Sum of edge weights along `path`, accumulated front to back.
inline double travel_distance(std::span<const VertexId> path, const TransitGraph& g) {
  double td = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto w = g.weight(path[i], path[i + 1]);
    if (!w)
      throw std::invalid_argument("vertices " + std::to_string(path[i]) + " and " +
                                  std::to_string(path[i + 1]) + " are not adjacent");
    td += *w;
  }
  return td;
}

/// Single-source shortest distances (Dijkstra); unreachable vertices get kUnreachable.
inline std::vector<double> dijkstra(const TransitGraph& g, VertexId source) {
  g.check_vertex(source);
  std::vector<double> d(g.vertex_count(), kUnreachable);
  using Item = std::pair<double, VertexId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  d[source] = 0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    auto [du, u] = pq.top();
    pq.pop();
    if (du > d[u]) continue;
    for (const auto& e : g.neighbors(u)) {
      const double nd = du + e.weight;
      if (nd < d[e.to]) {
        d[e.to] = nd;
        pq.emplace(nd, e.to);
      }
    }
  }
  return d;
}

/// All-pairs shortest distances by Floyd-Warshall, row-major.
inline std::vector<double> floyd_warshall(const TransitGraph& g) {
  const std::size_t n = g.vertex_count();
  std::vector<double> m(n * n, kUnreachable);
  for (std::size_t i = 0; i < n; ++i) {
    m[i * n + i] = 0;
    for (const auto& e : g.neighbors(static_cast<VertexId>(i)))
      m[i * n + e.to] = std::min(m[i * n + e.to], e.weight);
  }
  for (std::size_t via = 0; via < n; ++via) {
    const double* row_via = &m[via * n];
    for (std::size_t i = 0; i < n; ++i) {
      const double d_iv = m[i * n + via];
      if (d_iv == kUnreachable) continue;
      double* row_i = &m[i * n];
      for (std::size_t j = 0; j < n; ++j) {
        const double cand = d_iv + row_via[j];
        if (cand < row_i[j]) row_i[j] = cand;
      }
    }
  }
  // Keep the matrix exactly symmetric despite summation order.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = m[j * n + i] = std::min(m[i * n + j], m[j * n + i]);
  return m;
}

// Planning objective and result ordering -------------------------------------

enum class Objective { Max, Min };

inline Objective parse_objective(const std::string& s) {
  if (s == "max") return Objective::Max;
  if (s == "min") return Objective::Min;
  throw std::invalid_argument("unknown objective: " + s);
}

struct PlanResult {
  Path path;
  EndpointSet omega;
  double td = 0;

  std::size_t count(Semantics s) const { return semantic_count(omega, s); }
};

/// Total order on complete routes: the requested count first, the other
/// count second (both larger-is-better for Max, smaller for Min), then
/// shorter travel distance, then the lexicographically smaller vertex sequence.
inline bool plan_better(const PlanResult& a, const PlanResult& b, Objective obj, Semantics sem) {
  const Semantics other = sem == Semantics::Exists ? Semantics::ForAll : Semantics::Exists;
  for (Semantics s : {sem, other}) {
    const auto ca = a.count(s), cb = b.count(s);
    if (ca != cb) return obj == Objective::Max ? ca > cb : ca < cb;
  }
  if (a.td != b.td) return a.td < b.td;
  return std::lexicographical_compare(a.path.begin(), a.path.end(), b.path.begin(), b.path.end());
}

}  // namespace rknnt
