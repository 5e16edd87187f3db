#pragma once

// Brute-force ground truth. Everything here is deliberately simple and
// shares no traversal code with the query and planner modules.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rknnt/geometry.hpp"
#include "rknnt/graph.hpp"
#include "rknnt/model.hpp"

namespace rknnt::oracle {

struct RankedRoute {
  RouteId route;
  double distance;  // km
  double squared;   // km^2, the value the ranking is sorted by
};
using RankedRouteList = std::vector<RankedRoute>;

/// The k routes nearest to `t`, ascending by distance then route id.
inline RankedRouteList knn_point(const GeoPoint& t, std::span<const Route> routes, std::size_t k) {
  if (k > routes.size()) throw std::invalid_argument("k exceeds the number of routes");
  RankedRouteList all;
  all.reserve(routes.size());
  for (const auto& r : routes) {
    const double sq = squared_point_route_dist(t, r.points);
    all.push_back({r.id, std::sqrt(sq), sq});
  }
  std::sort(all.begin(), all.end(), [](const RankedRoute& a, const RankedRoute& b) {
    return a.squared != b.squared ? a.squared < b.squared : a.route < b.route;
  });
  all.resize(k);
  return all;
}

namespace detail {

inline bool route_excluded(const Route& r, std::optional<RouteId> excluded) {
  return excluded && r.id == *excluded;
}

template <class Qualifies>
RknntResult scan(std::span<const Transition> transitions, Semantics semantics, std::size_t k,
                 Qualifies&& qualifies) {
  EndpointSet hits;
  for (const auto& t : transitions) {
    if (qualifies(t.origin)) hits.push_back(endpoint_key(t.id, EndpointKind::Origin));
    if (qualifies(t.destination)) hits.push_back(endpoint_key(t.id, EndpointKind::Destination));
  }
  return assemble_result(std::move(hits), semantics, k);
}

}  // namespace detail

/// Counts, per endpoint, the routes strictly closer than the query.
inline RknntResult rknnt_bruteforce(std::span<const GeoPoint> query, std::size_t k, Semantics semantics,
                                    std::span<const Route> routes, std::span<const Transition> transitions,
                                    std::optional<RouteId> excluded = std::nullopt) {
  if (query.empty()) throw std::invalid_argument("query route needs at least one point");
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  return detail::scan(transitions, semantics, k, [&](const GeoPoint& t) {
    const double dq = squared_point_route_dist(t, query);
    std::size_t closer = 0;
    for (const auto& r : routes)
      if (!detail::route_excluded(r, excluded) && squared_point_route_dist(t, r.points) < dq) ++closer;
    return closer < k;
  });
}

/// Second formulation: rank every route, then ask whether the query would
/// still make the top k (it wins ties).
inline RknntResult rknnt_ranked(std::span<const GeoPoint> query, std::size_t k, Semantics semantics,
                                std::span<const Route> routes, std::span<const Transition> transitions,
                                std::optional<RouteId> excluded = std::nullopt) {
  if (query.empty()) throw std::invalid_argument("query route needs at least one point");
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  std::vector<Route> kept;
  for (const auto& r : routes)
    if (!detail::route_excluded(r, excluded)) kept.push_back(r);
  return detail::scan(transitions, semantics, k, [&](const GeoPoint& t) {
    if (kept.size() < k) return true;
    const auto ranked = knn_point(t, kept, k);
    return ranked.back().squared >= squared_point_route_dist(t, query);
  });
}

// Route enumeration --------------------------------------------------------

namespace detail {

inline void check_endpoints(const TransitGraph& g, VertexId o, VertexId d, double tau) {
  g.check_vertex(o);
  g.check_vertex(d);
  if (!(tau > 0)) throw std::invalid_argument("distance budget must be positive");
}

inline void dfs(const TransitGraph& g, VertexId d, double tau, const std::vector<double>* to_d, Path& path,
                std::vector<char>& on_path, double td, std::vector<Path>& out) {
  const VertexId v = path.back();
  if (v == d) {
    out.push_back(path);
    return;
  }
  for (const auto& e : g.neighbors(v)) {
    if (on_path[e.to]) continue;
    const double next = td + e.weight;
    if (next > tau) continue;
    if (to_d && next + (*to_d)[e.to] > tau + 1e-9) continue;
    path.push_back(e.to);
    on_path[e.to] = 1;
    dfs(g, d, tau, to_d, path, on_path, next, out);
    on_path[e.to] = 0;
    path.pop_back();
  }
}

inline std::vector<Path> enumerate(const TransitGraph& g, VertexId o, VertexId d, double tau, bool prune) {
  check_endpoints(g, o, d, tau);
  std::vector<double> to_d;
  if (prune) to_d = dijkstra(g, d);
  std::vector<Path> out;
  Path path{o};
  std::vector<char> on_path(g.vertex_count(), 0);
  on_path[o] = 1;
  dfs(g, d, tau, prune ? &to_d : nullptr, path, on_path, 0.0, out);
  return out;
}

}  // namespace detail

/// Every simple o→d path with travel distance ≤ tau, in lexicographic order.
/// Branches whose shortest possible completion overshoots the budget are cut.
inline std::vector<Path> enumerate_routes(const TransitGraph& g, VertexId o, VertexId d, double tau) {
  return detail::enumerate(g, o, d, tau, true);
}

/// Same enumeration, pruned only by the accumulated distance.
inline std::vector<Path> enumerate_routes_unpruned(const TransitGraph& g, VertexId o, VertexId d, double tau) {
  return detail::enumerate(g, o, d, tau, false);
}

/// Union of the precomputed per-vertex endpoint sets along `path`.
inline EndpointSet omega_of(const TransitGraph& g, std::span<const VertexId> path) {
  if (g.rknnt_sets.size() != g.vertex_count()) throw std::logic_error("graph is not precomputed");
  EndpointSet acc;
  for (auto v : path) acc = set_union(acc, g.rknnt_sets[v]);
  return acc;
}

using OmegaFn = std::function<EndpointSet(std::span<const VertexId>)>;

/// Scores every feasible path and keeps the best one under `plan_better`.
/// `omega` defaults to the per-vertex union; callers may pass a live query instead.
inline std::optional<PlanResult> maxrknnt_bruteforce(const TransitGraph& g, VertexId o, VertexId d, double tau,
                                                     Objective objective, Semantics semantics,
                                                     const OmegaFn& omega = {}) {
  std::optional<PlanResult> best;
  for (auto& p : enumerate_routes(g, o, d, tau)) {
    PlanResult cand;
    cand.td = travel_distance(p, g);
    if (cand.td > tau) continue;
    cand.omega = omega ? omega(p) : omega_of(g, p);
    normalize(cand.omega);
    cand.path = std::move(p);
    if (!best || plan_better(cand, *best, objective, semantics)) best = std::move(cand);
  }
  return best;
}

}  // namespace rknnt::oracle
