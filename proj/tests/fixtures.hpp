#pragma once

// Hand-built scenes and random instance generators shared by the tests.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rknnt/graph.hpp"
#include "rknnt/model.hpp"

namespace fixtures {

using namespace rknnt;

inline Transition make_transition(std::uint32_t id, GeoPoint o, GeoPoint d) { return {TransitionId{id}, o, d}; }

/// Four routes around a horizontal five-stop query. Two routes share the stop
/// (2,5). Transition i is numbered i.
struct RouteScene {
  std::vector<GeoPoint> query{{4, 5}, {5, 5}, {6, 5}, {7, 5}, {8, 5}};
  std::vector<Route> routes{
      {RouteId{1}, {{0, 2}, {2, 5}, {0, 8}}},
      {RouteId{2}, {{4, 1}, {6, 1}, {8, 1}}},
      {RouteId{3}, {{4, 9}, {6, 9}, {8, 9}}},
      {RouteId{4}, {{1, 0}, {2, 5}, {3, 10}}},
  };
  std::vector<Transition> transitions{
      make_transition(1, {5, 5.3}, {6, 1.2}),    // starts by the query, ends by route 2
      make_transition(2, {6, 8.8}, {6, 1.2}),    // route 3 to route 2
      make_transition(3, {7.5, 5.2}, {8, 8.7}),  // starts by the query, ends by route 3
      make_transition(4, {5, 5.5}, {7, 4.6}),    // both ends by the query
      make_transition(5, {0.5, 5}, {1, 4}),      // both ends by the shared stop
      make_transition(6, {0.5, 6.5}, {1, 6}),
  };
};

/// Ten-stop network a..j with explicit edge weights and per-stop endpoint
/// sets injected by hand. Transition Tn has id n.
struct PlanScene {
  TransitGraph graph;
  std::map<char, VertexId> v;

  PlanScene() {
    for (char c = 'a'; c <= 'j'; ++c) v[c] = graph.add_vertex({double(c - 'a'), 0.0});
    const std::vector<std::tuple<char, char, double>> edges{
        {'a', 'b', 1.6}, {'a', 'c', 1.0}, {'a', 'd', 1.0}, {'b', 'e', 1.5}, {'c', 'e', 1.6},
        {'c', 'f', 1.5}, {'d', 'f', 2.3}, {'e', 'j', 2.3}, {'e', 'h', 1.4}, {'f', 'h', 1.4},
        {'h', 'j', 1.5}, {'d', 'g', 1.2}, {'h', 'i', 1.3}, {'i', 'j', 1.1},
    };
    for (auto [a, b, w] : edges) graph.add_edge(v[a], v[b], w);
    auto O = [](std::uint32_t t) { return endpoint_key(TransitionId{t}, EndpointKind::Origin); };
    auto D = [](std::uint32_t t) { return endpoint_key(TransitionId{t}, EndpointKind::Destination); };
    const std::map<char, EndpointSet> sets{
        {'a', {O(1)}},       {'b', {D(1)}}, {'c', {D(1), O(3), O(4)}}, {'d', {O(5)}}, {'e', {O(2)}},
        {'f', {O(2), D(3), D(4)}}, {'g', {O(5)}}, {'h', {D(2)}}, {'i', {O(6)}}, {'j', {D(6)}},
    };
    graph.k = 1;
    graph.rknnt_sets.assign(graph.vertex_count(), {});
    for (auto [c, s] : sets) {
      normalize(s);
      graph.rknnt_sets[v[c]] = s;
    }
    graph.m_psi = floyd_warshall(graph);
  }

  Path path(const std::string& s) {
    Path p;
    for (char c : s) p.push_back(v.at(c));
    return p;
  }
};

// Random instances -----------------------------------------------------------

struct Instance {
  std::vector<Route> routes;
  std::vector<Transition> transitions;
  std::vector<GeoPoint> query;
  std::size_t k = 1;
};

/// Points on a coarse grid half of the time so that shared stops, equal
/// distances and collinear layouts show up regularly.
inline GeoPoint random_point(std::mt19937_64& rng, double extent = 10.0) {
  std::uniform_real_distribution<double> u(0, extent);
  std::bernoulli_distribution grid(0.5);
  if (grid(rng)) {
    std::uniform_int_distribution<int> g(0, static_cast<int>(extent * 2));
    return {g(rng) * 0.5, g(rng) * 0.5};
  }
  return {u(rng), u(rng)};
}

inline Instance random_instance(std::mt19937_64& rng, std::size_t max_routes = 50, std::size_t max_points = 10,
                                std::size_t max_transitions = 500, std::size_t max_query = 8) {
  Instance in;
  std::uniform_int_distribution<std::size_t> nr(1, max_routes), np(2, max_points), nt(1, max_transitions),
      nq(1, max_query);
  std::bernoulli_distribution reuse(0.15);
  std::vector<GeoPoint> seen;
  const std::size_t routes = nr(rng);
  for (std::size_t i = 0; i < routes; ++i) {
    Route r{RouteId{static_cast<std::uint32_t>(i)}, {}};
    const std::size_t n = np(rng);
    while (r.points.size() < n) {
      GeoPoint p = random_point(rng);
      if (!seen.empty() && reuse(rng)) p = seen[std::uniform_int_distribution<std::size_t>(0, seen.size() - 1)(rng)];
      r.points.push_back(p);
      seen.push_back(p);
    }
    in.routes.push_back(std::move(r));
  }
  const std::size_t ts = nt(rng);
  for (std::size_t i = 0; i < ts; ++i)
    in.transitions.push_back(make_transition(static_cast<std::uint32_t>(i), random_point(rng), random_point(rng)));
  const std::size_t q = nq(rng);
  for (std::size_t i = 0; i < q; ++i) {
    GeoPoint p = random_point(rng);
    if (reuse(rng)) p = seen[std::uniform_int_distribution<std::size_t>(0, seen.size() - 1)(rng)];
    in.query.push_back(p);
  }
  const std::size_t ks[] = {1, 5, 10};
  in.k = ks[std::uniform_int_distribution<int>(0, 2)(rng)];
  return in;
}

struct GraphInstance {
  std::vector<Route> routes;  // one two-stop route per edge
  std::vector<Transition> transitions;
  std::vector<GeoPoint> stops;
};

/// Connected random geometric graph: a random spanning tree plus extra edges,
/// each edge doubling as a two-stop route so the graph rebuilds from routes.
inline GraphInstance random_graph(std::mt19937_64& rng, std::size_t max_vertices = 30, std::size_t max_edges = 60,
                                  std::size_t max_transitions = 200) {
  GraphInstance gi;
  std::uniform_int_distribution<std::size_t> nv(std::max<std::size_t>(2, max_vertices / 2), max_vertices),
      nt(1, max_transitions);
  std::uniform_real_distribution<double> u(0, 10);
  const std::size_t n = nv(rng);
  while (gi.stops.size() < n) {
    GeoPoint p{std::round(u(rng) * 100) / 100, std::round(u(rng) * 100) / 100};
    if (std::find(gi.stops.begin(), gi.stops.end(), p) == gi.stops.end()) gi.stops.push_back(p);
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 1; i < n; ++i) edges.emplace_back(std::uniform_int_distribution<std::size_t>(0, i - 1)(rng), i);
  const std::size_t target = std::uniform_int_distribution<std::size_t>(n - 1, std::max(n - 1, max_edges))(rng);
  for (std::size_t tries = 0; edges.size() < target && tries < 1000; ++tries) {
    std::size_t a = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::size_t b = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (std::find(edges.begin(), edges.end(), std::pair{a, b}) != edges.end()) continue;
    edges.emplace_back(a, b);
  }
  for (std::size_t i = 0; i < edges.size(); ++i)
    gi.routes.push_back({RouteId{static_cast<std::uint32_t>(i)}, {gi.stops[edges[i].first], gi.stops[edges[i].second]}});
  const std::size_t ts = nt(rng);
  for (std::size_t i = 0; i < ts; ++i)
    gi.transitions.push_back(make_transition(static_cast<std::uint32_t>(i), random_point(rng), random_point(rng)));
  return gi;
}

}  // namespace fixtures
