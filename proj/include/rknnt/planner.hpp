#pragma once

// Route planning over a precomputed transit graph: find the o→d path within
// a distance budget that attracts the most (or fewest) transitions.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "rknnt/graph.hpp"
#include "rknnt/index.hpp"
#include "rknnt/query.hpp"

namespace rknnt {

/// Slack for comparing distance sums accumulated in different orders.
inline constexpr double kDistanceSlack = 1e-9;

/// Graphs up to this many vertices get a dense shortest-distance matrix.
inline constexpr std::size_t kDenseMatrixLimit = 4000;

struct PrecomputeOptions {
  unsigned threads = 1;
  bool dense_matrix = true;  // ignored above kDenseMatrixLimit
  QueryOptions query;
};

/// Fills the per-vertex endpoint sets (one single-point query per stop) and
/// the all-pairs shortest-distance matrix.
inline void precompute(TransitGraph& g, const RrTree& rr, const TrTree& tr, std::size_t k,
                       const PrecomputeOptions& opts = {}) {
  detail::check_k(k);
  const std::size_t n = g.vertex_count();
  std::vector<EndpointSet> sets(n);
  auto run = [&](std::size_t v) {
    const GeoPoint p = g.point(static_cast<VertexId>(v));
    sets[v] = rknnt(std::span<const GeoPoint>(&p, 1), k, Semantics::Exists, rr, tr, opts.query).endpoint_hits;
  };
  const unsigned threads = std::max(1U, std::min<unsigned>(opts.threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t v = 0; v < n; ++v) run(v);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t v = w; v < n; v += threads) run(v);
      });
  }
  g.k = k;
  g.rknnt_sets = std::move(sets);
  g.m_psi.clear();
  if (opts.dense_matrix && n <= kDenseMatrixLimit) g.m_psi = floyd_warshall(g);
}

/// Shortest distances from every vertex to `d`, from the matrix when present.
inline std::vector<double> distances_to(const TransitGraph& g, VertexId d) {
  g.check_vertex(d);
  if (!g.has_matrix()) return dijkstra(g, d);
  std::vector<double> out(g.vertex_count());
  for (VertexId v = 0; v < out.size(); ++v) out[v] = g.shortest(v, d);
  return out;
}

inline bool check_reachability(const TransitGraph& g, VertexId v, VertexId d, double budget) {
  g.check_vertex(v);
  g.check_vertex(d);
  const double sp = g.has_matrix() ? g.shortest(v, d) : dijkstra(g, d)[v];
  return sp <= budget + kDistanceSlack;
}

// Dominance ----------------------------------------------------------------

struct PartialRoute {
  Path vertices;
  double td = 0;
  EndpointSet omega;
  bool alive = true;  // cleared when a dominating label evicts it
};

using RouteHandle = std::shared_ptr<PartialRoute>;

class DominanceTable {
 public:
  explicit DominanceTable(std::size_t vertices = 0) : labels_(vertices) {}

  std::vector<RouteHandle>& at(VertexId v) { return labels_.at(v); }
  const std::vector<RouteHandle>& at(VertexId v) const { return labels_.at(v); }
  std::size_t vertex_count() const { return labels_.size(); }

 private:
  std::vector<std::vector<RouteHandle>> labels_;
};

/// What a dominance check needs to know about the search it serves.
struct DominanceContext {
  Objective objective = Objective::Max;
  double tau = 0;
  /// Lower bound on the distance from each vertex to the destination.
  std::span<const double> to_d;
  /// Shortest distances from the label's end vertex, or empty if unknown.
  std::span<const double> from_v;
};

/// `a` dominates `b` (both ending at the same vertex) when every completion
/// open to `b` is also open to `a` and scores at least as well on both counts.
/// Omega containment gives the score guarantee; a vertex visited by `a` but
/// not by `b` is harmless only if `b` could not afford to pass it anyway.
inline bool dominates(const PartialRoute& a, const PartialRoute& b, const DominanceContext& ctx) {
  if (a.td > b.td) return false;
  if (a.td == b.td && !std::lexicographical_compare(a.vertices.begin(), a.vertices.end(),
                                                   b.vertices.begin(), b.vertices.end()))
    return false;
  const bool covered = ctx.objective == Objective::Max ? includes(a.omega, b.omega) : includes(b.omega, a.omega);
  if (!covered) return false;
  const double spare = ctx.tau - b.td + kDistanceSlack;
  for (std::size_t i = 0; i + 1 < a.vertices.size(); ++i) {
    const VertexId u = a.vertices[i];
    const double via = (ctx.from_v.empty() ? 0.0 : ctx.from_v[u]) + ctx.to_d[u];
    if (via > spare) continue;
    if (std::find(b.vertices.begin(), b.vertices.end(), u) == b.vertices.end()) return false;
  }
  return true;
}

enum class DominanceVerdict { Dominated, Admitted };

struct DominanceOutcome {
  DominanceVerdict verdict = DominanceVerdict::Admitted;
  std::vector<RouteHandle> evicted;
};

/// Rejects `cand` if a stored label at `v` dominates it; otherwise stores it
/// and evicts (marks dead) the labels it dominates.
inline DominanceOutcome check_dominance(DominanceTable& dt, VertexId v, const RouteHandle& cand,
                                        const DominanceContext& ctx) {
  if (cand->vertices.empty() || cand->vertices.back() != v)
    throw std::invalid_argument("candidate does not end at the labelled vertex");
  auto& labels = dt.at(v);
  DominanceOutcome out;
  for (const auto& l : labels)
    if (dominates(*l, *cand, ctx)) {
      out.verdict = DominanceVerdict::Dominated;
      return out;
    }
  std::erase_if(labels, [&](const RouteHandle& l) {
    if (!dominates(*cand, *l, ctx)) return false;
    l->alive = false;
    out.evicted.push_back(l);
    return true;
  });
  labels.push_back(cand);
  return out;
}

// Search -------------------------------------------------------------------

enum class ReachabilityBound { ShortestPath, StraightLine, None };

struct PlanOptions {
  bool use_dominance = true;
  bool use_bounds = true;  // incumbent bound, Min objective only
  ReachabilityBound reachability = ReachabilityBound::ShortestPath;
};

struct PlanStats {
  std::size_t enqueued = 0;
  std::size_t expanded = 0;
  std::size_t pruned_reachability = 0;
  std::size_t pruned_dominance = 0;
  std::size_t pruned_bounds = 0;
  std::size_t evicted = 0;
  std::vector<char> enqueued_vertex;  // per vertex: ever the end of a queued route

  bool was_enqueued(VertexId v) const { return v < enqueued_vertex.size() && enqueued_vertex[v]; }
};

inline std::optional<PlanResult> plan(const TransitGraph& g, VertexId o, VertexId d, double tau,
                                      Objective objective, Semantics semantics, const PlanOptions& opts = {},
                                      PlanStats* stats = nullptr) {
  g.check_vertex(o);
  g.check_vertex(d);
  if (!(tau > 0)) throw std::invalid_argument("distance budget must be positive");
  if (g.rknnt_sets.size() != g.vertex_count()) throw std::logic_error("graph is not precomputed");

  const std::size_t n = g.vertex_count();
  PlanStats local;
  PlanStats& st = stats ? *stats : local;
  st.enqueued_vertex.assign(n, 0);

  const std::vector<double> shortest_to_d = distances_to(g, d);
  if (shortest_to_d[o] > tau + kDistanceSlack) return std::nullopt;

  std::vector<double> bound(n, 0.0);
  switch (opts.reachability) {
    case ReachabilityBound::ShortestPath: bound = shortest_to_d; break;
    case ReachabilityBound::StraightLine:
      for (VertexId v = 0; v < n; ++v) bound[v] = dist(g.point(v), g.point(d));
      break;
    case ReachabilityBound::None: break;
  }

  DominanceTable dt(n);
  std::vector<double> from_row;
  DominanceContext ctx{objective, tau, bound, {}};

  struct Queued {
    double td;
    std::uint64_t seq;
    RouteHandle route;
  };
  auto later = [](const Queued& a, const Queued& b) { return a.td != b.td ? a.td > b.td : a.seq > b.seq; };
  std::priority_queue<Queued, std::vector<Queued>, decltype(later)> queue(later);
  std::uint64_t seq = 0;

  auto enqueue = [&](RouteHandle r) {
    st.enqueued_vertex[r->vertices.back()] = 1;
    ++st.enqueued;
    const double td = r->td;
    queue.push({td, seq++, std::move(r)});
  };

  auto start = std::make_shared<PartialRoute>();
  start->vertices = {o};
  start->omega = g.rknnt_sets[o];
  if (opts.use_dominance) check_dominance(dt, o, start, ctx);
  enqueue(start);

  std::optional<PlanResult> best;
  auto over_bound = [&](const EndpointSet& omega) {
    return objective == Objective::Min && opts.use_bounds && best &&
           semantic_count(omega, semantics) > best->count(semantics);
  };

  while (!queue.empty()) {
    RouteHandle cur = queue.top().route;
    queue.pop();
    if (!cur->alive) continue;
    const VertexId v = cur->vertices.back();
    if (v == d) {
      if (cur->td > tau) continue;
      PlanResult done{cur->vertices, cur->omega, cur->td};
      if (!best || plan_better(done, *best, objective, semantics)) best = std::move(done);
      continue;
    }
    if (over_bound(cur->omega)) {
      ++st.pruned_bounds;
      continue;
    }
    ++st.expanded;
    for (const auto& e : g.neighbors(v)) {
      const VertexId u = e.to;
      if (std::find(cur->vertices.begin(), cur->vertices.end(), u) != cur->vertices.end()) continue;
      const double td = cur->td + e.weight;
      if (td > tau + kDistanceSlack || bound[u] > tau - td + kDistanceSlack) {
        ++st.pruned_reachability;
        continue;
      }
      auto ext = std::make_shared<PartialRoute>();
      ext->vertices = cur->vertices;
      ext->vertices.push_back(u);
      ext->td = td;
      ext->omega = set_union(cur->omega, g.rknnt_sets[u]);
      if (over_bound(ext->omega)) {
        ++st.pruned_bounds;
        continue;
      }
      if (opts.use_dominance) {
        if (g.has_matrix()) {
          from_row.resize(n);
          for (VertexId x = 0; x < n; ++x) from_row[x] = g.shortest(u, x);
          ctx.from_v = from_row;
        } else {
          ctx.from_v = {};
        }
        auto outcome = check_dominance(dt, u, ext, ctx);
        if (outcome.verdict == DominanceVerdict::Dominated) {
          ++st.pruned_dominance;
          continue;
        }
        st.evicted += outcome.evicted.size();
      }
      enqueue(std::move(ext));
    }
  }
  return best;
}

// Snapshot -----------------------------------------------------------------

inline void save_graph(const TransitGraph& g, const std::string& path) { save_file(g, path); }
inline TransitGraph load_graph(const std::string& path) { return load_file<TransitGraph>(path); }

}  // namespace rknnt
