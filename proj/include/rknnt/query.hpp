#pragma once

// Filter-refine evaluation of reverse k-nearest-neighbour queries whose
// query object is a route and whose data objects are transitions.
//
//   filter_route       best-first over the route index; harvests filtering
//                      points and remembers nodes it could skip
//   prune_transition   best-first over the transition index, dropping
//                      everything at least k routes are known to beat Q on
//   refine_candidates  exact count of strictly-closer routes per candidate,
//                      using the filtering points and the skipped nodes
//
// A transition endpoint t takes Q among its k nearest routes iff fewer than
// k routes are strictly closer to t than Q is. Ties favour the query.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "rknnt/geometry.hpp"
#include "rknnt/index.hpp"
#include "rknnt/model.hpp"
#include "rknnt/rtree.hpp"

namespace rknnt {

struct QueryOptions {
  bool use_point_filter = true;  // crossover-weighted single-point filtering spaces
  bool use_voronoi = true;       // whole-route filtering spaces
  bool reuse_refine_set = true;  // verify against skipped nodes instead of the full index
  /// Route whose points are ignored, for querying with an indexed route.
  std::optional<RouteId> masked_route;
};

struct FilterSet {
  struct Point {
    GeoPoint location;
    RouteSet crossover;
  };
  std::vector<Point> by_point;                          // descending |crossover|, stable
  std::map<RouteId, std::vector<GeoPoint>> by_route;  // unfiltered points per route

  void add(const GeoPoint& p, RouteSet crossover) {
    for (auto r : crossover) by_route[r].push_back(p);
    auto pos = std::upper_bound(by_point.begin(), by_point.end(), crossover.size(),
                                [](std::size_t n, const Point& x) { return n > x.crossover.size(); });
    by_point.insert(pos, Point{p, std::move(crossover)});
  }

  std::size_t size() const { return by_point.size(); }
};

struct RefineSet {
  struct Item {
    HeapEntry::Kind kind;
    std::uint32_t index;
  };
  std::vector<Item> items;
};

struct CandidateSet {
  std::vector<TransitionPointRef> points;
};

struct QueryStats {
  double filter_ms = 0;
  double prune_ms = 0;
  double refine_ms = 0;
  std::size_t filter_points = 0;
  std::size_t refine_items = 0;
  std::size_t candidates = 0;

  double total_ms() const { return filter_ms + prune_ms + refine_ms; }
};

/// Per-query scratch set of route ids with O(1) reset.
class RouteMarks {
 public:
  explicit RouteMarks(std::size_t bound = 0) : stamp_(bound, 0) {}

  void reset() {
    ++generation_;
    count_ = 0;
    if (generation_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      generation_ = 1;
    }
  }

  bool contains(RouteId r) const {
    const auto i = to_index(r);
    return i < stamp_.size() && stamp_[i] == generation_;
  }

  void add(RouteId r) {
    const auto i = to_index(r);
    if (i >= stamp_.size()) stamp_.resize(i + 1, 0);
    if (stamp_[i] != generation_) {
      stamp_[i] = generation_;
      ++count_;
    }
  }

  std::size_t count() const { return count_; }

 private:
  std::vector<std::uint32_t> stamp_;
  std::uint32_t generation_ = 1;
  std::size_t count_ = 0;
};

namespace detail {

inline RouteSet without_mask(const RouteSet& routes, const QueryOptions& opts) {
  if (!opts.masked_route) return routes;
  RouteSet out;
  out.reserve(routes.size());
  for (auto r : routes)
    if (r != *opts.masked_route) out.push_back(r);
  return out;
}

inline void add_routes(RouteMarks& marks, const RouteSet& routes, const QueryOptions& opts) {
  for (auto r : routes)
    if (!opts.masked_route || r != *opts.masked_route) marks.add(r);
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

inline void check_k(std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
}

}  // namespace detail

/// True once at least k distinct routes are known to be strictly closer than
/// Q to every point of `entry`.
inline bool is_filtered(std::span<const GeoPoint> query, const FilterSet& fs, const Entry& entry,
                        std::size_t k, const QueryOptions& opts, RouteMarks& marks) {
  marks.reset();
  if (opts.use_point_filter) {
    for (const auto& p : fs.by_point) {
      if (marks.count() >= k) return true;
      if (filtering_space_contains(p.location, query, entry)) detail::add_routes(marks, p.crossover, opts);
    }
  }
  if (marks.count() >= k) return true;
  if (opts.use_voronoi) {
    for (const auto& [route, pts] : fs.by_route) {
      if (marks.count() >= k) return true;
      if (marks.contains(route) || (opts.masked_route && route == *opts.masked_route)) continue;
      if (voronoi_filter(pts, query, entry)) marks.add(route);
    }
  }
  return marks.count() >= k;
}

inline bool is_filtered(std::span<const GeoPoint> query, const FilterSet& fs, const Entry& entry,
                        std::size_t k, const QueryOptions& opts = {}) {
  RouteMarks marks;
  return is_filtered(query, fs, entry, k, opts, marks);
}

inline std::pair<FilterSet, RefineSet> filter_route(const RrTree& rr, std::span<const GeoPoint> query,
                                                    std::size_t k, const QueryOptions& opts = {}) {
  detail::check_k(k);
  FilterSet fs;
  RefineSet refine;
  if (rr.tree().empty()) return {std::move(fs), std::move(refine)};
  RouteMarks marks(rr.route_id_bound());
  BestFirst<RrTree::Tree> bf(rr.tree(), query);
  while (!bf.done()) {
    const HeapEntry e = bf.next();
    if (e.kind == HeapEntry::Kind::Node) {
      const auto& node = rr.tree().node(e.index);
      if (opts.masked_route && detail::without_mask(rr.nlist(e.index), opts).empty()) continue;
      if (is_filtered(query, fs, node.box, k, opts, marks)) {
        refine.items.push_back({HeapEntry::Kind::Node, e.index});
        continue;
      }
      bf.expand(e);
    } else {
      auto crs = detail::without_mask(rr.routes_of_entry(e.index), opts);
      if (crs.empty()) continue;
      const auto& p = rr.tree().entry(e.index).point;
      if (is_filtered(query, fs, p, k, opts, marks))
        refine.items.push_back({HeapEntry::Kind::Entry, e.index});
      else
        fs.add(p, std::move(crs));
    }
  }
  return {std::move(fs), std::move(refine)};
}

inline CandidateSet prune_transition(const TrTree& tr, std::span<const GeoPoint> query,
                                     const FilterSet& fs, std::size_t k,
                                     const QueryOptions& opts = {}) {
  detail::check_k(k);
  CandidateSet out;
  if (tr.tree().empty()) return out;
  RouteMarks marks;
  BestFirst<TrTree::Tree> bf(tr.tree(), query);
  while (!bf.done()) {
    const HeapEntry e = bf.next();
    if (e.kind == HeapEntry::Kind::Node) {
      if (!is_filtered(query, fs, tr.tree().node(e.index).box, k, opts, marks)) bf.expand(e);
    } else {
      const auto ref = tr.ref_of(e.index);
      if (!is_filtered(query, fs, ref.location, k, opts, marks)) out.points.push_back(ref);
    }
  }
  return out;
}

/// Keeps the candidates that fewer than k routes beat.
inline std::vector<TransitionPointRef> refine_candidates(std::span<const GeoPoint> query,
                                                         const CandidateSet& cands,
                                                         const RefineSet& refine, const FilterSet& fs,
                                                         const RrTree& rr, std::size_t k,
                                                         const QueryOptions& opts = {}) {
  detail::check_k(k);
  std::vector<TransitionPointRef> kept;
  RouteMarks marks(rr.route_id_bound());
  const auto& tree = rr.tree();

  std::vector<RefineSet::Item> roots;
  if (opts.reuse_refine_set) {
    roots = refine.items;
  } else if (!tree.empty()) {
    roots.push_back({HeapEntry::Kind::Node, tree.root()});
  }

  std::vector<RefineSet::Item> stack;
  for (const auto& cand : cands.points) {
    const GeoPoint& t = cand.location;
    const double dq = squared_point_route_dist(t, query);
    marks.reset();

    if (opts.reuse_refine_set) {
      for (const auto& p : fs.by_point) {
        if (marks.count() >= k) break;
        if (squared_dist(t, p.location) < dq) detail::add_routes(marks, p.crossover, opts);
      }
    }

    stack.assign(roots.begin(), roots.end());
    while (!stack.empty() && marks.count() < k) {
      const auto item = stack.back();
      stack.pop_back();
      if (item.kind == HeapEntry::Kind::Entry) {
        if (squared_dist(t, tree.entry(item.index).point) < dq)
          detail::add_routes(marks, rr.routes_of_entry(item.index), opts);
        continue;
      }
      const auto& node = tree.node(item.index);
      if (node.box.is_empty() || squared_min_dist_point_mbr(t, node.box) >= dq) continue;
      if (squared_max_dist_point_mbr(t, node.box) < dq) {
        detail::add_routes(marks, rr.nlist(item.index), opts);
        continue;
      }
      const auto kind = node.leaf ? HeapEntry::Kind::Entry : HeapEntry::Kind::Node;
      for (auto c : node.children) stack.push_back({kind, c});
    }
    if (marks.count() < k) kept.push_back(cand);
  }
  return kept;
}

inline RknntResult rknnt(std::span<const GeoPoint> query, std::size_t k, Semantics semantics,
                         const RrTree& rr, const TrTree& tr, const QueryOptions& opts = {},
                         QueryStats* stats = nullptr) {
  if (query.empty()) throw std::invalid_argument("query route needs at least one point");
  detail::check_k(k);
  auto t0 = std::chrono::steady_clock::now();
  auto [fs, refine] = filter_route(rr, query, k, opts);
  const double filter_ms = detail::elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  const auto cands = prune_transition(tr, query, fs, k, opts);
  const double prune_ms = detail::elapsed_ms(t0);

  t0 = std::chrono::steady_clock::now();
  const auto kept = refine_candidates(query, cands, refine, fs, rr, k, opts);
  auto result = assemble_result(keys_of(kept), semantics, k);
  const double refine_ms = detail::elapsed_ms(t0);

  if (stats) {
    stats->filter_ms += filter_ms;
    stats->prune_ms += prune_ms;
    stats->refine_ms += refine_ms;
    stats->filter_points += fs.size();
    stats->refine_items += refine.items.size();
    stats->candidates += cands.points.size();
  }
  return result;
}

/// Runs one single-point query per query point and unions their endpoint hits.
inline RknntResult rknnt_divide_conquer(std::span<const GeoPoint> query, std::size_t k,
                                        Semantics semantics, const RrTree& rr, const TrTree& tr,
                                        const QueryOptions& opts = {}, QueryStats* stats = nullptr,
                                        unsigned threads = 1) {
  if (query.empty()) throw std::invalid_argument("query route needs at least one point");
  detail::check_k(k);
  std::vector<EndpointSet> parts(query.size());
  std::vector<QueryStats> part_stats(query.size());
  auto run = [&](std::size_t i) {
    parts[i] = rknnt(query.subspan(i, 1), k, semantics, rr, tr, opts, &part_stats[i]).endpoint_hits;
  };
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(query.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < query.size(); ++i) run(i);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < query.size(); i += threads) run(i);
      });
  }
  EndpointSet hits;
  for (const auto& p : parts) hits = set_union(hits, p);
  if (stats)
    for (const auto& s : part_stats) {
      stats->filter_ms += s.filter_ms;
      stats->prune_ms += s.prune_ms;
      stats->refine_ms += s.refine_ms;
      stats->filter_points += s.filter_points;
      stats->refine_items += s.refine_items;
      stats->candidates += s.candidates;
    }
  return assemble_result(std::move(hits), semantics, k);
}

}  // namespace rknnt
