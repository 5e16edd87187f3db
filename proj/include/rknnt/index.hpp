#pragma once

// The two spatial indexes the query pipeline runs over.
//
//   RrTree  R-tree over distinct route points. Each leaf entry carries the
//           crossover set of the stop (every route through it, the PList)
//           and every node carries the ids of all routes beneath it (NList).
//   TrTree  R-tree over transition endpoints, updatable one transition at a
//           time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rknnt/binary_io.hpp"
#include "rknnt/model.hpp"
#include "rknnt/rtree.hpp"

namespace rknnt {

/// Identity of a stop location; coordinates rounded to 1e-6 km.
struct PointKey {
  std::int64_t x = 0;
  std::int64_t y = 0;

  static PointKey of(const GeoPoint& p) {
    return {static_cast<std::int64_t>(std::llround(p.x * 1e6)),
            static_cast<std::int64_t>(std::llround(p.y * 1e6))};
  }
  friend auto operator<=>(const PointKey&, const PointKey&) = default;
};

struct PointKeyHash {
  std::size_t operator()(const PointKey& k) const {
    return std::hash<std::int64_t>{}(k.x * 0x9E3779B97F4A7C15LL ^ k.y);
  }
};

using RouteSet = std::vector<RouteId>;  // sorted, duplicate-free

class RrTree {
 public:
  using Tree = RTree<std::uint32_t>;  // payload: slot into the crossover table

  RrTree() : nlist_(1) {}

  static RrTree build(std::span<const Route> routes) {
    if (routes.empty()) throw std::invalid_argument("cannot index an empty route set");
    RrTree rr;
    std::unordered_map<PointKey, std::uint32_t, PointKeyHash> slot_of;
    std::vector<std::pair<GeoPoint, std::uint32_t>> items;
    std::uint32_t max_id = 0;
    for (const auto& r : routes) {
      if (r.points.size() < 2) throw std::invalid_argument("route needs at least two points");
      max_id = std::max(max_id, to_index(r.id));
      for (const auto& p : r.points) {
        const auto key = PointKey::of(p);
        auto [it, fresh] = slot_of.try_emplace(key, static_cast<std::uint32_t>(rr.crossover_.size()));
        if (fresh) {
          rr.crossover_.emplace_back();
          rr.slot_keys_.push_back(key);
          items.emplace_back(p, it->second);
        }
        auto& crs = rr.crossover_[it->second];
        if (std::find(crs.begin(), crs.end(), r.id) == crs.end()) crs.push_back(r.id);
      }
    }
    for (auto& crs : rr.crossover_) std::sort(crs.begin(), crs.end());
    rr.route_count_ = routes.size();
    rr.route_id_bound_ = max_id + 1;
    rr.tree_ = Tree::bulk_load(items);
    rr.build_nlist();
    return rr;
  }

  const Tree& tree() const { return tree_; }

  /// Crossover set of a leaf entry.
  const RouteSet& routes_of_entry(EntryIndex e) const { return crossover_[tree_.entry(e).payload]; }

  /// Route ids of every route with a point under node `n`.
  const RouteSet& nlist(NodeIndex n) const { return nlist_[n]; }

  /// Crossover set of the stop at `p`, or empty if no route passes there.
  const RouteSet& plist(const GeoPoint& p) const {
    static const RouteSet none;
    const auto key = PointKey::of(p);
    auto it = std::lower_bound(slot_keys_sorted_.begin(), slot_keys_sorted_.end(), key,
                               [](const auto& a, const PointKey& k) { return a.first < k; });
    if (it == slot_keys_sorted_.end() || it->first != key) return none;
    return crossover_[it->second];
  }

  std::size_t route_count() const { return route_count_; }
  /// One past the largest route id; sizes per-route scratch arrays.
  std::size_t route_id_bound() const { return route_id_bound_; }
  std::size_t point_count() const { return tree_.size(); }

  void save(std::ostream& out) const {
    io::write_header(out, "RKNNTRR", kVersion);
    io::write_pod<std::uint64_t>(out, route_count_);
    io::write_pod<std::uint64_t>(out, route_id_bound_);
    tree_.save(out);
    io::write_pod<std::uint64_t>(out, crossover_.size());
    for (std::size_t i = 0; i < crossover_.size(); ++i) {
      io::write_pod(out, slot_keys_[i]);
      io::write_vec(out, crossover_[i]);
    }
    io::write_pod<std::uint64_t>(out, nlist_.size());
    for (const auto& n : nlist_) io::write_vec(out, n);
  }

  static RrTree load(std::istream& in) {
    io::read_header(in, "RKNNTRR", kVersion);
    RrTree rr;
    rr.route_count_ = io::read_pod<std::uint64_t>(in);
    rr.route_id_bound_ = io::read_pod<std::uint64_t>(in);
    rr.tree_ = Tree::load(in);
    const auto slots = io::read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < slots; ++i) {
      rr.slot_keys_.push_back(io::read_pod<PointKey>(in));
      rr.crossover_.push_back(io::read_vec<RouteId>(in));
    }
    const auto nodes = io::read_pod<std::uint64_t>(in);
    rr.nlist_.clear();
    for (std::uint64_t i = 0; i < nodes; ++i) rr.nlist_.push_back(io::read_vec<RouteId>(in));
    if (rr.nlist_.size() != rr.tree_.nodes().size()) throw io::SnapshotError("nlist size mismatch");
    rr.index_slots();
    return rr;
  }

 private:
  static constexpr std::uint32_t kVersion = 1;

  void build_nlist() {
    nlist_.assign(tree_.nodes().size(), {});
    // Post-order walk so children are finished before their parent.
    std::vector<std::pair<NodeIndex, bool>> stack{{tree_.root(), false}};
    while (!stack.empty()) {
      auto [n, visited] = stack.back();
      stack.pop_back();
      const auto& node = tree_.node(n);
      if (!visited) {
        stack.emplace_back(n, true);
        if (!node.leaf)
          for (auto c : node.children) stack.emplace_back(c, false);
        continue;
      }
      RouteSet acc;
      for (auto c : node.children) {
        const RouteSet& part = node.leaf ? routes_of_entry(c) : nlist_[c];
        acc.insert(acc.end(), part.begin(), part.end());
      }
      std::sort(acc.begin(), acc.end());
      acc.erase(std::unique(acc.begin(), acc.end()), acc.end());
      nlist_[n] = std::move(acc);
    }
    index_slots();
  }

  void index_slots() {
    slot_keys_sorted_.clear();
    for (std::uint32_t i = 0; i < slot_keys_.size(); ++i) slot_keys_sorted_.emplace_back(slot_keys_[i], i);
    std::sort(slot_keys_sorted_.begin(), slot_keys_sorted_.end());
  }

  Tree tree_;
  std::vector<RouteSet> crossover_;
  std::vector<PointKey> slot_keys_;
  std::vector<std::pair<PointKey, std::uint32_t>> slot_keys_sorted_;
  std::vector<RouteSet> nlist_;
  std::size_t route_count_ = 0;
  std::size_t route_id_bound_ = 0;
};

class TrTree {
 public:
  using Tree = RTree<EndpointKey>;

  static TrTree build(std::span<const Transition> transitions) {
    TrTree tr;
    std::vector<std::pair<GeoPoint, EndpointKey>> items;
    items.reserve(transitions.size() * 2);
    for (const auto& t : transitions) {
      if (tr.slots_.contains(to_index(t.id)))
        throw std::invalid_argument("duplicate transition id " + std::to_string(to_index(t.id)));
      const auto base = static_cast<EntryIndex>(items.size());
      tr.slots_.emplace(to_index(t.id), std::pair{base, base + 1});
      items.emplace_back(t.origin, endpoint_key(t.id, EndpointKind::Origin));
      items.emplace_back(t.destination, endpoint_key(t.id, EndpointKind::Destination));
    }
    tr.tree_ = Tree::bulk_load(items);
    return tr;
  }

  void insert(const Transition& t) {
    if (slots_.contains(to_index(t.id)))
      throw std::invalid_argument("transition " + std::to_string(to_index(t.id)) + " already indexed");
    const auto o = tree_.insert(t.origin, endpoint_key(t.id, EndpointKind::Origin));
    const auto d = tree_.insert(t.destination, endpoint_key(t.id, EndpointKind::Destination));
    slots_.emplace(to_index(t.id), std::pair{o, d});
  }

  void remove(TransitionId id) {
    auto it = slots_.find(to_index(id));
    if (it == slots_.end())
      throw std::invalid_argument("transition " + std::to_string(to_index(id)) + " not indexed");
    tree_.remove(it->second.first);
    tree_.remove(it->second.second);
    slots_.erase(it);
  }

  bool contains(TransitionId id) const { return slots_.contains(to_index(id)); }
  std::size_t transition_count() const { return slots_.size(); }
  const Tree& tree() const { return tree_; }

  TransitionPointRef ref_of(EntryIndex e) const {
    const auto& en = tree_.entry(e);
    return {transition_of(en.payload), kind_of(en.payload), en.point};
  }

  void save(std::ostream& out) const {
    io::write_header(out, "RKNNTTR", kVersion);
    tree_.save(out);
    std::map<std::uint32_t, std::pair<EntryIndex, EntryIndex>> ordered(slots_.begin(), slots_.end());
    io::write_pod<std::uint64_t>(out, ordered.size());
    for (const auto& [id, s] : ordered) {
      io::write_pod(out, id);
      io::write_pod(out, s.first);
      io::write_pod(out, s.second);
    }
  }

  static TrTree load(std::istream& in) {
    io::read_header(in, "RKNNTTR", kVersion);
    TrTree tr;
    tr.tree_ = Tree::load(in);
    const auto n = io::read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto id = io::read_pod<std::uint32_t>(in);
      const auto o = io::read_pod<EntryIndex>(in);
      const auto d = io::read_pod<EntryIndex>(in);
      tr.slots_.emplace(id, std::pair{o, d});
    }
    return tr;
  }

 private:
  static constexpr std::uint32_t kVersion = 1;
  Tree tree_;
  std::unordered_map<std::uint32_t, std::pair<EntryIndex, EntryIndex>> slots_;
};

template <class Index>
void save_file(const Index& idx, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  idx.save(out);
}

template <class Index>
Index load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return Index::load(in);
}

/// Many readers or one writer over a pair of indexes.
class SharedIndex {
 public:
  SharedIndex(RrTree rr, TrTree tr) : rr_(std::move(rr)), tr_(std::move(tr)) {}

  template <class F>
  decltype(auto) read(F&& f) const {
    std::shared_lock lock(mu_);
    return f(static_cast<const RrTree&>(rr_), static_cast<const TrTree&>(tr_));
  }

  template <class F>
  decltype(auto) write(F&& f) {
    std::unique_lock lock(mu_);
    return f(tr_);
  }

 private:
  mutable std::shared_mutex mu_;
  RrTree rr_;
  TrTree tr_;
};

}  // namespace rknnt
