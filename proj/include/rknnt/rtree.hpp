#pragma once

// A 2-D point R-tree with STR bulk loading, Guttman insertion with quadratic
// split, and leaf deletion without reinsertion.
//
// Nodes and entries live in flat arrays and refer to each other by index so
// the whole structure serializes as a few tables. Payloads are small
// trivially-copyable values; richer per-point data lives beside the tree.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "rknnt/binary_io.hpp"
#include "rknnt/geometry.hpp"

namespace rknnt {

using NodeIndex = std::uint32_t;
using EntryIndex = std::uint32_t;
inline constexpr std::uint32_t kNoIndex = std::numeric_limits<std::uint32_t>::max();

template <class Payload>
  requires std::is_trivially_copyable_v<Payload>
class RTree {
 public:
  static constexpr std::size_t kMaxEntries = 32;
  static constexpr std::size_t kMinEntries = 13;  // ceil(0.4 * kMaxEntries)

  struct Node {
    Mbr box = Mbr::empty();
    NodeIndex parent = kNoIndex;
    bool leaf = true;
    std::vector<std::uint32_t> children;  // node indices, or entry indices for leaves
  };

  struct Entry {
    GeoPoint point;
    Payload payload{};
    NodeIndex leaf = kNoIndex;
    bool alive = false;
  };

  RTree() { nodes_.push_back(Node{}); }

  static RTree bulk_load(std::span<const std::pair<GeoPoint, Payload>> items) {
    RTree t;
    if (items.empty()) return t;
    t.nodes_.clear();
    t.entries_.reserve(items.size());
    for (const auto& [p, payload] : items) t.entries_.push_back(Entry{p, payload, kNoIndex, true});
    t.live_ = items.size();

    std::vector<std::uint32_t> level(items.size());
    std::iota(level.begin(), level.end(), 0U);
    std::vector<GeoPoint> centers(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) centers[i] = items[i].first;

    bool leaf = true;
    for (;;) {
      auto groups = str_pack(level, centers);
      std::vector<std::uint32_t> next;
      std::vector<GeoPoint> next_centers;
      for (auto& g : groups) {
        const auto ni = static_cast<NodeIndex>(t.nodes_.size());
        Node n;
        n.leaf = leaf;
        n.children = std::move(g);
        for (auto c : n.children) {
          if (leaf) {
            t.entries_[c].leaf = ni;
            n.box.expand(t.entries_[c].point);
          } else {
            t.nodes_[c].parent = ni;
            n.box.expand(t.nodes_[c].box);
          }
        }
        next_centers.push_back(n.box.center());
        t.nodes_.push_back(std::move(n));
        next.push_back(ni);
      }
      leaf = false;
      if (next.size() == 1) {
        t.root_ = next.front();
        break;
      }
      level = std::move(next);
      centers.assign(t.nodes_.size(), GeoPoint{});
      for (std::size_t i = 0; i < level.size(); ++i) centers[level[i]] = next_centers[i];
    }
    return t;
  }

  EntryIndex insert(const GeoPoint& p, const Payload& payload) {
    EntryIndex ei;
    if (!free_entries_.empty()) {
      ei = free_entries_.back();
      free_entries_.pop_back();
      entries_[ei] = Entry{p, payload, kNoIndex, true};
    } else {
      ei = static_cast<EntryIndex>(entries_.size());
      entries_.push_back(Entry{p, payload, kNoIndex, true});
    }
    const NodeIndex leaf = choose_leaf(p);
    nodes_[leaf].children.push_back(ei);
    entries_[ei].leaf = leaf;
    ++live_;
    grow_upward(leaf, Mbr::of_point(p));
    if (nodes_[leaf].children.size() > kMaxEntries) split_upward(leaf);
    return ei;
  }

  /// Removes a live entry. Ancestor boxes are re-tightened; the tree is not rebalanced.
  void remove(EntryIndex ei) {
    if (ei >= entries_.size() || !entries_[ei].alive) throw std::out_of_range("no such entry");
    auto& e = entries_[ei];
    auto& kids = nodes_[e.leaf].children;
    kids.erase(std::find(kids.begin(), kids.end(), ei));
    const NodeIndex leaf = e.leaf;
    e.alive = false;
    e.leaf = kNoIndex;
    free_entries_.push_back(ei);
    --live_;
    for (NodeIndex n = leaf; n != kNoIndex; n = nodes_[n].parent) recompute_box(n);
  }

  NodeIndex root() const { return root_; }
  const Node& node(NodeIndex i) const { return nodes_[i]; }
  const Entry& entry(EntryIndex i) const { return entries_[i]; }
  std::span<const Node> nodes() const { return nodes_; }
  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return live_; }
  bool empty() const { return live_ == 0; }

  /// Calls f(entry_index) for every live entry under `n`.
  template <class F>
  void for_each_entry_under(NodeIndex n, F&& f) const {
    std::vector<NodeIndex> stack{n};
    while (!stack.empty()) {
      const auto& node = nodes_[stack.back()];
      stack.pop_back();
      if (node.leaf)
        for (auto c : node.children) f(c);
      else
        for (auto c : node.children) stack.push_back(c);
    }
  }

  std::size_t height() const {
    std::size_t h = 1;
    for (NodeIndex n = root_; !nodes_[n].leaf; n = nodes_[n].children.front()) ++h;
    return h;
  }

  void save(std::ostream& out) const {
    io::write_pod<std::uint32_t>(out, root_);
    io::write_pod<std::uint64_t>(out, live_);
    io::write_pod<std::uint64_t>(out, nodes_.size());
    for (const auto& n : nodes_) {
      io::write_pod(out, n.box);
      io::write_pod(out, n.parent);
      io::write_pod<std::uint8_t>(out, n.leaf ? 1 : 0);
      io::write_vec(out, n.children);
    }
    io::write_pod<std::uint64_t>(out, entries_.size());
    for (const auto& e : entries_) {
      io::write_pod(out, e.point);
      io::write_pod(out, e.payload);
      io::write_pod(out, e.leaf);
      io::write_pod<std::uint8_t>(out, e.alive ? 1 : 0);
    }
    io::write_vec(out, free_entries_);
  }

  static RTree load(std::istream& in) {
    RTree t;
    t.nodes_.clear();
    t.root_ = io::read_pod<std::uint32_t>(in);
    t.live_ = io::read_pod<std::uint64_t>(in);
    const auto n_nodes = io::read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < n_nodes; ++i) {
      Node n;
      n.box = io::read_pod<Mbr>(in);
      n.parent = io::read_pod<NodeIndex>(in);
      n.leaf = io::read_pod<std::uint8_t>(in) != 0;
      n.children = io::read_vec<std::uint32_t>(in);
      t.nodes_.push_back(std::move(n));
    }
    const auto n_entries = io::read_pod<std::uint64_t>(in);
    t.entries_.reserve(n_entries);
    for (std::uint64_t i = 0; i < n_entries; ++i) {
      Entry e;
      e.point = io::read_pod<GeoPoint>(in);
      e.payload = io::read_pod<Payload>(in);
      e.leaf = io::read_pod<NodeIndex>(in);
      e.alive = io::read_pod<std::uint8_t>(in) != 0;
      t.entries_.push_back(e);
    }
    t.free_entries_ = io::read_vec<EntryIndex>(in);
    if (t.nodes_.empty() || t.root_ >= t.nodes_.size())
      throw io::SnapshotError("corrupt tree: bad root");
    return t;
  }

 private:
  // Sort-tile-recursive packing of `ids` (positions in `centers`) into groups of kMaxEntries.
  static std::vector<std::vector<std::uint32_t>> str_pack(std::vector<std::uint32_t> ids,
                                                          const std::vector<GeoPoint>& centers) {
    const std::size_t n = ids.size();
    const std::size_t pages = (n + kMaxEntries - 1) / kMaxEntries;
    const auto slices = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(pages))));
    const std::size_t per_slice = slices * kMaxEntries;
    auto by_x = [&](std::uint32_t a, std::uint32_t b) {
      const auto &pa = centers[a], &pb = centers[b];
      if (pa.x != pb.x) return pa.x < pb.x;
      if (pa.y != pb.y) return pa.y < pb.y;
      return a < b;
    };
    auto by_y = [&](std::uint32_t a, std::uint32_t b) {
      const auto &pa = centers[a], &pb = centers[b];
      if (pa.y != pb.y) return pa.y < pb.y;
      if (pa.x != pb.x) return pa.x < pb.x;
      return a < b;
    };
    std::sort(ids.begin(), ids.end(), by_x);
    std::vector<std::vector<std::uint32_t>> groups;
    for (std::size_t s = 0; s < n; s += per_slice) {
      const auto end = std::min(n, s + per_slice);
      std::sort(ids.begin() + static_cast<std::ptrdiff_t>(s),
                ids.begin() + static_cast<std::ptrdiff_t>(end), by_y);
      for (std::size_t g = s; g < end; g += kMaxEntries)
        groups.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(g),
                            ids.begin() + static_cast<std::ptrdiff_t>(std::min(end, g + kMaxEntries)));
    }
    return groups;
  }

  static double enlargement(const Mbr& box, const Mbr& add) {
    if (box.is_empty()) return 0.0;
    Mbr u = box;
    u.expand(add);
    return u.area() - box.area();
  }

  NodeIndex choose_leaf(const GeoPoint& p) const {
    NodeIndex n = root_;
    const Mbr pb = Mbr::of_point(p);
    while (!nodes_[n].leaf) {
      NodeIndex best = kNoIndex;
      double best_enl = 0, best_area = 0;
      for (auto c : nodes_[n].children) {
        const double enl = enlargement(nodes_[c].box, pb);
        const double area = nodes_[c].box.area();
        if (best == kNoIndex || enl < best_enl || (enl == best_enl && area < best_area)) {
          best = c;
          best_enl = enl;
          best_area = area;
        }
      }
      n = best;
    }
    return n;
  }

  void grow_upward(NodeIndex n, const Mbr& add) {
    for (; n != kNoIndex; n = nodes_[n].parent) nodes_[n].box.expand(add);
  }

  Mbr child_box(const Node& n, std::uint32_t c) const {
    return n.leaf ? Mbr::of_point(entries_[c].point) : nodes_[c].box;
  }

  void recompute_box(NodeIndex ni) {
    auto& n = nodes_[ni];
    Mbr b = Mbr::empty();
    for (auto c : n.children) b.expand(child_box(n, c));
    n.box = b;
  }

  void split_upward(NodeIndex ni) {
    while (ni != kNoIndex && nodes_[ni].children.size() > kMaxEntries) {
      const NodeIndex sibling = quadratic_split(ni);
      NodeIndex parent = nodes_[ni].parent;
      if (parent == kNoIndex) {
        parent = static_cast<NodeIndex>(nodes_.size());
        Node root;
        root.leaf = false;
        root.children = {ni};
        nodes_.push_back(std::move(root));
        nodes_[ni].parent = parent;
        root_ = parent;
      }
      nodes_[parent].children.push_back(sibling);
      nodes_[sibling].parent = parent;
      recompute_box(parent);
      ni = parent;
    }
  }

  // Guttman's quadratic split. Moves part of ni's children into a new node and returns it.
  NodeIndex quadratic_split(NodeIndex ni) {
    std::vector<std::uint32_t> items = std::move(nodes_[ni].children);
    const bool leaf = nodes_[ni].leaf;
    std::vector<Mbr> boxes;
    boxes.reserve(items.size());
    for (auto c : items) boxes.push_back(leaf ? Mbr::of_point(entries_[c].point) : nodes_[c].box);

    std::size_t s1 = 0, s2 = 1;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < items.size(); ++i)
      for (std::size_t j = i + 1; j < items.size(); ++j) {
        Mbr u = boxes[i];
        u.expand(boxes[j]);
        const double d = u.area() - boxes[i].area() - boxes[j].area();
        if (d > worst) {
          worst = d;
          s1 = i;
          s2 = j;
        }
      }

    std::vector<std::uint32_t> g1{items[s1]}, g2{items[s2]};
    Mbr b1 = boxes[s1], b2 = boxes[s2];
    std::vector<bool> done(items.size(), false);
    done[s1] = done[s2] = true;
    std::size_t remaining = items.size() - 2;
    while (remaining > 0) {
      if (g1.size() + remaining == kMinEntries || g2.size() + remaining == kMinEntries) {
        auto& g = g1.size() + remaining == kMinEntries ? g1 : g2;
        auto& b = g1.size() + remaining == kMinEntries ? b1 : b2;
        for (std::size_t i = 0; i < items.size(); ++i)
          if (!done[i]) {
            g.push_back(items[i]);
            b.expand(boxes[i]);
            done[i] = true;
          }
        break;
      }
      std::size_t pick = 0;
      double best_diff = -1;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (done[i]) continue;
        const double diff = std::abs(enlargement(b1, boxes[i]) - enlargement(b2, boxes[i]));
        if (diff > best_diff) {
          best_diff = diff;
          pick = i;
        }
      }
      const double e1 = enlargement(b1, boxes[pick]);
      const double e2 = enlargement(b2, boxes[pick]);
      bool to_first;
      if (e1 != e2)
        to_first = e1 < e2;
      else if (b1.area() != b2.area())
        to_first = b1.area() < b2.area();
      else
        to_first = g1.size() <= g2.size();
      (to_first ? g1 : g2).push_back(items[pick]);
      (to_first ? b1 : b2).expand(boxes[pick]);
      done[pick] = true;
      --remaining;
    }

    const auto sibling = static_cast<NodeIndex>(nodes_.size());
    Node sib;
    sib.leaf = leaf;
    sib.children = std::move(g2);
    sib.box = b2;
    nodes_.push_back(std::move(sib));
    nodes_[ni].children = std::move(g1);
    nodes_[ni].box = b1;
    for (auto c : nodes_[sibling].children) {
      if (leaf)
        entries_[c].leaf = sibling;
      else
        nodes_[c].parent = sibling;
    }
    return sibling;
  }

  std::vector<Node> nodes_;
  std::vector<Entry> entries_;
  std::vector<EntryIndex> free_entries_;
  NodeIndex root_ = 0;
  std::size_t live_ = 0;
};

/// One item of a best-first traversal.
struct HeapEntry {
  enum class Kind : std::uint8_t { Node, Entry };
  Kind kind = Kind::Node;
  std::uint32_t index = 0;
  double key = 0.0;  // km from the query
};

/// Best-first cursor over an RTree: yields nodes and entries in
/// non-decreasing distance to the query. Yielded nodes are not expanded
/// unless the caller asks for it, so callers prune by simply not expanding.
template <class Tree>
class BestFirst {
 public:
  BestFirst(const Tree& tree, std::span<const GeoPoint> query) : tree_(tree), query_(query) {
    if (query_.empty()) throw std::invalid_argument("empty geometry");
    const auto& root = tree_.node(tree_.root());
    if (!root.box.is_empty()) push_node(tree_.root());
  }

  bool done() const { return heap_.empty(); }

  HeapEntry next() {
    HeapEntry top = heap_.top().e;
    heap_.pop();
    return top;
  }

  void expand(const HeapEntry& e) {
    if (e.kind != HeapEntry::Kind::Node) return;
    const auto& n = tree_.node(e.index);
    for (auto c : n.children) {
      if (n.leaf)
        push_entry(c);
      else if (!tree_.node(c).box.is_empty())
        push_node(c);
    }
  }

 private:
  struct Item {
    HeapEntry e;
    std::uint64_t seq;
    bool operator>(const Item& o) const {
      if (e.key != o.e.key) return e.key > o.e.key;
      return seq > o.seq;
    }
  };

  void push_node(NodeIndex n) {
    heap_.push(Item{{HeapEntry::Kind::Node, n, min_dist_query_mbr(query_, tree_.node(n).box)}, seq_++});
  }
  void push_entry(EntryIndex i) {
    heap_.push(Item{{HeapEntry::Kind::Entry, i, point_route_dist(tree_.entry(i).point, query_)}, seq_++});
  }

  const Tree& tree_;
  std::span<const GeoPoint> query_;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap_;
  std::uint64_t seq_ = 0;
};

}  // namespace rknnt
