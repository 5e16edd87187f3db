#pragma once

// Planar primitives used by every pruning rule in the engine.
//
// Membership in a half-plane is always decided by comparing squared
// distances to the two generating points; no line coefficients are ever
// formed. Ties (points on a bisector) are resolved in favour of the query,
// so every "contains" predicate here is strict.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <variant>

namespace rknnt {

struct GeoPoint {
  double x = 0.0;  // km, projected
  double y = 0.0;  // km, projected

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct Mbr {
  GeoPoint min;
  GeoPoint max;

  static Mbr of_point(const GeoPoint& p) { return {p, p}; }

  static Mbr empty() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {{inf, inf}, {-inf, -inf}};
  }

  bool is_empty() const { return min.x > max.x || min.y > max.y; }

  void expand(const GeoPoint& p) {
    min.x = std::min(min.x, p.x);
    min.y = std::min(min.y, p.y);
    max.x = std::max(max.x, p.x);
    max.y = std::max(max.y, p.y);
  }

  void expand(const Mbr& b) {
    if (b.is_empty()) return;
    expand(b.min);
    expand(b.max);
  }

  bool contains(const GeoPoint& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
  }

  bool contains(const Mbr& b) const { return contains(b.min) && contains(b.max); }

  double area() const { return is_empty() ? 0.0 : (max.x - min.x) * (max.y - min.y); }

  GeoPoint center() const { return {(min.x + max.x) * 0.5, (min.y + max.y) * 0.5}; }

  std::array<GeoPoint, 4> corners() const {
    return {GeoPoint{min.x, min.y}, GeoPoint{max.x, min.y}, GeoPoint{min.x, max.y},
            GeoPoint{max.x, max.y}};
  }

  friend bool operator==(const Mbr&, const Mbr&) = default;
};

inline bool is_valid(const Mbr& b) {
  return std::isfinite(b.min.x) && std::isfinite(b.min.y) && std::isfinite(b.max.x) &&
         std::isfinite(b.max.y) && b.min.x <= b.max.x && b.min.y <= b.max.y;
}

inline double squared_dist(const GeoPoint& a, const GeoPoint& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double dist(const GeoPoint& a, const GeoPoint& b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double squared_point_route_dist(const GeoPoint& t, std::span<const GeoPoint> pts) {
  if (pts.empty()) throw std::invalid_argument("empty geometry");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : pts) best = std::min(best, squared_dist(t, r));
  return best;
}

/// Minimum distance from `t` to any point of `pts` (point-to-route distance).
inline double point_route_dist(const GeoPoint& t, std::span<const GeoPoint> pts) {
  return std::sqrt(squared_point_route_dist(t, pts));
}

inline double squared_min_dist_point_mbr(const GeoPoint& q, const Mbr& box) {
  const double dx = std::max({box.min.x - q.x, 0.0, q.x - box.max.x});
  const double dy = std::max({box.min.y - q.y, 0.0, q.y - box.max.y});
  return dx * dx + dy * dy;
}

inline double min_dist_point_mbr(const GeoPoint& q, const Mbr& box) {
  return std::sqrt(squared_min_dist_point_mbr(q, box));
}

inline double squared_max_dist_point_mbr(const GeoPoint& q, const Mbr& box) {
  const double dx = std::max(std::abs(q.x - box.min.x), std::abs(q.x - box.max.x));
  const double dy = std::max(std::abs(q.y - box.min.y), std::abs(q.y - box.max.y));
  return dx * dx + dy * dy;
}

/// Distance to the farthest corner of `box`; every point of the box is at most this far.
inline double max_dist_point_mbr(const GeoPoint& q, const Mbr& box) {
  return std::sqrt(squared_max_dist_point_mbr(q, box));
}

inline double min_dist_query_mbr(std::span<const GeoPoint> query, const Mbr& box) {
  if (query.empty()) throw std::invalid_argument("empty geometry");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : query) best = std::min(best, squared_min_dist_point_mbr(q, box));
  return std::sqrt(best);
}

/// The open half-plane of points strictly closer to `anchor` than to `opponent`.
class HalfPlane {
 public:
  HalfPlane(GeoPoint anchor, GeoPoint opponent) : anchor_(anchor), opponent_(opponent) {
    if (anchor == opponent) throw std::invalid_argument("degenerate half-plane: anchor == opponent");
  }

  const GeoPoint& anchor() const { return anchor_; }
  const GeoPoint& opponent() const { return opponent_; }

 private:
  GeoPoint anchor_;
  GeoPoint opponent_;
};

namespace detail {

inline bool closer_to(const GeoPoint& p, const GeoPoint& anchor, const GeoPoint& opponent) {
  return squared_dist(p, anchor) < squared_dist(p, opponent);
}

// A half-plane is convex and a box is the hull of its corners, so the corner
// test is exact.
inline bool box_closer_to(const Mbr& box, const GeoPoint& anchor, const GeoPoint& opponent) {
  for (const auto& c : box.corners())
    if (!closer_to(c, anchor, opponent)) return false;
  return true;
}

}  // namespace detail

inline bool half_plane_contains_point(const HalfPlane& h, const GeoPoint& p) {
  return detail::closer_to(p, h.anchor(), h.opponent());
}

inline bool half_plane_contains_mbr(const HalfPlane& h, const Mbr& box) {
  return detail::box_closer_to(box, h.anchor(), h.opponent());
}

/// Either a single point or a rectangle; what the pruning predicates are asked about.
using Entry = std::variant<GeoPoint, Mbr>;

/// True iff `entry` lies inside H(r, q) for every q in `query`.
/// A filtering point coinciding with a query point yields a degenerate
/// bisector; nothing is considered contained then.
inline bool filtering_space_contains(const GeoPoint& r, std::span<const GeoPoint> query,
                                     const Entry& entry) {
  if (query.empty()) return false;
  for (const auto& q : query) {
    if (q == r) return false;
    const bool inside = std::visit(
        [&](const auto& e) {
          using E = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<E, GeoPoint>)
            return detail::closer_to(e, r, q);
          else
            return detail::box_closer_to(e, r, q);
        },
        entry);
    if (!inside) return false;
  }
  return true;
}

/// Voronoi filtering space of a whole route.
///
/// Points: exact test dist(p, route) < dist(p, query).
/// Boxes: for every query point some route point must own the whole box
/// against it. That is sufficient (never over-prunes) but not necessary,
/// since the true region is a union of cells and not convex.
inline bool voronoi_filter(std::span<const GeoPoint> route_pts, std::span<const GeoPoint> query,
                           const Entry& entry) {
  if (route_pts.empty() || query.empty()) return false;
  if (const auto* p = std::get_if<GeoPoint>(&entry)) {
    double route_best = std::numeric_limits<double>::infinity();
    for (const auto& r : route_pts) route_best = std::min(route_best, squared_dist(*p, r));
    for (const auto& q : query)
      if (squared_dist(*p, q) <= route_best) return false;
    return true;
  }
  const auto& box = std::get<Mbr>(entry);
  for (const auto& q : query) {
    bool owned = false;
    for (const auto& r : route_pts) {
      if (r != q && detail::box_closer_to(box, r, q)) {
        owned = true;
        break;
      }
    }
    if (!owned) return false;
  }
  return true;
}

}  // namespace rknnt
