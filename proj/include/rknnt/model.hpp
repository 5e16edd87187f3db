#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rknnt/geometry.hpp"

namespace rknnt {

// Dense identifiers assigned at ingestion. External ids live in side tables.
enum class RouteId : std::uint32_t {};
enum class TransitionId : std::uint32_t {};

constexpr std::uint32_t to_index(RouteId id) { return static_cast<std::uint32_t>(id); }
constexpr std::uint32_t to_index(TransitionId id) { return static_cast<std::uint32_t>(id); }

struct Route {
  RouteId id{};
  std::vector<GeoPoint> points;
};

struct Transition {
  TransitionId id{};
  GeoPoint origin;
  GeoPoint destination;
};

enum class EndpointKind : std::uint8_t { Origin = 0, Destination = 1 };

/// Compact, totally ordered key for one endpoint of one transition.
enum class EndpointKey : std::uint64_t {};

constexpr EndpointKey endpoint_key(TransitionId id, EndpointKind kind) {
  return static_cast<EndpointKey>((std::uint64_t{to_index(id)} << 1) |
                                  static_cast<std::uint64_t>(kind));
}
constexpr TransitionId transition_of(EndpointKey key) {
  return static_cast<TransitionId>(static_cast<std::uint64_t>(key) >> 1);
}
constexpr EndpointKind kind_of(EndpointKey key) {
  return static_cast<EndpointKind>(static_cast<std::uint64_t>(key) & 1U);
}

struct TransitionPointRef {
  TransitionId transition{};
  EndpointKind kind = EndpointKind::Origin;
  GeoPoint location;

  EndpointKey key() const { return endpoint_key(transition, kind); }
};

inline TransitionPointRef origin_ref(const Transition& t) {
  return {t.id, EndpointKind::Origin, t.origin};
}
inline TransitionPointRef destination_ref(const Transition& t) {
  return {t.id, EndpointKind::Destination, t.destination};
}

struct QueryRoute {
  std::vector<GeoPoint> points;

  QueryRoute() = default;
  explicit QueryRoute(std::vector<GeoPoint> pts) : points(std::move(pts)) {
    if (points.empty()) throw std::invalid_argument("query route needs at least one point");
  }
  std::span<const GeoPoint> view() const { return points; }
};

enum class Semantics { Exists, ForAll };

/// Sorted, duplicate-free endpoint set. Unions and containment are linear merges.
using EndpointSet = std::vector<EndpointKey>;

inline void normalize(EndpointSet& s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
}

inline EndpointSet set_union(const EndpointSet& a, const EndpointSet& b) {
  EndpointSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline bool includes(const EndpointSet& super, const EndpointSet& sub) {
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

/// Transitions with at least one endpoint in `hits`.
inline std::vector<TransitionId> exists_transitions(const EndpointSet& hits) {
  std::vector<TransitionId> out;
  for (auto key : hits) {
    const auto id = transition_of(key);
    if (out.empty() || out.back() != id) out.push_back(id);
  }
  return out;
}

/// Transitions with both endpoints in `hits`.
inline std::vector<TransitionId> forall_transitions(const EndpointSet& hits) {
  std::vector<TransitionId> out;
  // Sorted keys place a transition's origin immediately before its destination.
  for (std::size_t i = 0; i + 1 < hits.size(); ++i) {
    if (transition_of(hits[i]) == transition_of(hits[i + 1])) {
      out.push_back(transition_of(hits[i]));
      ++i;
    }
  }
  return out;
}

inline std::size_t exists_count(const EndpointSet& hits) { return exists_transitions(hits).size(); }
inline std::size_t forall_count(const EndpointSet& hits) { return forall_transitions(hits).size(); }

inline std::size_t semantic_count(const EndpointSet& hits, Semantics s) {
  return s == Semantics::Exists ? exists_count(hits) : forall_count(hits);
}

struct RknntResult {
  Semantics semantics = Semantics::Exists;
  std::size_t k = 1;
  std::vector<TransitionId> transitions;  // ascending
  EndpointSet endpoint_hits;              // ascending
};

inline RknntResult assemble_result(EndpointSet hits, Semantics semantics, std::size_t k) {
  normalize(hits);
  RknntResult r;
  r.semantics = semantics;
  r.k = k;
  r.transitions =
      semantics == Semantics::Exists ? exists_transitions(hits) : forall_transitions(hits);
  r.endpoint_hits = std::move(hits);
  return r;
}

inline EndpointSet keys_of(std::span<const TransitionPointRef> refs) {
  EndpointSet out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(r.key());
  normalize(out);
  return out;
}

inline std::string to_string(Semantics s) { return s == Semantics::Exists ? "exists" : "forall"; }

inline Semantics parse_semantics(const std::string& s) {
  if (s == "exists") return Semantics::Exists;
  if (s == "forall") return Semantics::ForAll;
  throw std::invalid_argument("unknown semantics: " + s);
}

}  // namespace rknnt
