#pragma once

// Dataset files, projection to planar km, GTFS conversion and synthetic data.
//
// Routes file       route_id,seq,lat,lon        one stop per line
// Transitions file  transition_id,lat1,lon1,lat2,lon2[,lat3,lon3...]
//
// A transitions row with n points becomes n-1 transitions. Internal ids are
// dense and assigned in file order; the textual ids are kept as labels.

#include <boost/tokenizer.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "rknnt/geometry.hpp"
#include "rknnt/model.hpp"

namespace rknnt::ingest {

inline constexpr double kEarthRadiusKm = 6371.0088;

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LatLon {
  double lat = 0;
  double lon = 0;
  friend bool operator==(const LatLon&, const LatLon&) = default;
};

/// Coordinates are kept at 1e-6 degree resolution so text round trips are exact.
inline double snap_degrees(double v) { return static_cast<double>(std::llround(v * 1e6)) / 1e6; }

/// Equirectangular projection around an anchor; accurate to well under 1%
/// across a few degrees, which is city scale.
struct Projection {
  LatLon anchor;

  GeoPoint project(const LatLon& p) const {
    constexpr double rad = std::numbers::pi / 180.0;
    return {kEarthRadiusKm * (p.lon - anchor.lon) * rad * std::cos(anchor.lat * rad),
            kEarthRadiusKm * (p.lat - anchor.lat) * rad};
  }

  LatLon unproject(const GeoPoint& p) const {
    constexpr double deg = 180.0 / std::numbers::pi;
    return {anchor.lat + p.y / kEarthRadiusKm * deg,
            anchor.lon + p.x / (kEarthRadiusKm * std::cos(anchor.lat / deg)) * deg};
  }
};

inline double haversine_km(const LatLon& a, const LatLon& b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad, dlon = (b.lon - a.lon) * rad;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

struct RawRoute {
  std::string label;
  std::vector<LatLon> stops;
  friend bool operator==(const RawRoute&, const RawRoute&) = default;
};

struct RawTransition {
  std::string label;
  LatLon origin;
  LatLon destination;
  friend bool operator==(const RawTransition&, const RawTransition&) = default;
};

struct RouteFile {
  std::vector<RawRoute> routes;
  std::size_t skipped = 0;  // routes with fewer than two stops
};

namespace detail {

using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;

inline std::vector<std::string> split_csv(const std::string& line) {
  std::string clean = line;
  if (!clean.empty() && clean.back() == '\r') clean.pop_back();
  Tokenizer tok(clean);
  std::vector<std::string> out(tok.begin(), tok.end());
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
  }
  return out;
}

template <class T>
T parse_number(const std::string& s, const std::string& where) {
  T v{};
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end) throw InputError(where + ": bad number '" + s + "'");
  return v;
}

inline LatLon parse_latlon(const std::string& lat, const std::string& lon, const std::string& where) {
  LatLon p{snap_degrees(parse_number<double>(lat, where)), snap_degrees(parse_number<double>(lon, where))};
  if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || std::abs(p.lat) > 90 || std::abs(p.lon) > 180)
    throw InputError(where + ": coordinate out of range");
  return p;
}

inline bool is_header(const std::vector<std::string>& f) {
  if (f.empty() || f[0].empty()) return false;
  double dummy;
  const auto* end = f.back().data() + f.back().size();
  auto [p, ec] = std::from_chars(f.back().data(), end, dummy);
  return ec != std::errc{} || p != end;
}

inline std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

inline void put_latlon(std::ostream& out, const LatLon& p) { out << ',' << p.lat << ',' << p.lon; }

/// Quotes labels that the reader would otherwise split, backslash-escaping as split_csv expects.
inline void put_label(std::ostream& out, const std::string& s) {
  if (s.find_first_of(",\"\\") == std::string::npos) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"' || c == '\\') out << '\\';
    out << c;
  }
  out << '"';
}

}  // namespace detail

inline RouteFile read_routes(std::istream& in, const std::string& name = "routes") {
  struct Row {
    std::int64_t seq;
    LatLon p;
    std::size_t line;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Row>> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv(line);
    const std::string where = name + ":" + std::to_string(n);
    if (n == 1 && detail::is_header(f)) continue;
    if (f.size() != 4) throw InputError(where + ": expected route_id,seq,lat,lon");
    if (f[0].empty()) throw InputError(where + ": empty route id");
    auto [it, fresh] = rows.try_emplace(f[0]);
    if (fresh) order.push_back(f[0]);
    it->second.push_back({detail::parse_number<std::int64_t>(f[1], where), detail::parse_latlon(f[2], f[3], where), n});
  }
  RouteFile out;
  for (const auto& id : order) {
    auto& r = rows[id];
    std::stable_sort(r.begin(), r.end(), [](const Row& a, const Row& b) { return a.seq < b.seq; });
    for (std::size_t i = 1; i < r.size(); ++i)
      if (r[i].seq == r[i - 1].seq)
        throw InputError(name + ":" + std::to_string(r[i].line) + ": duplicate seq for route " + id);
    if (r.size() < 2) {
      ++out.skipped;
      continue;
    }
    RawRoute rr{id, {}};
    for (const auto& row : r) rr.stops.push_back(row.p);
    out.routes.push_back(std::move(rr));
  }
  return out;
}

inline std::vector<RawTransition> read_transitions(std::istream& in, const std::string& name = "transitions") {
  std::vector<RawTransition> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv(line);
    const std::string where = name + ":" + std::to_string(n);
    if (n == 1 && detail::is_header(f)) continue;
    if (f.size() < 5 || f.size() % 2 == 0)
      throw InputError(where + ": expected transition_id followed by at least two lat,lon pairs");
    std::vector<LatLon> pts;
    for (std::size_t i = 1; i + 1 < f.size(); i += 2) pts.push_back(detail::parse_latlon(f[i], f[i + 1], where));
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      out.push_back({pts.size() == 2 ? f[0] : f[0] + ":" + std::to_string(i), pts[i], pts[i + 1]});
  }
  return out;
}

inline RouteFile load_routes(const std::string& path) {
  auto in = detail::open(path);
  return read_routes(in, path);
}

inline std::vector<RawTransition> load_transitions(const std::string& path) {
  auto in = detail::open(path);
  return read_transitions(in, path);
}

inline void write_routes(std::ostream& out, const std::vector<RawRoute>& routes) {
  out << "route_id,seq,lat,lon\n" << std::fixed << std::setprecision(6);
  for (const auto& r : routes)
    for (std::size_t i = 0; i < r.stops.size(); ++i) {
      detail::put_label(out, r.label);
      out << ',' << i;
      detail::put_latlon(out, r.stops[i]);
      out << '\n';
    }
}

inline void write_transitions(std::ostream& out, const std::vector<RawTransition>& ts) {
  out << "transition_id,o_lat,o_lon,d_lat,d_lon\n" << std::fixed << std::setprecision(6);
  for (const auto& t : ts) {
    detail::put_label(out, t.label);
    detail::put_latlon(out, t.origin);
    detail::put_latlon(out, t.destination);
    out << '\n';
  }
}

// Projected dataset ----------------------------------------------------------

struct Dataset {
  Projection projection;
  std::vector<RawRoute> raw_routes;
  std::vector<RawTransition> raw_transitions;
  std::vector<Route> routes;            // RouteId i is raw_routes[i]
  std::vector<Transition> transitions;  // TransitionId i is raw_transitions[i]
  std::size_t skipped_routes = 0;
};

/// Anchors the projection at the centroid of every coordinate and projects.
inline Dataset make_dataset(std::vector<RawRoute> routes, std::vector<RawTransition> transitions,
                            std::optional<LatLon> anchor = std::nullopt) {
  Dataset ds;
  if (anchor) {
    ds.projection.anchor = *anchor;
  } else {
    double lat = 0, lon = 0;
    std::size_t n = 0;
    auto add = [&](const LatLon& p) {
      lat += p.lat;
      lon += p.lon;
      ++n;
    };
    for (const auto& r : routes)
      for (const auto& s : r.stops) add(s);
    for (const auto& t : transitions) {
      add(t.origin);
      add(t.destination);
    }
    if (n) ds.projection.anchor = {snap_degrees(lat / n), snap_degrees(lon / n)};
  }
  for (std::size_t i = 0; i < routes.size(); ++i) {
    Route r{RouteId{static_cast<std::uint32_t>(i)}, {}};
    for (const auto& s : routes[i].stops) r.points.push_back(ds.projection.project(s));
    ds.routes.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < transitions.size(); ++i)
    ds.transitions.push_back({TransitionId{static_cast<std::uint32_t>(i)},
                              ds.projection.project(transitions[i].origin),
                              ds.projection.project(transitions[i].destination)});
  ds.raw_routes = std::move(routes);
  ds.raw_transitions = std::move(transitions);
  return ds;
}

inline Dataset load_dataset(const std::string& routes_path, const std::string& transitions_path) {
  auto rf = load_routes(routes_path);
  auto ds = make_dataset(std::move(rf.routes), load_transitions(transitions_path));
  ds.skipped_routes = rf.skipped;
  return ds;
}

// Manifest -----------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(ss.str());
  return hex.str();
}

struct DatasetManifest {
  LatLon anchor;
  std::size_t routes = 0;
  std::size_t route_points = 0;
  std::size_t transitions = 0;
  std::size_t skipped_routes = 0;
  LatLon bbox_min{90, 180};
  LatLon bbox_max{-90, -180};
  std::map<std::string, std::string> digests;  // file name -> FNV-1a 64 hex
};

inline DatasetManifest manifest_of(const Dataset& ds) {
  DatasetManifest m;
  m.anchor = ds.projection.anchor;
  m.routes = ds.routes.size();
  m.transitions = ds.transitions.size();
  m.skipped_routes = ds.skipped_routes;
  auto add = [&](const LatLon& p) {
    m.bbox_min = {std::min(m.bbox_min.lat, p.lat), std::min(m.bbox_min.lon, p.lon)};
    m.bbox_max = {std::max(m.bbox_max.lat, p.lat), std::max(m.bbox_max.lon, p.lon)};
  };
  for (const auto& r : ds.raw_routes) {
    m.route_points += r.stops.size();
    for (const auto& s : r.stops) add(s);
  }
  for (const auto& t : ds.raw_transitions) {
    add(t.origin);
    add(t.destination);
  }
  return m;
}

inline nlohmann::json to_json(const DatasetManifest& m) {
  return {{"anchor", {{"lat", m.anchor.lat}, {"lon", m.anchor.lon}}},
          {"counts",
           {{"routes", m.routes},
            {"route_points", m.route_points},
            {"transitions", m.transitions},
            {"skipped_routes", m.skipped_routes}}},
          {"bbox",
           {{"min_lat", m.bbox_min.lat}, {"min_lon", m.bbox_min.lon}, {"max_lat", m.bbox_max.lat}, {"max_lon", m.bbox_max.lon}}},
          {"digests", m.digests}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.anchor = {j.at("anchor").at("lat"), j.at("anchor").at("lon")};
  const auto& c = j.at("counts");
  m.routes = c.at("routes");
  m.route_points = c.at("route_points");
  m.transitions = c.at("transitions");
  m.skipped_routes = c.at("skipped_routes");
  const auto& b = j.at("bbox");
  m.bbox_min = {b.at("min_lat"), b.at("min_lon")};
  m.bbox_max = {b.at("max_lat"), b.at("max_lon")};
  m.digests = j.at("digests").get<std::map<std::string, std::string>>();
  return m;
}

// GTFS ---------------------------------------------------------------------

namespace detail {

/// Reads a GTFS table into rows keyed by column name.
template <class F>
void for_each_gtfs_row(const std::string& path, F&& f) {
  auto in = open(path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file");
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  const auto header = split_csv(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv(line);
    auto get = [&](const std::string& name) -> const std::string& {
      auto it = col.find(name);
      if (it == col.end()) throw InputError(path + ": missing column " + name);
      if (it->second >= fields.size()) throw InputError(path + ":" + std::to_string(n) + ": short row");
      return fields[it->second];
    };
    f(get, path + ":" + std::to_string(n));
  }
}

}  // namespace detail

/// One representative trip per GTFS route: the trip with the most stops,
/// ties broken by the smaller trip_id. Routes come out sorted by route_id.
inline RouteFile convert_gtfs(const std::string& dir) {
  std::unordered_map<std::string, LatLon> stops;
  detail::for_each_gtfs_row(dir + "/stops.txt", [&](auto& get, const std::string& where) {
    stops[get("stop_id")] = detail::parse_latlon(get("stop_lat"), get("stop_lon"), where);
  });
  std::unordered_map<std::string, std::string> route_of_trip;
  detail::for_each_gtfs_row(dir + "/trips.txt",
                            [&](auto& get, const std::string&) { route_of_trip[get("trip_id")] = get("route_id"); });
  std::unordered_map<std::string, std::vector<std::pair<std::int64_t, std::string>>> trip_stops;
  detail::for_each_gtfs_row(dir + "/stop_times.txt", [&](auto& get, const std::string& where) {
    trip_stops[get("trip_id")].emplace_back(detail::parse_number<std::int64_t>(get("stop_sequence"), where),
                                            get("stop_id"));
  });
  std::map<std::string, std::string> chosen;  // route_id -> trip_id
  for (const auto& [trip, seq] : trip_stops) {
    auto r = route_of_trip.find(trip);
    if (r == route_of_trip.end()) throw InputError("stop_times references unknown trip " + trip);
    auto [it, fresh] = chosen.try_emplace(r->second, trip);
    if (fresh) continue;
    const auto& cur = trip_stops[it->second];
    if (seq.size() > cur.size() || (seq.size() == cur.size() && trip < it->second)) it->second = trip;
  }
  RouteFile out;
  for (const auto& [route, trip] : chosen) {
    auto seq = trip_stops[trip];
    std::sort(seq.begin(), seq.end());
    RawRoute rr{route, {}};
    for (const auto& [s, stop] : seq) {
      auto it = stops.find(stop);
      if (it == stops.end()) throw InputError("stop_times references unknown stop " + stop);
      if (rr.stops.empty() || !(rr.stops.back() == it->second)) rr.stops.push_back(it->second);
    }
    if (rr.stops.size() < 2) {
      ++out.skipped;
      continue;
    }
    out.routes.push_back(std::move(rr));
  }
  return out;
}

// Synthetic data -------------------------------------------------------------

/// n transitions with both endpoints uniform in `box` (planar km).
inline std::vector<Transition> gen_synthetic_transitions(std::size_t n, const Mbr& box, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("need at least one transition");
  if (!is_valid(box)) throw std::invalid_argument("invalid bounding box");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(box.min.x, box.max.x), uy(box.min.y, box.max.y);
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const GeoPoint o{ux(rng), uy(rng)};
    const GeoPoint d{ux(rng), uy(rng)};
    out.push_back({TransitionId{static_cast<std::uint32_t>(i)}, o, d});
  }
  return out;
}

/// Random-walk routes inside `box`: `stops` stops spaced `spacing_km` apart,
/// turning by at most 45 degrees per stop and reflecting off the box edges.
inline std::vector<Route> gen_synthetic_routes(std::size_t n, std::size_t stops, double spacing_km, const Mbr& box,
                                               std::uint64_t seed) {
  if (stops < 2) throw std::invalid_argument("a route needs at least two stops");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(box.min.x, box.max.x), uy(box.min.y, box.max.y);
  std::uniform_real_distribution<double> heading0(0, 2 * std::numbers::pi), turn(-std::numbers::pi / 4, std::numbers::pi / 4);
  std::vector<Route> out;
  for (std::size_t i = 0; i < n; ++i) {
    Route r{RouteId{static_cast<std::uint32_t>(i)}, {{ux(rng), uy(rng)}}};
    double h = heading0(rng);
    while (r.points.size() < stops) {
      h += turn(rng);
      GeoPoint p{r.points.back().x + spacing_km * std::cos(h), r.points.back().y + spacing_km * std::sin(h)};
      if (p.x < box.min.x || p.x > box.max.x) h = std::numbers::pi - h;
      if (p.y < box.min.y || p.y > box.max.y) h = -h;
      p = {std::clamp(r.points.back().x + spacing_km * std::cos(h), box.min.x, box.max.x),
           std::clamp(r.points.back().y + spacing_km * std::sin(h), box.min.y, box.max.y)};
      r.points.push_back(p);
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Query routes that start at a random route point and walk `qlen - 1` steps
/// of `interval_km`, each turning by a uniform angle in [-90, 90] degrees.
inline std::vector<QueryRoute> gen_queries(std::size_t count, std::size_t qlen, double interval_km, std::uint64_t seed,
                                           std::span<const GeoPoint> route_points) {
  if (route_points.empty()) throw std::invalid_argument("no route points to start from");
  if (qlen == 0) throw std::invalid_argument("query length must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, route_points.size() - 1);
  std::uniform_real_distribution<double> heading0(0, 2 * std::numbers::pi);
  std::uniform_real_distribution<double> turn(-std::numbers::pi / 2, std::numbers::pi / 2);
  std::vector<QueryRoute> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<GeoPoint> pts{route_points[pick(rng)]};
    double h = heading0(rng);
    for (std::size_t j = 1; j < qlen; ++j) {
      if (j > 1) h += turn(rng);
      pts.push_back({pts.back().x + interval_km * std::cos(h), pts.back().y + interval_km * std::sin(h)});
    }
    out.emplace_back(std::move(pts));
  }
  return out;
}

}  // namespace rknnt::ingest
