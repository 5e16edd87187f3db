#pragma once

// Command-line front end. `run` is the whole program so tests can drive it.
//
// Index directory layout written by `build`:
//   routes.csv transitions.csv   normalized copies of the inputs
//   rr.bin tr.bin graph.bin      snapshots (graph.bin is replaced by `precompute`)
//   manifest.json

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rknnt/graph.hpp"
#include "rknnt/index.hpp"
#include "rknnt/ingest.hpp"
#include "rknnt/oracle.hpp"
#include "rknnt/planner.hpp"
#include "rknnt/query.hpp"

namespace rknnt::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitMismatch = 3;

inline constexpr int kBenchSchemaVersion = 1;
inline constexpr const char* kBenchHeader =
    "schema,kind,method,k,qlen,interval_km,td_se_km,tau_ratio,queries,repetitions,seed,"
    "wall_ms,filter_ms,prune_ms,refine_ms,result_size";

struct SelfCheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IndexDir {
  ingest::Dataset ds;
  ingest::DatasetManifest manifest;
  RrTree rr;
  TrTree tr;
  TransitGraph graph;
};

inline IndexDir load_index(const fs::path& dir) {
  IndexDir ix;
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw ingest::InputError("no manifest in " + dir.string());
  ix.manifest = ingest::manifest_from_json(nlohmann::json::parse(mf));
  auto rf = ingest::load_routes((dir / "routes.csv").string());
  ix.ds = ingest::make_dataset(std::move(rf.routes), ingest::load_transitions((dir / "transitions.csv").string()),
                               ix.manifest.anchor);
  ix.rr = load_file<RrTree>((dir / "rr.bin").string());
  ix.tr = load_file<TrTree>((dir / "tr.bin").string());
  ix.graph = load_file<TransitGraph>((dir / "graph.bin").string());
  return ix;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep))
    if (!part.empty()) out.push_back(part);
  return out;
}

inline ingest::LatLon parse_latlon_arg(const std::string& s) {
  const auto f = split(s, ',');
  if (f.size() != 2) throw ingest::InputError("expected lat,lon but got '" + s + "'");
  return ingest::detail::parse_latlon(f[0], f[1], "argument");
}

/// Vertex given as an integer id or as the lat,lon of a stop.
inline VertexId parse_vertex(const std::string& s, const IndexDir& ix) {
  if (s.find(',') == std::string::npos) {
    const auto v = ingest::detail::parse_number<std::uint32_t>(s, "vertex");
    ix.graph.check_vertex(v);
    return v;
  }
  const auto v = ix.graph.vertex_at(ix.ds.projection.project(parse_latlon_arg(s)));
  if (!v) throw ingest::InputError("no stop at " + s);
  return *v;
}

inline Mbr parse_bbox(const std::string& s, ingest::Projection& proj) {
  const auto f = split(s, ',');
  if (f.size() != 4) throw ingest::InputError("expected min_lat,min_lon,max_lat,max_lon");
  const ingest::LatLon lo = ingest::detail::parse_latlon(f[0], f[1], "bbox");
  const ingest::LatLon hi = ingest::detail::parse_latlon(f[2], f[3], "bbox");
  if (!(lo.lat < hi.lat && lo.lon < hi.lon)) throw ingest::InputError("empty bbox");
  proj.anchor = {ingest::snap_degrees((lo.lat + hi.lat) / 2), ingest::snap_degrees((lo.lon + hi.lon) / 2)};
  Mbr box = Mbr::of_point(proj.project(lo));
  box.expand(proj.project(hi));
  return box;
}

enum class QueryMethod { FilterRefine, Voronoi, DivideConquer, Oracle };

inline QueryMethod parse_query_method(const std::string& s) {
  if (s == "filter-refine") return QueryMethod::FilterRefine;
  if (s == "voronoi") return QueryMethod::Voronoi;
  if (s == "divide-conquer") return QueryMethod::DivideConquer;
  if (s == "oracle") return QueryMethod::Oracle;
  throw ingest::InputError("unknown query method: " + s);
}

inline RknntResult run_query(QueryMethod m, std::span<const GeoPoint> q, std::size_t k, Semantics sem,
                             const IndexDir& ix, std::optional<RouteId> masked, unsigned threads,
                             QueryStats* stats = nullptr) {
  QueryOptions opts;
  opts.masked_route = masked;
  switch (m) {
    case QueryMethod::FilterRefine:
      opts.use_voronoi = false;
      return rknnt(q, k, sem, ix.rr, ix.tr, opts, stats);
    case QueryMethod::Voronoi: return rknnt(q, k, sem, ix.rr, ix.tr, opts, stats);
    case QueryMethod::DivideConquer: return rknnt_divide_conquer(q, k, sem, ix.rr, ix.tr, opts, stats, threads);
    case QueryMethod::Oracle: return oracle::rknnt_bruteforce(q, k, sem, ix.ds.routes, ix.ds.transitions, masked);
  }
  throw std::logic_error("unreachable");
}

inline void print_path(std::ostream& out, const PlanResult& r, Semantics sem) {
  out << "path:";
  for (auto v : r.path) out << ' ' << v;
  out << "\ncount: " << r.count(sem) << "\ntd: " << std::setprecision(12) << r.td << '\n';
}

// Commands -----------------------------------------------------------------

inline void cmd_build(const std::string& routes, const std::string& transitions, const fs::path& out_dir,
                      std::ostream& out) {
  auto ds = ingest::load_dataset(routes, transitions);
  if (ds.routes.empty()) throw ingest::InputError("no usable routes in " + routes);
  fs::create_directories(out_dir);
  {
    std::ofstream r(out_dir / "routes.csv");
    ingest::write_routes(r, ds.raw_routes);
    std::ofstream t(out_dir / "transitions.csv");
    ingest::write_transitions(t, ds.raw_transitions);
  }
  save_file(RrTree::build(ds.routes), (out_dir / "rr.bin").string());
  save_file(TrTree::build(ds.transitions), (out_dir / "tr.bin").string());
  save_file(build_graph(ds.routes), (out_dir / "graph.bin").string());
  auto m = ingest::manifest_of(ds);
  m.digests["input:routes"] = ingest::file_digest(routes);
  m.digests["input:transitions"] = ingest::file_digest(transitions);
  for (const char* f : {"routes.csv", "transitions.csv", "rr.bin", "tr.bin", "graph.bin"})
    m.digests[f] = ingest::file_digest((out_dir / f).string());
  std::ofstream(out_dir / "manifest.json") << ingest::to_json(m).dump(2) << '\n';
  out << "routes: " << m.routes << " (skipped " << m.skipped_routes << ")\ntransitions: " << m.transitions
      << "\nstops: " << m.route_points << '\n';
  if (ds.skipped_routes) std::cerr << "warning: skipped " << ds.skipped_routes << " routes with fewer than two stops\n";
}

inline void cmd_precompute(const fs::path& dir, std::size_t k, unsigned threads, std::ostream& out) {
  auto ix = load_index(dir);
  PrecomputeOptions opts;
  opts.threads = threads;
  const auto t0 = std::chrono::steady_clock::now();
  precompute(ix.graph, ix.rr, ix.tr, k, opts);
  save_file(ix.graph, (dir / "graph.bin").string());
  out << "vertices: " << ix.graph.vertex_count() << "\nedges: " << ix.graph.edge_count() << "\nk: " << k
      << "\nmatrix: " << (ix.graph.has_matrix() ? "dense" : "on-demand") << "\nms: " << detail::elapsed_ms(t0) << '\n';
}

struct QueryArgs {
  std::string points;
  std::string route;
  std::size_t k = 10;
  std::string semantics = "exists";
  std::string method = "voronoi";
  bool self_check = false;
  unsigned threads = 1;
};

inline void cmd_query(const fs::path& dir, const QueryArgs& a, std::ostream& out) {
  const auto ix = load_index(dir);
  std::vector<GeoPoint> q;
  std::optional<RouteId> masked;
  if (!a.route.empty()) {
    for (std::size_t i = 0; i < ix.ds.raw_routes.size(); ++i)
      if (ix.ds.raw_routes[i].label == a.route) {
        q = ix.ds.routes[i].points;
        masked = ix.ds.routes[i].id;
      }
    if (!masked) throw ingest::InputError("unknown route " + a.route);
  } else {
    for (const auto& p : split(a.points, ';')) q.push_back(ix.ds.projection.project(parse_latlon_arg(p)));
  }
  if (q.empty()) throw ingest::InputError("give --points or --route");
  const auto sem = parse_semantics(a.semantics);
  const auto method = parse_query_method(a.method);
  QueryStats stats;
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = run_query(method, q, a.k, sem, ix, masked, a.threads, &stats);
  const double ms = detail::elapsed_ms(t0);
  out << "transitions (" << res.transitions.size() << "):";
  for (auto id : res.transitions) out << ' ' << ix.ds.raw_transitions[to_index(id)].label;
  out << "\nms: " << ms << " (filter " << stats.filter_ms << ", prune " << stats.prune_ms << ", refine "
      << stats.refine_ms << ")\n";
  if (a.self_check) {
    for (auto m : {QueryMethod::FilterRefine, QueryMethod::Voronoi, QueryMethod::DivideConquer, QueryMethod::Oracle}) {
      const auto other = run_query(m, q, a.k, sem, ix, masked, a.threads);
      if (other.transitions != res.transitions || other.endpoint_hits != res.endpoint_hits)
        throw SelfCheckFailure("self-check: methods disagree on the result set");
    }
    out << "self-check: ok\n";
  }
}

struct PlanArgs {
  std::string from, to;
  double tau = 0;
  std::size_t k = 10;
  std::string objective = "max";
  std::string semantics = "exists";
  std::string method = "pre";
  bool self_check = false;
};

inline std::optional<PlanResult> run_plan(const std::string& method, const IndexDir& ix, VertexId o, VertexId d,
                                          double tau, Objective obj, Semantics sem) {
  if (method == "pre") return plan(ix.graph, o, d, tau, obj, sem);
  if (method == "bruteforce") {
    const std::size_t k = ix.graph.k;
    return oracle::maxrknnt_bruteforce(ix.graph, o, d, tau, obj, sem, [&](std::span<const VertexId> path) {
      std::vector<GeoPoint> pts;
      for (auto v : path) pts.push_back(ix.graph.point(v));
      return rknnt(pts, k, Semantics::Exists, ix.rr, ix.tr).endpoint_hits;
    });
  }
  throw ingest::InputError("unknown plan method: " + method);
}

inline void cmd_plan(const fs::path& dir, const PlanArgs& a, std::ostream& out) {
  const auto ix = load_index(dir);
  if (ix.graph.k == 0) throw ingest::InputError("index is not precomputed; run precompute first");
  if (ix.graph.k != a.k)
    throw ingest::InputError("index was precomputed for k=" + std::to_string(ix.graph.k) + ", not k=" +
                             std::to_string(a.k));
  const VertexId o = parse_vertex(a.from, ix), d = parse_vertex(a.to, ix);
  const auto obj = parse_objective(a.objective);
  const auto sem = parse_semantics(a.semantics);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = run_plan(a.method, ix, o, d, a.tau, obj, sem);
  const double ms = detail::elapsed_ms(t0);
  if (!res)
    out << "infeasible\n";
  else
    print_path(out, *res, sem);
  out << "ms: " << ms << '\n';
  if (a.self_check) {
    for (const char* m : {"pre", "bruteforce"}) {
      const auto other = run_plan(m, ix, o, d, a.tau, obj, sem);
      if (other.has_value() != res.has_value() ||
          (res && (other->count(sem) != res->count(sem) || other->td != res->td)))
        throw SelfCheckFailure("self-check: plan methods disagree");
    }
    out << "self-check: ok\n";
  }
}

/// Sweep spec (JSON):
///   {"seed": 1, "queries": 20, "repetitions": 1,
///    "query": {"k": [1,5,10], "qlen": [5], "interval_km": [0.5],
///              "methods": ["filter-refine","voronoi","divide-conquer"]},
///    "plan":  {"pairs": 10, "tau_ratio": [1.2, 1.5], "methods": ["pre","bruteforce"],
///              "objective": "max", "semantics": "exists"}}
/// Either section may be omitted.
inline void cmd_bench(const fs::path& dir, const nlohmann::json& spec, unsigned threads, std::ostream& out) {
  const auto ix = load_index(dir);
  const std::uint64_t seed = spec.value("seed", 1);
  const std::size_t queries = spec.value("queries", 20);
  const std::size_t reps = std::max<std::size_t>(1, spec.value("repetitions", 1));
  out << kBenchHeader << '\n' << std::setprecision(6) << std::fixed;
  auto row = [&](const std::string& kind, const std::string& method, std::size_t k, std::size_t qlen,
                 std::optional<double> interval, std::optional<double> td_se, std::optional<double> ratio,
                 std::size_t n, double wall, const QueryStats& st, double size) {
    const double div = static_cast<double>(std::max<std::size_t>(1, n * reps));
    auto opt = [](std::optional<double> v) { return v ? std::to_string(*v) : std::string{}; };
    out << kBenchSchemaVersion << ',' << kind << ',' << method << ',' << k << ',' << qlen << ',' << opt(interval)
        << ',' << opt(td_se) << ',' << opt(ratio) << ',' << n << ',' << reps << ',' << seed << ',' << wall / div
        << ',' << st.filter_ms / div << ',' << st.prune_ms / div << ',' << st.refine_ms / div << ',' << size / div
        << '\n';
  };
  if (spec.contains("query")) {
    const auto& q = spec["query"];
    std::vector<GeoPoint> pts;
    for (const auto& r : ix.ds.routes) pts.insert(pts.end(), r.points.begin(), r.points.end());
    for (std::size_t k : q.value("k", std::vector<std::size_t>{10}))
      for (std::size_t qlen : q.value("qlen", std::vector<std::size_t>{5}))
        for (double interval : q.value("interval_km", std::vector<double>{0.5})) {
          const auto qs = ingest::gen_queries(queries, qlen, interval, seed, pts);
          for (const std::string& m : q.value("methods", std::vector<std::string>{"voronoi"})) {
            const auto method = parse_query_method(m);
            QueryStats st;
            double wall = 0, size = 0;
            for (std::size_t r = 0; r < reps; ++r)
              for (const auto& qr : qs) {
                const auto t0 = std::chrono::steady_clock::now();
                size += run_query(method, qr.view(), k, Semantics::Exists, ix, std::nullopt, threads, &st)
                            .transitions.size();
                wall += detail::elapsed_ms(t0);
              }
            row("query", m, k, qlen, interval, std::nullopt, std::nullopt, qs.size(), wall, st, size);
          }
        }
  }
  if (spec.contains("plan")) {
    const auto& p = spec["plan"];
    if (ix.graph.k == 0) throw ingest::InputError("plan benchmarks need a precomputed index");
    const auto obj = parse_objective(p.value("objective", "max"));
    const auto sem = parse_semantics(p.value("semantics", "exists"));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<VertexId> pick(0, static_cast<VertexId>(ix.graph.vertex_count() - 1));
    std::vector<std::pair<VertexId, VertexId>> pairs;
    std::vector<double> td_se;
    const std::size_t want = p.value("pairs", 10);
    for (std::size_t tries = 0; pairs.size() < want && tries < want * 100; ++tries) {
      const VertexId o = pick(rng), d = pick(rng);
      if (o == d) continue;
      const double sp = distances_to(ix.graph, d)[o];
      if (sp == kUnreachable) continue;
      pairs.emplace_back(o, d);
      td_se.push_back(sp);
    }
    const double mean_se = td_se.empty() ? 0 : std::accumulate(td_se.begin(), td_se.end(), 0.0) / td_se.size();
    for (double ratio : p.value("tau_ratio", std::vector<double>{1.2}))
      for (const std::string& m : p.value("methods", std::vector<std::string>{"pre"})) {
        double wall = 0, size = 0;
        for (std::size_t r = 0; r < reps; ++r)
          for (std::size_t i = 0; i < pairs.size(); ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto res = run_plan(m, ix, pairs[i].first, pairs[i].second, ratio * td_se[i], obj, sem);
            wall += detail::elapsed_ms(t0);
            if (res) size += res->count(sem);
          }
        row("plan", m, ix.graph.k, 0, std::nullopt, mean_se, ratio, pairs.size(), wall, QueryStats{}, size);
      }
  }
}

inline void write_transitions_file(const fs::path& path, const std::vector<Transition>& ts,
                                   const ingest::Projection& proj) {
  std::vector<ingest::RawTransition> raw;
  raw.reserve(ts.size());
  auto snap = [&](const GeoPoint& p) {
    auto ll = proj.unproject(p);
    return ingest::LatLon{ingest::snap_degrees(ll.lat), ingest::snap_degrees(ll.lon)};
  };
  for (const auto& t : ts) raw.push_back({std::to_string(to_index(t.id)), snap(t.origin), snap(t.destination)});
  std::ofstream f(path);
  if (!f) throw ingest::InputError("cannot write " + path.string());
  ingest::write_transitions(f, raw);
}

inline void write_routes_file(const fs::path& path, const std::vector<Route>& routes, const ingest::Projection& proj) {
  std::vector<ingest::RawRoute> raw;
  for (const auto& r : routes) {
    ingest::RawRoute rr{std::to_string(to_index(r.id)), {}};
    for (const auto& p : r.points) {
      auto ll = proj.unproject(p);
      rr.stops.push_back({ingest::snap_degrees(ll.lat), ingest::snap_degrees(ll.lon)});
    }
    raw.push_back(std::move(rr));
  }
  std::ofstream f(path);
  if (!f) throw ingest::InputError("cannot write " + path.string());
  ingest::write_routes(f, raw);
}

// Entry point ----------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Reverse k nearest neighbour queries over transit routes and transitions"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 1;
  app.add_option("--threads", threads, "worker cap")->check(CLI::PositiveNumber);

  fs::path index_dir;
  auto* build = app.add_subcommand("build", "index routes and transitions");
  std::string routes_in, transitions_in;
  build->add_option("--routes", routes_in)->required();
  build->add_option("--transitions", transitions_in)->required();
  build->add_option("--out", index_dir)->required();

  auto* pre = app.add_subcommand("precompute", "per-stop results and shortest distances for planning");
  std::size_t pre_k = 10;
  pre->add_option("--index", index_dir)->required();
  pre->add_option("--k", pre_k)->check(CLI::PositiveNumber);

  auto* query = app.add_subcommand("query", "transitions that take a query route among their k nearest");
  QueryArgs qa;
  query->add_option("--index", index_dir)->required();
  auto* pts_opt = query->add_option("--points", qa.points, "lat,lon;lat,lon;...");
  query->add_option("--route", qa.route, "use an indexed route (masked from the index)")->excludes(pts_opt);
  query->add_option("--k", qa.k)->check(CLI::PositiveNumber);
  query->add_option("--semantics", qa.semantics)->check(CLI::IsMember({"exists", "forall"}));
  query->add_option("--method", qa.method)
      ->check(CLI::IsMember({"filter-refine", "voronoi", "divide-conquer", "oracle"}));
  query->add_flag("--self-check", qa.self_check);

  auto* pl = app.add_subcommand("plan", "route from --from to --to within --tau attracting most/fewest transitions");
  PlanArgs pa;
  pl->add_option("--index", index_dir)->required();
  pl->add_option("--from", pa.from, "vertex id or lat,lon")->required();
  pl->add_option("--to", pa.to, "vertex id or lat,lon")->required();
  pl->add_option("--tau", pa.tau, "distance budget in km")->required()->check(CLI::PositiveNumber);
  pl->add_option("--k", pa.k)->check(CLI::PositiveNumber);
  pl->add_option("--objective", pa.objective)->check(CLI::IsMember({"max", "min"}));
  pl->add_option("--semantics", pa.semantics)->check(CLI::IsMember({"exists", "forall"}));
  pl->add_option("--method", pa.method)->check(CLI::IsMember({"pre", "bruteforce"}));
  pl->add_flag("--self-check", pa.self_check);

  auto* bench = app.add_subcommand("bench", "parameter sweep, CSV on stdout or --out");
  std::string spec_path, bench_out;
  bench->add_option("--index", index_dir)->required();
  bench->add_option("--spec", spec_path, "sweep spec JSON")->required();
  bench->add_option("--out", bench_out);

  auto* gen_t = app.add_subcommand("gen-transitions", "uniform synthetic transitions");
  std::size_t gen_n = 1000;
  std::uint64_t seed = 1;
  std::string bbox, gen_out;
  gen_t->add_option("--n", gen_n)->check(CLI::PositiveNumber);
  gen_t->add_option("--bbox", bbox, "min_lat,min_lon,max_lat,max_lon")->required();
  gen_t->add_option("--seed", seed);
  gen_t->add_option("--out", gen_out)->required();

  auto* gen_r = app.add_subcommand("gen-routes", "random-walk synthetic routes");
  std::size_t gen_stops = 20;
  double spacing = 0.5;
  gen_r->add_option("--n", gen_n)->check(CLI::PositiveNumber);
  gen_r->add_option("--stops", gen_stops);
  gen_r->add_option("--spacing-km", spacing)->check(CLI::PositiveNumber);
  gen_r->add_option("--bbox", bbox, "min_lat,min_lon,max_lat,max_lon")->required();
  gen_r->add_option("--seed", seed);
  gen_r->add_option("--out", gen_out)->required();

  auto* gtfs = app.add_subcommand("gtfs", "convert a GTFS feed directory into a routes file");
  std::string gtfs_dir;
  gtfs->add_option("--dir", gtfs_dir)->required();
  gtfs->add_option("--out", gen_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*build) {
      cmd_build(routes_in, transitions_in, index_dir, out);
    } else if (*pre) {
      cmd_precompute(index_dir, pre_k, threads, out);
    } else if (*query) {
      qa.threads = threads;
      cmd_query(index_dir, qa, out);
    } else if (*pl) {
      cmd_plan(index_dir, pa, out);
    } else if (*bench) {
      std::ifstream sf(spec_path);
      if (!sf) throw ingest::InputError("cannot open " + spec_path);
      const auto spec = nlohmann::json::parse(sf);
      if (bench_out.empty()) {
        cmd_bench(index_dir, spec, threads, out);
      } else {
        std::ofstream f(bench_out);
        cmd_bench(index_dir, spec, threads, f);
      }
    } else if (*gen_t) {
      ingest::Projection proj;
      const Mbr box = parse_bbox(bbox, proj);
      write_transitions_file(gen_out, ingest::gen_synthetic_transitions(gen_n, box, seed), proj);
    } else if (*gen_r) {
      ingest::Projection proj;
      const Mbr box = parse_bbox(bbox, proj);
      write_routes_file(gen_out, ingest::gen_synthetic_routes(gen_n, gen_stops, spacing, box, seed), proj);
    } else if (*gtfs) {
      const auto rf = ingest::convert_gtfs(gtfs_dir);
      std::ofstream f(gen_out);
      if (!f) throw ingest::InputError("cannot write " + gen_out);
      ingest::write_routes(f, rf.routes);
      out << "routes: " << rf.routes.size() << " (skipped " << rf.skipped << ")\n";
    }
  } catch (const SelfCheckFailure& e) {
    err << e.what() << '\n';
    return kExitMismatch;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace rknnt::cli
