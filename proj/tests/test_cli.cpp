#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "rknnt/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rknnt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = rknnt::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string latlon(int row, int col) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << -37.8 + 0.005 * row << ',' << 144.95 + 0.006 * col;
  return s.str();
}

/// 4x4 grid of stops, one route per row and per column, plus uniform transitions.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / ("rknnt_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream r(dir / "routes.csv");
    r << "route_id,seq,lat,lon\n";
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        r << "row" << i << ',' << j << ',' << latlon(i, j) << '\n';
        r << "col" << i << ',' << j << ',' << latlon(j, i) << '\n';
      }
    r << "stub,0," << latlon(9, 9) << '\n';
    r.close();
    const auto g = cli({"gen-transitions", "--n", "400", "--bbox", "-37.805,144.945,-37.78,144.975", "--seed", "2",
                        "--out", (dir / "transitions.csv").string()});
    ASSERT_EQ(g.code, 0) << g.err;
    const auto b = cli({"build", "--routes", (dir / "routes.csv").string(), "--transitions",
                        (dir / "transitions.csv").string(), "--out", (dir / "idx").string()});
    ASSERT_EQ(b.code, 0) << b.err;
    ASSERT_NE(b.out.find("routes: 8 (skipped 1)"), std::string::npos) << b.out;
  }
  static void TearDownTestSuite() { fs::remove_all(dir); }

  static std::string idx() { return (dir / "idx").string(); }
  static inline fs::path dir;
};

}  // namespace

TEST_F(Cli, QuerySelfCheckAcrossMethods) {
  for (const char* sem : {"exists", "forall"}) {
    const auto q = cli({"query", "--index", idx(), "--points", latlon(1, 0) + ";" + latlon(1, 1) + ";" + latlon(2, 2),
                        "--k", "2", "--semantics", sem, "--self-check"});
    EXPECT_EQ(q.code, 0) << q.err;
    EXPECT_NE(q.out.find("self-check: ok"), std::string::npos);
  }
}

TEST_F(Cli, QueryByRouteLabel) {
  const auto q = cli({"query", "--index", idx(), "--route", "row1", "--k", "3", "--method", "divide-conquer",
                      "--self-check"});
  EXPECT_EQ(q.code, 0) << q.err;
  EXPECT_TRUE(q.out.starts_with("transitions ("));
  EXPECT_EQ(cli({"query", "--index", idx(), "--route", "nope"}).code, 2);
}

TEST_F(Cli, PlanAfterPrecompute) {
  const auto p = cli({"precompute", "--index", idx(), "--k", "2", "--threads", "2"});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_NE(p.out.find("vertices: 16"), std::string::npos);
  EXPECT_NE(p.out.find("edges: 24"), std::string::npos);
  for (const char* obj : {"max", "min"}) {
    const auto r = cli({"plan", "--index", idx(), "--from", latlon(0, 0), "--to", latlon(3, 3), "--tau", "4.5", "--k",
                        "2", "--objective", obj, "--self-check"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("path:"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("self-check: ok"), std::string::npos);
  }
  const auto tight = cli({"plan", "--index", idx(), "--from", latlon(0, 0), "--to", latlon(3, 3), "--tau", "1", "--k",
                          "2"});
  EXPECT_EQ(tight.code, 0);
  EXPECT_NE(tight.out.find("infeasible"), std::string::npos);
  // k must match the precomputed sets.
  EXPECT_EQ(cli({"plan", "--index", idx(), "--from", "0", "--to", "1", "--tau", "9", "--k", "3"}).code, 2);
}

TEST_F(Cli, BenchWritesCsv) {
  ASSERT_EQ(cli({"precompute", "--index", idx(), "--k", "2"}).code, 0);
  std::ofstream(dir / "spec.json") << R"({"seed": 3, "queries": 4,
    "query": {"k": [1, 2], "qlen": [3], "interval_km": [0.3], "methods": ["voronoi", "divide-conquer"]},
    "plan": {"pairs": 3, "tau_ratio": [1.2], "methods": ["pre", "bruteforce"]}})";
  const auto b = cli({"bench", "--index", idx(), "--spec", (dir / "spec.json").string(), "--out",
                      (dir / "bench.csv").string()});
  ASSERT_EQ(b.code, 0) << b.err;
  std::istringstream csv(slurp(dir / "bench.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, rknnt::cli::kBenchHeader);
  std::size_t rows = 0, query = 0;
  while (std::getline(csv, line)) {
    ++rows;
    query += line.starts_with("1,query,");
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 15) << line;
  }
  EXPECT_EQ(rows, 6U);
  EXPECT_EQ(query, 4U);
}

TEST_F(Cli, RebuildIsByteIdentical) {
  const auto again = (dir / "idx2").string();
  ASSERT_EQ(cli({"build", "--routes", (dir / "routes.csv").string(), "--transitions",
                 (dir / "transitions.csv").string(), "--out", again})
                .code,
            0);
  for (const char* f : {"routes.csv", "transitions.csv", "rr.bin", "tr.bin"})
    EXPECT_EQ(slurp(dir / "idx2" / f), slurp(dir / "idx" / f)) << f;
  // The manifest records the same digests as the first build did before precompute.
  const auto m = nlohmann::json::parse(slurp(dir / "idx2" / "manifest.json"));
  EXPECT_EQ(m["digests"]["rr.bin"], rknnt::ingest::file_digest((dir / "idx" / "rr.bin").string()));
  EXPECT_EQ(m["counts"]["transitions"], 400);
}

TEST_F(Cli, InputErrorsExitWithTwo) {
  std::ofstream(dir / "bad.csv") << "r,0,1,1\nr,1,oops,1\n";
  const auto r = cli({"build", "--routes", (dir / "bad.csv").string(), "--transitions",
                      (dir / "transitions.csv").string(), "--out", (dir / "bad").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.csv:2"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"query", "--index", (dir / "missing").string(), "--points", "1,1"}).code, 2);
  EXPECT_EQ(cli({"query", "--index", idx(), "--points", "1,1", "--k", "0"}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(Cli, GeneratorsAreDeterministic) {
  const auto a = (dir / "ga.csv").string(), b = (dir / "gb.csv").string();
  for (const auto& out : {a, b})
    ASSERT_EQ(cli({"gen-routes", "--n", "5", "--stops", "6", "--spacing-km", "0.4", "--bbox",
                   "-37.9,144.9,-37.8,145.0", "--seed", "8", "--out", out})
                  .code,
              0);
  EXPECT_EQ(slurp(a), slurp(b));
  std::ifstream in(a);
  const auto rf = rknnt::ingest::read_routes(in);
  ASSERT_EQ(rf.routes.size(), 5U);
  for (const auto& r : rf.routes) {
    EXPECT_EQ(r.stops.size(), 6U);
    for (const auto& s : r.stops) {
      EXPECT_GE(s.lat, -37.9);
      EXPECT_LE(s.lat, -37.8);
    }
  }
}

TEST_F(Cli, GtfsConversion) {
  const auto g = dir / "feed";
  fs::create_directories(g);
  std::ofstream(g / "stops.txt") << "stop_id,stop_lat,stop_lon\na," << latlon(0, 0) << "\nb," << latlon(0, 1) << '\n';
  std::ofstream(g / "trips.txt") << "route_id,trip_id\nR,t\n";
  std::ofstream(g / "stop_times.txt") << "trip_id,stop_id,stop_sequence\nt,a,1\nt,b,2\n";
  const auto r = cli({"gtfs", "--dir", g.string(), "--out", (dir / "gtfs.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "gtfs.csv"), "route_id,seq,lat,lon\nR,0," + latlon(0, 0) + "\nR,1," + latlon(0, 1) + "\n");
}
