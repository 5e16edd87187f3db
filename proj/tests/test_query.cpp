#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "rknnt/oracle.hpp"
#include "rknnt/query.hpp"

using namespace rknnt;

namespace {

std::vector<TransitionId> ids(std::initializer_list<std::uint32_t> v) {
  std::vector<TransitionId> out;
  for (auto i : v) out.push_back(TransitionId{i});
  return out;
}

struct Scene : ::testing::Test {
  fixtures::RouteScene f;
  RrTree rr = RrTree::build(f.routes);
  TrTree tr = TrTree::build(f.transitions);
};

}  // namespace

TEST_F(Scene, ForAllWithKOne) {
  EXPECT_EQ(rknnt::rknnt(f.query, 1, Semantics::ForAll, rr, tr).transitions, ids({4}));
}

TEST_F(Scene, ExistsWithKOne) {
  EXPECT_EQ(rknnt::rknnt(f.query, 1, Semantics::Exists, rr, tr).transitions, ids({1, 3, 4}));
}

TEST_F(Scene, DivideConquerAgrees) {
  for (auto sem : {Semantics::Exists, Semantics::ForAll})
    for (std::size_t k : {1U, 2U, 3U})
      EXPECT_EQ(rknnt_divide_conquer(f.query, k, sem, rr, tr, {}, nullptr, 3).endpoint_hits,
                rknnt::rknnt(f.query, k, sem, rr, tr).endpoint_hits);
}

TEST_F(Scene, KAtLeastRouteCountTakesEverything) {
  EXPECT_EQ(rknnt::rknnt(f.query, 4, Semantics::ForAll, rr, tr).transitions, ids({1, 2, 3, 4, 5, 6}));
}

TEST_F(Scene, SharedStopCountsBothRoutes) {
  // Only routes 1 and 4, through their shared stop, are closer to T5's
  // endpoints than this query. k=2 keeps T5 out, k=3 lets it in.
  const std::vector<GeoPoint> far{{3, 4.5}};
  const auto k2 = rknnt::rknnt(far, 2, Semantics::ForAll, rr, tr).transitions;
  EXPECT_EQ(std::find(k2.begin(), k2.end(), TransitionId{5}), k2.end());
  const auto k3 = rknnt::rknnt(far, 3, Semantics::ForAll, rr, tr).transitions;
  EXPECT_NE(std::find(k3.begin(), k3.end(), TransitionId{5}), k3.end());
}

TEST_F(Scene, RejectsBadArguments) {
  EXPECT_THROW(rknnt::rknnt(f.query, 0, Semantics::Exists, rr, tr), std::invalid_argument);
  EXPECT_THROW(rknnt::rknnt({}, 1, Semantics::Exists, rr, tr), std::invalid_argument);
}

TEST_F(Scene, ZeroRoutesBeatAQueryOnTopOfTheEndpoint) {
  const std::vector<GeoPoint> q{{5, 5.5}};
  const auto r = rknnt::rknnt(q, 1, Semantics::Exists, rr, tr);
  EXPECT_NE(std::find(r.transitions.begin(), r.transitions.end(), TransitionId{4}), r.transitions.end());
}

TEST(IsFiltered, VoronoiCatchesWhatPointsMiss) {
  const std::vector<GeoPoint> query{{0, 0}, {10, 0}};
  FilterSet fs;
  fs.add({1, 5}, {RouteId{7}});
  fs.add({9, 5}, {RouteId{7}});
  const Entry box = Mbr{{3, 3}, {7, 7}};
  QueryOptions no_voronoi;
  no_voronoi.use_voronoi = false;
  EXPECT_FALSE(is_filtered(query, fs, box, 1, no_voronoi));
  EXPECT_TRUE(is_filtered(query, fs, box, 1));
  EXPECT_FALSE(is_filtered(query, fs, box, 2));
}

TEST(IsFiltered, CrossoverSetCountsEveryRoute) {
  const std::vector<GeoPoint> query{{10, 0}};
  FilterSet fs;
  fs.add({0, 0}, {RouteId{1}, RouteId{2}, RouteId{3}});
  EXPECT_TRUE(is_filtered(query, fs, GeoPoint{1, 0}, 3));
  EXPECT_FALSE(is_filtered(query, fs, GeoPoint{1, 0}, 4));
  QueryOptions masked;
  masked.masked_route = RouteId{2};
  EXPECT_FALSE(is_filtered(query, fs, GeoPoint{1, 0}, 3, masked));
}

TEST(FilterSet, OrderedByCrossoverSize) {
  FilterSet fs;
  fs.add({0, 0}, {RouteId{1}});
  fs.add({1, 0}, {RouteId{1}, RouteId{2}});
  fs.add({2, 0}, {RouteId{3}});
  ASSERT_EQ(fs.size(), 3U);
  EXPECT_EQ(fs.by_point[0].location, (GeoPoint{1, 0}));
  EXPECT_EQ(fs.by_point[1].location, (GeoPoint{0, 0}));
  EXPECT_EQ(fs.by_point[2].location, (GeoPoint{2, 0}));
  EXPECT_EQ(fs.by_route.at(RouteId{1}).size(), 2U);
}

TEST(Query, MatchesOracleOnRandomInstances) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 60; ++i) {
    const auto in = fixtures::random_instance(rng);
    const auto rr = RrTree::build(in.routes);
    const auto tr = TrTree::build(in.transitions);
    for (auto sem : {Semantics::Exists, Semantics::ForAll}) {
      const auto want = oracle::rknnt_bruteforce(in.query, in.k, sem, in.routes, in.transitions);
      ASSERT_EQ(rknnt::rknnt(in.query, in.k, sem, rr, tr).endpoint_hits, want.endpoint_hits) << "instance " << i;
      ASSERT_EQ(rknnt_divide_conquer(in.query, in.k, sem, rr, tr, {}, nullptr, 2).transitions, want.transitions);
    }
  }
}

TEST(Query, CandidatesCoverTheAnswer) {
  std::mt19937_64 rng(78);
  for (int i = 0; i < 60; ++i) {
    const auto in = fixtures::random_instance(rng);
    const auto rr = RrTree::build(in.routes);
    const auto tr = TrTree::build(in.transitions);
    const auto [fs, refine] = filter_route(rr, in.query, in.k);
    const auto cands = prune_transition(tr, in.query, fs, in.k);
    const auto got = keys_of(cands.points);
    const auto want = oracle::rknnt_bruteforce(in.query, in.k, Semantics::Exists, in.routes, in.transitions);
    EXPECT_TRUE(includes(got, want.endpoint_hits)) << "instance " << i;
  }
}

TEST(Query, AblationsDoNotChangeResults) {
  std::mt19937_64 rng(79);
  for (int i = 0; i < 40; ++i) {
    const auto in = fixtures::random_instance(rng);
    const auto rr = RrTree::build(in.routes);
    const auto tr = TrTree::build(in.transitions);
    const auto base = rknnt::rknnt(in.query, in.k, Semantics::Exists, rr, tr);
    for (int mask = 0; mask < 8; ++mask) {
      QueryOptions o;
      o.use_point_filter = mask & 1;
      o.use_voronoi = mask & 2;
      o.reuse_refine_set = mask & 4;
      ASSERT_EQ(rknnt::rknnt(in.query, in.k, Semantics::Exists, rr, tr, o).endpoint_hits, base.endpoint_hits);
    }
  }
}

TEST(Query, MaskedRouteEqualsIndexWithoutIt) {
  std::mt19937_64 rng(80);
  for (int i = 0; i < 30; ++i) {
    auto in = fixtures::random_instance(rng);
    if (in.routes.size() < 2) continue;
    const Route q = in.routes[0];
    const auto rr = RrTree::build(in.routes);
    const auto tr = TrTree::build(in.transitions);
    QueryOptions o;
    o.masked_route = q.id;
    const auto got = rknnt::rknnt(q.points, in.k, Semantics::Exists, rr, tr, o);
    const std::vector<Route> rest(in.routes.begin() + 1, in.routes.end());
    const auto want = oracle::rknnt_bruteforce(q.points, in.k, Semantics::Exists, rest, in.transitions);
    ASSERT_EQ(got.endpoint_hits, want.endpoint_hits);
    ASSERT_EQ(got.endpoint_hits,
              oracle::rknnt_bruteforce(q.points, in.k, Semantics::Exists, in.routes, in.transitions, q.id).endpoint_hits);
  }
}

TEST(Query, EmptyTransitionIndex) {
  fixtures::RouteScene f;
  const auto rr = RrTree::build(f.routes);
  const auto tr = TrTree::build({});
  EXPECT_TRUE(rknnt::rknnt(f.query, 1, Semantics::Exists, rr, tr).transitions.empty());
}

TEST(Query, StatsAccumulate) {
  fixtures::RouteScene f;
  const auto rr = RrTree::build(f.routes);
  const auto tr = TrTree::build(f.transitions);
  QueryStats st;
  rknnt::rknnt(f.query, 1, Semantics::Exists, rr, tr, {}, &st);
  EXPECT_GT(st.candidates, 0U);
  EXPECT_GE(st.filter_ms, 0.0);
  EXPECT_LE(st.total_ms(), st.filter_ms + st.prune_ms + st.refine_ms + 1e-12);
}
