#include <gtest/gtest.h>

#include <random>

#include "rknnt/geometry.hpp"

using namespace rknnt;

TEST(Distance, FrozenValue) {
  // sqrt(45.89), evaluated at 40 digits with an arbitrary-precision library.
  EXPECT_DOUBLE_EQ(dist({1.2, -0.7}, {-2.3, 5.1}), 6.774215821775978817);
  EXPECT_DOUBLE_EQ(squared_dist({1.2, -0.7}, {-2.3, 5.1}), 45.89);
}

TEST(Distance, Symmetric) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int i = 0; i < 1000; ++i) {
    GeoPoint a{u(rng), u(rng)}, b{u(rng), u(rng)};
    EXPECT_EQ(dist(a, b), dist(b, a));
    EXPECT_GE(dist(a, b), 0);
  }
}

TEST(PointRoute, NearestStop) {
  const std::vector<GeoPoint> r{{0, 0}, {3, 0}, {3, 4}};
  EXPECT_DOUBLE_EQ(point_route_dist({3, 1}, r), 1.0);
  EXPECT_DOUBLE_EQ(point_route_dist({3, 4}, r), 0.0);
  EXPECT_THROW(point_route_dist({0, 0}, std::vector<GeoPoint>{}), std::invalid_argument);
}

TEST(MbrDistance, AgreesWithDenseSampling) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 200; ++i) {
    Mbr box = Mbr::of_point({u(rng), u(rng)});
    box.expand(GeoPoint{u(rng), u(rng)});
    const GeoPoint q{u(rng), u(rng)};
    double lo = 1e300, hi = 0;
    for (int a = 0; a <= 40; ++a)
      for (int b = 0; b <= 40; ++b) {
        const GeoPoint p{box.min.x + (box.max.x - box.min.x) * a / 40, box.min.y + (box.max.y - box.min.y) * b / 40};
        lo = std::min(lo, dist(q, p));
        hi = std::max(hi, dist(q, p));
      }
    EXPECT_LE(min_dist_point_mbr(q, box), lo + 1e-12);
    EXPECT_NEAR(max_dist_point_mbr(q, box), hi, 1e-9);  // the sampled grid includes the corners
    if (box.contains(q)) EXPECT_EQ(min_dist_point_mbr(q, box), 0.0);
  }
}

TEST(MbrDistance, QueryMinimum) {
  const Mbr box{{2, 2}, {3, 3}};
  const std::vector<GeoPoint> q{{0, 0}, {2.5, 5}};
  EXPECT_DOUBLE_EQ(min_dist_query_mbr(q, box), 2.0);
  EXPECT_THROW(min_dist_query_mbr(std::vector<GeoPoint>{}, box), std::invalid_argument);
}

TEST(Mbr, EmptyAndExpand) {
  Mbr b = Mbr::empty();
  EXPECT_TRUE(b.is_empty());
  EXPECT_EQ(b.area(), 0.0);
  b.expand(GeoPoint{1, 2});
  EXPECT_FALSE(b.is_empty());
  EXPECT_EQ(b, Mbr::of_point({1, 2}));
  b.expand(Mbr::empty());
  EXPECT_EQ(b, Mbr::of_point({1, 2}));
}

TEST(HalfPlane, DegenerateRejected) {
  EXPECT_THROW(HalfPlane({1, 1}, {1, 1}), std::invalid_argument);
}

TEST(HalfPlane, BisectorPointsBelongToTheOpponent) {
  const HalfPlane h({0, 0}, {2, 0});
  EXPECT_TRUE(half_plane_contains_point(h, {0.5, 7}));
  EXPECT_FALSE(half_plane_contains_point(h, {1, 7}));  // on the bisector
  EXPECT_FALSE(half_plane_contains_point(h, {1.5, 0}));
}

TEST(HalfPlane, BoxContainmentMatchesCorners) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 2000; ++i) {
    const GeoPoint a{u(rng), u(rng)}, o{u(rng), u(rng)};
    if (a == o) continue;
    const HalfPlane h(a, o);
    Mbr box = Mbr::of_point({u(rng), u(rng)});
    box.expand(GeoPoint{u(rng), u(rng)});
    bool all = true;
    for (const auto& c : box.corners()) all = all && half_plane_contains_point(h, c);
    ASSERT_EQ(half_plane_contains_mbr(h, box), all);
    if (all) {
      // Convexity: interior samples must be inside too.
      for (int s = 0; s < 20; ++s) {
        std::uniform_real_distribution<double> fx(box.min.x, box.max.x), fy(box.min.y, box.max.y);
        ASSERT_TRUE(half_plane_contains_point(h, {fx(rng), fy(rng)}));
      }
    }
  }
}

TEST(FilteringSpace, IntersectionOverQueryPoints) {
  const std::vector<GeoPoint> q{{4, 5}, {6, 5}};
  EXPECT_TRUE(filtering_space_contains({2, 5}, q, GeoPoint{0.5, 5}));
  EXPECT_FALSE(filtering_space_contains({2, 5}, q, GeoPoint{4.5, 5}));
  EXPECT_TRUE(filtering_space_contains({2, 5}, q, Mbr{{0, 4}, {1, 6}}));
  EXPECT_FALSE(filtering_space_contains({2, 5}, q, Mbr{{0, 4}, {3.5, 6}}));
  EXPECT_FALSE(filtering_space_contains({2, 5}, {}, GeoPoint{0, 5}));
  // A filtering point on top of a query point filters nothing.
  EXPECT_FALSE(filtering_space_contains({4, 5}, q, GeoPoint{4, 5.1}));
}

TEST(VoronoiFilter, PointTestIsExact) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 10);
  for (int i = 0; i < 500; ++i) {
    std::vector<GeoPoint> route(1 + i % 6), query(1 + i % 4);
    for (auto& p : route) p = {u(rng), u(rng)};
    for (auto& p : query) p = {u(rng), u(rng)};
    const GeoPoint t{u(rng), u(rng)};
    EXPECT_EQ(voronoi_filter(route, query, t),
              squared_point_route_dist(t, route) < squared_point_route_dist(t, query));
  }
}

TEST(VoronoiFilter, BoxTestNeverOverPrunes) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 10), s(0, 2);
  int filtered = 0;
  for (int i = 0; i < 3000; ++i) {
    std::vector<GeoPoint> route(2 + i % 5), query(1 + i % 3);
    for (auto& p : route) p = {u(rng), u(rng)};
    for (auto& p : query) p = {u(rng), u(rng)};
    const GeoPoint c{u(rng), u(rng)};
    const Mbr box{c, {c.x + s(rng), c.y + s(rng)}};
    if (!voronoi_filter(route, query, box)) continue;
    ++filtered;
    std::uniform_real_distribution<double> fx(box.min.x, box.max.x), fy(box.min.y, box.max.y);
    for (int k = 0; k < 30; ++k) {
      const GeoPoint p{fx(rng), fy(rng)};
      ASSERT_LT(squared_point_route_dist(p, route), squared_point_route_dist(p, query));
    }
  }
  EXPECT_GT(filtered, 50);
}

TEST(VoronoiFilter, RouteFiltersWhatNoSinglePointDoes) {
  // Each route point owns the box against one query point only.
  const std::vector<GeoPoint> query{{0, 0}, {10, 0}};
  const std::vector<GeoPoint> route{{1, 5}, {9, 5}};
  const Mbr box{{3, 3}, {7, 7}};
  EXPECT_FALSE(filtering_space_contains(route[0], query, box));
  EXPECT_FALSE(filtering_space_contains(route[1], query, box));
  EXPECT_TRUE(voronoi_filter(route, query, box));
}
