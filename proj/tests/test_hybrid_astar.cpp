#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "usvplan/hybrid_astar.hpp"

using namespace usvplan;

namespace {

OccupancyGrid empty_grid(double w, double h, double res = 0.5) {
  return OccupancyGrid(GridSpec::covering(w, h, res), Cell::kFree);
}

void fill_rect(OccupancyGrid& g, double x0, double y0, double x1, double y1) {
  for (int r = 0; r < g.nrows(); ++r)
    for (int c = 0; c < g.ncols(); ++c) {
      const auto p = g.center(c, r);
      if (p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1) g.set(c, r, Cell::kOccupied);
    }
}

// Dense point sampling of the rectangle: which cells does it touch?
bool sampled_overlap(const SearchPose& p, const Footprint& fp, double cx, double cy, double half) {
  const int n = 400;
  const double c = std::cos(p.psi), s = std::sin(p.psi);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n / 2; ++j) {
      const double a = (double(i) / n - 0.5) * fp.length, b = (double(j) / (n / 2) - 0.5) * fp.width;
      const double x = p.x + a * c - b * s, y = p.y + a * s + b * c;
      if (std::abs(x - cx) < half && std::abs(y - cy) < half) return true;
    }
  return false;
}

}  // namespace

TEST(CollisionFree, OpenWaterIsSafe) {
  auto g = empty_grid(30, 30);
  fill_rect(g, 0, 0, 3, 3);
  EXPECT_TRUE(collision_free({15, 15, 0.4}, g));
}

TEST(CollisionFree, CentredOnObstacleIsUnsafe) {
  auto g = empty_grid(30, 30);
  g.set(30, 30, Cell::kOccupied);
  EXPECT_FALSE(collision_free({15.25, 15.25, 1.0}, g));
}

TEST(CollisionFree, OnlyBowCornerOverlaps) {
  const SearchPose p{15.0, 15.0, kPi / 4};
  const double c = std::cos(p.psi), s = std::sin(p.psi);
  // At 45 degrees the bow-port corner is the hull's northernmost point.
  const double kx = p.x + 1.0 * c - 0.54 * s, ky = p.y + 1.0 * s + 0.54 * c;
  // Grid aligned so that cell (30, 31) spans [kx - 0.25, kx + 0.25] x [ky - 0.05, ky + 0.45].
  GridSpec spec = GridSpec::covering(30, 30, 0.5);
  spec.origin_x = kx - 0.25 - 30 * 0.5;
  spec.origin_y = ky - 0.05 - 31 * 0.5;
  OccupancyGrid g(spec, Cell::kFree);
  g.set(30, 31, Cell::kOccupied);
  const auto ctr = g.center(30, 31);
  ASSERT_TRUE(sampled_overlap(p, {}, ctr.x(), ctr.y(), 0.25));
  // Everything but the corner wedge lies below the cell's southern edge.
  EXPECT_GT(std::hypot(ctr.x() - p.x, ctr.y() - p.y), 1.0);
  EXPECT_FALSE(collision_free(p, g));
  // Backing off 10 cm along the hull axis lowers the corner 7 cm: clear.
  EXPECT_TRUE(collision_free({p.x - 0.1 * c, p.y - 0.1 * s, p.psi}, g));
}

TEST(CollisionFree, SeparatingAxisAgreesWithSampling) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> off(-1.6, 1.6), ang(-kPi, kPi);
  int disagreements = 0, hits = 0;
  for (int i = 0; i < 3000; ++i) {
    const SearchPose p{0, 0, ang(rng)};
    const double cx = off(rng), cy = off(rng);
    const bool exact = footprint_overlaps_cell(p, {}, cx, cy, 0.25);
    const bool sampled = sampled_overlap(p, {}, cx, cy, 0.25);
    hits += exact;
    // Sampling can only miss slivers thinner than its spacing.
    if (sampled && !exact) ++disagreements;
    if (exact && !sampled) {
      const bool shrunk = footprint_overlaps_cell(p, {}, cx, cy, 0.25 - 0.01);
      if (shrunk) ++disagreements;
    }
  }
  EXPECT_EQ(disagreements, 0);
  EXPECT_GT(hits, 500);
}

TEST(CollisionFree, OutsideGridIsUnsafe) {
  const auto g = empty_grid(20, 20);
  EXPECT_FALSE(collision_free({0.5, 10, 0}, g));
  EXPECT_FALSE(collision_free({-5, 10, 0}, g));
  EXPECT_TRUE(collision_free({1.2, 10, 0}, g));
}

TEST(CollisionFree, UnknownPolicy) {
  auto g = empty_grid(20, 20);
  g.set(20, 20, Cell::kUnknown);
  EXPECT_FALSE(collision_free({10.25, 10.25, 0}, g));
  EXPECT_TRUE(collision_free({10.25, 10.25, 0}, g, {}, false));
}

TEST(Heuristic, ZeroAtGoal) {
  const auto g = empty_grid(40, 40);
  const SearchPose goal{20, 20, 0.5};
  EXPECT_NEAR(heuristic(goal, goal, g), 0.0, 1e-12);
}

TEST(Heuristic, StraightApproachIsExact) {
  const auto g = empty_grid(40, 40);
  EXPECT_NEAR(heuristic({10, 20, 0}, {20, 20, 0}, g), 10.0, 1e-9);
}

TEST(Heuristic, FacingAwayIsDominatedByReedsShepp) {
  const auto g = empty_grid(40, 40);
  const SearchPose goal{20, 20, 0}, pose{18.5, 20, kPi};
  const double h = heuristic(pose, goal, g);
  const HolonomicHeuristic holo(g, goal.x, goal.y);
  EXPECT_GE(h, 1.5);
  EXPECT_GT(h, holo(pose.x, pose.y));
  EXPECT_NEAR(h, reeds_shepp_distance(pose, goal, 3.0), 1e-12);
}

TEST(Heuristic, UnreachableCellIsInfinite) {
  auto g = empty_grid(40, 40);
  fill_rect(g, 19, 0, 21, 40);
  EXPECT_TRUE(std::isinf(heuristic({5, 20, 0}, {35, 20, 0}, g)));
}

TEST(Heuristic, DijkstraIsALowerBoundAroundWalls) {
  auto g = empty_grid(40, 40);
  fill_rect(g, 19, 0, 21, 30);
  const HolonomicHeuristic holo(g, 35, 5);
  // Shortest polygonal route from (5, 5) around the wall tip at (19..21, 30).
  const double route = std::hypot(14.0, 25.0) + 2.0 + std::hypot(14.0, 25.0);
  EXPECT_LE(holo(5, 5), route);
  EXPECT_GE(holo(5, 5), 0.9 * route);
}

TEST(Search, StartEqualsGoal) {
  const auto g = empty_grid(30, 30);
  const SearchPose p{15, 15, 0.3};
  const auto path = search(p, p, g);
  ASSERT_TRUE(path);
  EXPECT_EQ(path->poses.size(), 1u);
  EXPECT_NEAR(path->length, 0.0, 1e-9);
}

TEST(Search, StraightLineOnEmptyMap) {
  const auto g = empty_grid(50, 50);
  const auto path = search({5, 25, 0}, {45, 25, 0}, g);
  ASSERT_TRUE(path);
  EXPECT_GE(path->length, 40.0 - 1e-9);
  EXPECT_LE(path->length, 40.0 * 1.02);
  EXPECT_NEAR(path->poses.back().x, 45.0, 1e-9);
  for (const auto& p : path->poses) EXPECT_EQ(p.direction, Direction::kForward);
}

TEST(Search, ThroughGapInWall) {
  auto g = empty_grid(50, 50);
  fill_rect(g, 24.5, 0, 25.5, 46);
  const auto path = search({5, 25, 0}, {45, 25, 0}, g);
  ASSERT_TRUE(path);
  // Polygonal shortest route over the wall tip (24.5..25.5, 46).
  const double visibility = 2 * std::hypot(19.5, 21.0) + 1.0;
  EXPECT_GE(path->length, visibility);
  bool crossed_in_gap = false;
  for (const auto& p : path->poses) {
    EXPECT_TRUE(collision_free(p, g));
    if (std::abs(p.x - 25.0) < 0.5) crossed_in_gap |= p.y > 46.0;
  }
  EXPECT_TRUE(crossed_in_gap);
}

TEST(Search, RejectsStartInCollision) {
  auto g = empty_grid(30, 30);
  fill_rect(g, 4, 4, 6, 6);
  EXPECT_FALSE(search({5, 5, 0}, {25, 25, 0}, g));
  EXPECT_FALSE(search({25, 25, 0}, {5, 5, 0}, g));
}

TEST(Search, FailsWhenGoalIsWalledOff) {
  auto g = empty_grid(30, 30);
  fill_rect(g, 14, 0, 16, 30);
  SearchOptions opts;
  opts.max_expansions = 20000;
  EXPECT_FALSE(search({5, 15, 0}, {25, 15, 0}, g, {}, opts));
}

TEST(Search, ParallelParkingUsesReverse) {
  auto g = empty_grid(30, 30);
  const auto path = search({15, 15, 0}, {13, 15, 0}, g);
  ASSERT_TRUE(path);
  bool any_reverse = false;
  for (const auto& p : path->poses) any_reverse |= p.direction == Direction::kReverse;
  EXPECT_TRUE(any_reverse);
}

TEST(Search, Deterministic) {
  auto g = empty_grid(40, 30);
  fill_rect(g, 15, 5, 18, 22);
  fill_rect(g, 25, 10, 28, 30);
  const auto a = search({4, 10, 0.2}, {36, 20, -0.4}, g);
  const auto b = search({4, 10, 0.2}, {36, 20, -0.4}, g);
  ASSERT_TRUE(a && b);
  ASSERT_EQ(a->poses.size(), b->poses.size());
  for (std::size_t i = 0; i < a->poses.size(); ++i) {
    EXPECT_EQ(a->poses[i].x, b->poses[i].x);
    EXPECT_EQ(a->poses[i].y, b->poses[i].y);
    EXPECT_EQ(a->poses[i].psi, b->poses[i].psi);
  }
  EXPECT_EQ(a->expansions, b->expansions);
}

TEST(Search, HeuristicAdmissibleOnRandomInstances) {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> ux(3, 37), uy(3, 27), ang(-kPi, kPi), sz(1, 4);
  int solved = 0;
  for (int trial = 0; trial < 300 && solved < 100; ++trial) {
    auto g = empty_grid(40, 30);
    for (int k = 0; k < 4; ++k) {
      const double x = ux(rng), y = uy(rng);
      fill_rect(g, x, y, x + sz(rng), y + sz(rng));
    }
    const SearchPose s{ux(rng), uy(rng), ang(rng)}, t{ux(rng), uy(rng), ang(rng)};
    if (!collision_free(s, g) || !collision_free(t, g)) continue;
    SearchOptions opts;
    opts.max_expansions = 30000;
    const auto path = search(s, t, g, {}, opts);
    if (!path) continue;
    ++solved;
    EXPECT_LE(heuristic(s, t, g), path->length + 1e-9) << "trial " << trial;
    EXPECT_GE(path->length + 1e-9, std::hypot(t.x - s.x, t.y - s.y));
    for (std::size_t i = 1; i < path->poses.size(); ++i) {
      EXPECT_TRUE(collision_free(path->poses[i], g));
      const double step = std::hypot(path->poses[i].x - path->poses[i - 1].x,
                                     path->poses[i].y - path->poses[i - 1].y);
      EXPECT_LE(step, 1.0 + 1e-9);
    }
  }
  EXPECT_EQ(solved, 100);
}

TEST(Search, RejectsSelfLoopingPrimitives) {
  MotionPrimitiveSet prims;
  prims.curvatures = {0.0, 4.0};
  EXPECT_THROW(search({5, 5, 0}, {10, 5, 0}, empty_grid(20, 20), prims), std::invalid_argument);
}

TEST(PathCsv, RoundTrip) {
  const auto path = search({15, 15, 0}, {13, 15, 0}, empty_grid(30, 30));
  ASSERT_TRUE(path);
  std::stringstream ss;
  write_path_csv(ss, *path);
  const auto back = read_path_csv(ss);
  ASSERT_EQ(back.poses.size(), path->poses.size());
  EXPECT_NEAR(back.length, path->length, 0.01 * path->length);
  for (std::size_t i = 0; i < back.poses.size(); ++i)
    EXPECT_EQ(back.poses[i].direction, path->poses[i].direction);
}
