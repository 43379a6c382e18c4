#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support/ocp_fixtures.hpp"
#include "usvplan/trajectory_optimizer.hpp"

using namespace usvplan;

namespace {

OccupancyGrid empty_grid(double w, double h) { return OccupancyGrid(GridSpec::covering(w, h, 0.5), Cell::kFree); }

PlannedPath arc_path(SearchPose start, const std::vector<std::pair<double, double>>& pieces) {
  PlannedPath p;
  p.poses.push_back(start);
  for (const auto& [kappa, len] : pieces) {
    const SearchPose from = p.poses.back();
    const int n = static_cast<int>(std::ceil(std::abs(len) / 0.5));
    for (int k = 1; k <= n; ++k) p.poses.push_back(advance_arc(from, kappa, len * k / n));
    p.length += std::abs(len);
  }
  return p;
}

Trajectory straight_reference(double len) {
  return build_reference(arc_path({5, 10, 0}, {{0.0, len}}), HullParams{}, 1.6, 0.1);
}

double smoothness(const Trajectory& t) {
  double s = 0.0;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const double a = t.control(i).tau_u - t.control(i - 1).tau_u;
    const double b = t.control(i).tau_r - t.control(i - 1).tau_r;
    s += a * a + b * b;
  }
  return s;
}

int argmax_abs(const Eigen::VectorXd& g) {
  int k = 0;
  g.cwiseAbs().maxCoeff(&k);
  return k;
}

}  // namespace

TEST(BuildReference, StraightLine) {
  const auto ref = straight_reference(40.0);
  // 25 s at cruise plus one ramp's worth of extra time.
  EXPECT_NEAR(static_cast<double>(ref.size()), 271.0, 3.0);
  EXPECT_NEAR(ref.state(ref.size() / 2).u, 1.6, 1e-12);
  EXPECT_NEAR(ref.state(ref.size() / 2).r, 0.0, 1e-12);
  EXPECT_NEAR(ref.knots.back().state.x, 45.0, 1e-9);
  EXPECT_NEAR(ref.knots.back().state.u, 0.0, 1e-12);
  EXPECT_EQ(ref.state(0).u, 0.0);
  for (std::size_t i = 1; i < ref.size(); ++i) EXPECT_GE(ref.state(i).x, ref.state(i - 1).x);
}

TEST(BuildReference, ZeroLengthIsStationary) {
  PlannedPath p;
  p.poses.push_back({3, 4, 0.5});
  const auto ref = build_reference(p, HullParams{}, 1.0, 0.1);
  ASSERT_EQ(ref.size(), 2u);
  for (const auto& k : ref.knots) {
    EXPECT_EQ(k.state.x, 3.0);
    EXPECT_EQ(k.state.u, 0.0);
    EXPECT_EQ(k.state.r, 0.0);
  }
}

TEST(BuildReference, QuarterCircleYawRate) {
  const auto ref = build_reference(arc_path({0, 0, 0}, {{0.2, 2 * kPi * 5 / 4}}), HullParams{}, 1.0, 0.1);
  // r = u * kappa once the ramp is over.
  int cruising = 0;
  for (const auto& k : ref.knots)
    if (std::abs(k.state.u - 1.0) < 1e-12) {
      ++cruising;
      EXPECT_NEAR(k.state.r, 0.2, 2e-3);
    }
  EXPECT_GT(cruising, 40);
}

TEST(BuildReference, ReverseRunHasNegativeSurge) {
  const auto ref = build_reference(arc_path({10, 10, 0}, {{0.0, 4.0}, {0.0, -3.0}}), HullParams{}, 1.0, 0.1);
  bool saw_reverse = false;
  for (const auto& k : ref.knots) saw_reverse |= k.state.u < -0.5;
  EXPECT_TRUE(saw_reverse);
  EXPECT_NEAR(ref.knots.back().state.x, 11.0, 1e-9);
}

TEST(BuildReference, RejectsBadCruise) {
  const auto p = arc_path({0, 0, 0}, {{0.0, 5.0}});
  EXPECT_THROW(build_reference(p, HullParams{}, 0.0, 0.1), std::invalid_argument);
  EXPECT_THROW(build_reference(p, HullParams{}, 2.5, 0.1), std::invalid_argument);
}

TEST(Transcription, GlobalGradientMatchesDifferences) {
  const auto grid = test_support::block_grid();
  const auto f = test_support::global_fixture(grid);
  std::mt19937 rng(3);
  for (int k = 0; k < 20; ++k) {
    const auto z = test_support::random_point(f, rng);
    EXPECT_LE(check_gradient(f.problem, z, 1e-6), 1e-5);
  }
}

TEST(Transcription, HorizonGradientMatchesDifferences) {
  const auto f = test_support::horizon_fixture();
  std::mt19937 rng(4);
  for (int k = 0; k < 20; ++k) {
    const auto z = test_support::random_point(f, rng);
    EXPECT_LE(check_gradient(f.problem, z, 1e-6), 1e-5);
  }
}

TEST(Transcription, DefectJacobianMatchesDifferences) {
  const auto grid = test_support::block_grid();
  for (const auto& f : {test_support::global_fixture(grid), test_support::horizon_fixture()}) {
    std::mt19937 rng(5);
    std::normal_distribution<double> n01;
    for (int k = 0; k < 5; ++k) {
      const auto z = test_support::random_point(f, rng);
      Eigen::VectorXd w(6 * f.tr->intervals());
      for (int i = 0; i < w.size(); ++i) w[i] = n01(rng);
      EXPECT_LE(check_constraint_jacobian(f.problem, z, w, 1e-6), 1e-6);
    }
  }
}

TEST(Transcription, CorruptedGradientIsDetected) {
  const auto f = test_support::horizon_fixture();
  std::mt19937 rng(6);
  const auto z = test_support::random_point(f, rng);
  Eigen::VectorXd g(f.problem.dim);
  f.problem.objective(z, &g);
  const auto bad = test_support::corrupt_gradient(f.problem, argmax_abs(g));
  EXPECT_GE(check_gradient(bad, z, 1e-6), 5e-3);
}

TEST(Transcription, HingeActiveNearBlock) {
  const auto grid = test_support::block_grid();
  const auto f = test_support::global_fixture(grid);
  std::vector<StateVector> xs(f.tr->data().x_ref);
  std::vector<ControlVector> us(f.tr->intervals(), ControlVector::Zero());
  const double base = f.tr->objective(f.tr->pack(xs, us), nullptr);
  xs[15][1] = 12.0;  // about a metre from the block face
  const double near = f.tr->objective(f.tr->pack(xs, us), nullptr);
  EXPECT_GT(near - base, 0.5 * 1.5 * 1.5);
}

TEST(Optimize, StationaryReferenceIsFixedPoint) {
  Trajectory ref;
  ref.dt = 0.1;
  for (int i = 0; i < 30; ++i) ref.knots.push_back({{10, 10, 0.3, 0, 0, 0}, {}});
  const auto grid = empty_grid(20, 20);
  const auto res = optimize(ref, ref.state(0), ref.state(29), &grid, HullParams{}, CostWeights{});
  ASSERT_TRUE(res.ok()) << res.message;
  EXPECT_LE(res.objective, 1e-12);
  for (const auto& k : res.trajectory.knots) {
    EXPECT_NEAR(k.control.tau_u, 0.0, 1e-9);
    EXPECT_NEAR(k.control.tau_r, 0.0, 1e-9);
    EXPECT_NEAR(k.state.x, 10.0, 1e-9);
  }
}

TEST(Optimize, FeasibleReferenceIsRecovered) {
  const HullParams hp;
  std::vector<ControlInput> in;
  for (int i = 0; i < 60; ++i) in.push_back({80.0 + i, 6.0 * std::sin(0.1 * i)});
  Trajectory ref = simulate({5, 10, 0, 0.5, 0, 0}, in, hp, 0.1);
  const auto grid = empty_grid(40, 20);
  CostWeights w;
  w.w_tau = {0, 0};
  w.w_u = {0, 0};
  OptimizerOptions o;
  o.solver.max_inner_iters = 2000;
  o.solver.max_outer_iters = 20;
  const auto res = optimize(ref, ref.state(0), ref.knots.back().state, &grid, hp, w, o);
  ASSERT_TRUE(res.ok()) << res.message;
  EXPECT_LE(res.objective, res.warm_objective + 1e-6);
  EXPECT_LE(res.objective, 1e-6);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_NEAR(res.trajectory.state(i).x, ref.state(i).x, 1e-3);
    EXPECT_NEAR(res.trajectory.state(i).y, ref.state(i).y, 1e-3);
    EXPECT_NEAR(angle_diff(res.trajectory.state(i).psi, ref.state(i).psi), 0.0, 1e-3);
  }
}

TEST(Optimize, StraightLineProperties) {
  const HullParams hp;
  const auto ref = straight_reference(20.0);
  const auto grid = empty_grid(40, 20);
  const auto res = optimize(ref, ref.state(0), ref.knots.back().state, &grid, hp, CostWeights{});
  ASSERT_TRUE(res.ok()) << res.message;
  EXPECT_EQ(res.trajectory.provenance, Provenance::kOptimized);
  EXPECT_LE(res.max_defect, 1e-3);
  EXPECT_LE(res.objective, res.warm_objective);
  const auto warm = dynamics_projected_reference(ref, ref.state(0), hp);
  EXPECT_LE(smoothness(res.trajectory), smoothness(warm));
  for (const auto& k : res.trajectory.knots) {
    EXPECT_TRUE(hp.within_bounds(k.control));
    EXPECT_LE(std::abs(k.state.u), hp.u_max + 1e-9);
  }
  EXPECT_NEAR(res.trajectory.knots.back().state.x, 25.0, 1e-9);
}

TEST(Optimize, ArgminInvariantToWeightScale) {
  const HullParams hp;
  const auto ref = build_reference(arc_path({5, 10, 0}, {{0.0, 2.0}, {1.0 / 3, 2.0}}), hp, 1.0, 0.1);
  const auto grid = empty_grid(40, 20);
  OptimizerOptions o;
  o.solver.grad_tol = 1e-9;
  o.solver.constraint_tol = 1e-10;
  o.solver.max_inner_iters = 20000;
  o.solver.max_outer_iters = 30;
  const CostWeights w;
  const auto a = optimize(ref, ref.state(0), ref.knots.back().state, &grid, hp, w, o);
  const auto b = optimize(ref, ref.state(0), ref.knots.back().state, &grid, hp, w.scaled(10.0), o);
  ASSERT_TRUE(a.ok() && b.ok());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    const StateVector d = a.trajectory.state(i).as_vector() - b.trajectory.state(i).as_vector();
    EXPECT_LE(d.lpNorm<Eigen::Infinity>(), 1e-4) << i;
  }
}

TEST(Optimize, LongReferenceUsesStitchedWindows) {
  const HullParams hp;
  const auto ref = straight_reference(70.0);
  ASSERT_GT(ref.size(), 401u);
  const auto grid = empty_grid(90, 20);
  const auto res = optimize(ref, ref.state(0), ref.knots.back().state, &grid, hp, CostWeights{});
  ASSERT_TRUE(res.ok()) << res.message;
  EXPECT_EQ(res.windows, 2);
  EXPECT_EQ(res.trajectory.size(), ref.size());
  EXPECT_LE(res.max_defect, 1e-3);
}

TEST(Optimize, CollisionIsReported) {
  // A wall across the whole map: no trajectory between the ends is clear.
  auto grid = empty_grid(30, 20);
  for (int r = 0; r < grid.nrows(); ++r)
    for (int c = 28; c < 32; ++c) grid.set(c, r, Cell::kOccupied);
  const auto ref = build_reference(arc_path({5, 10, 0}, {{0.0, 20.0}}), HullParams{}, 1.6, 0.1);
  const auto res = optimize(ref, ref.state(0), ref.knots.back().state, &grid, HullParams{}, CostWeights{});
  EXPECT_EQ(res.status, OptimizeStatus::kCollision);
}

TEST(Optimize, RejectsBadInput) {
  Trajectory one;
  one.knots.push_back({});
  EXPECT_THROW(optimize(one, {}, {}, nullptr, HullParams{}, CostWeights{}), std::invalid_argument);
  CostWeights w;
  w.w_x = {0, 0, 0, 0, 0, 0};
  const auto ref = straight_reference(5.0);
  EXPECT_THROW(optimize(ref, ref.state(0), ref.state(1), nullptr, HullParams{}, w), std::invalid_argument);
}

TEST(Metrics, SelfComparisonIsZero) {
  const auto ref = straight_reference(10.0);
  const auto m = trajectory_metrics(ref, ref);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.max_error, 0.0);
  EXPECT_NEAR(m.length, 10.0, 1e-9);
}

TEST(Metrics, MeanSpeed) {
  Trajectory t;
  t.dt = 0.1;
  for (int i = 0; i <= 250; ++i) t.knots.push_back({{0.16 * i, 0, 0, 1.6, 0, 0}, {}});
  EXPECT_NEAR(trajectory_metrics(t, t).mean_speed, 1.6, 1e-12);
}

TEST(Metrics, UniformLateralOffset) {
  Trajectory ref, off;
  ref.dt = off.dt = 0.1;
  for (int i = 0; i <= 100; ++i) {
    ref.knots.push_back({{0.1 * i, 0, 0, 1, 0, 0}, {}});
    off.knots.push_back({{0.1 * i, 0.1, 0, 1, 0, 0}, {}});
  }
  const auto m = trajectory_metrics(off, ref);
  EXPECT_NEAR(m.rmse, 0.1, 1e-12);
  EXPECT_NEAR(m.max_error, 0.1, 1e-12);
  PlannedPath p;
  p.poses = {{0, 0, 0}, {10, 0, 0}};
  const auto mp = trajectory_metrics(off, p);
  EXPECT_NEAR(mp.rmse, 0.1, 1e-12);
  EXPECT_NEAR(mp.max_error, 0.1, 1e-12);
}
