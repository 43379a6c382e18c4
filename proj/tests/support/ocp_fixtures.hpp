#pragma once

// Small global-optimizer and receding-horizon problems with random feasible
// evaluation points, shared by the gradient tests and the acceptance gate.

#include <memory>
#include <random>
#include <vector>

#include "usvplan/trajectory_optimizer.hpp"

namespace usvplan::test_support {

/// Map with one square block beside a straight reference so that the
/// clearance hinge is active on part of the horizon.
inline OccupancyGrid block_grid() {
  OccupancyGrid g(GridSpec::covering(40, 20, 0.5), Cell::kFree);
  for (int r = 0; r < g.nrows(); ++r)
    for (int c = 0; c < g.ncols(); ++c) {
      const auto p = g.center(c, r);
      if (p.x() > 14 && p.x() < 18 && p.y() > 11 && p.y() < 15) g.set(c, r, Cell::kOccupied);
    }
  return g;
}

struct OcpFixture {
  std::unique_ptr<DistanceField> field;
  std::unique_ptr<Transcription> tr;
  NlpProblem problem;
};

/// Global form: both ends pinned, zero control reference, obstacle hinge.
inline OcpFixture global_fixture(const OccupancyGrid& grid, int knots = 40) {
  OcpFixture f;
  f.field = std::make_unique<DistanceField>(grid);
  OcpData d;
  d.dt = 0.1;
  for (int i = 0; i <= knots; ++i) d.x_ref.push_back((StateVector() << 10 + 0.4 * i, 10.5, 0.05, 1.5, 0, 0).finished());
  d.x0 = d.x_ref.front();
  d.xf = d.x_ref.back();
  d.clearance = f.field.get();
  f.tr = std::make_unique<Transcription>(d);
  f.problem = f.tr->problem();
  return f;
}

/// Receding-horizon form: start pinned, control reference and tau_{-1} set.
inline OcpFixture horizon_fixture(int horizon = 20) {
  OcpFixture f;
  OcpData d;
  d.dt = 0.1;
  d.weights = CostWeights{{10, 10, 2, 0.5, 0.1, 0.5}, {1e-3, 1e-3}, {1e-2, 1e-2}};
  for (int i = 0; i <= horizon; ++i)
    d.x_ref.push_back((StateVector() << 3 + 0.15 * i, 2 - 0.05 * i, -0.3 + 0.02 * i, 1.5, 0.01, 0.2).finished());
  for (int i = 0; i < horizon; ++i) d.tau_ref.push_back(ControlVector(120 + i, 8 - 0.5 * i));
  d.x0 = d.x_ref.front();
  d.tau_prev = ControlVector(110, 5);
  f.tr = std::make_unique<Transcription>(d);
  f.problem = f.tr->problem();
  return f;
}

/// Random point strictly inside the box, states perturbed about the reference.
inline Eigen::VectorXd random_point(const OcpFixture& f, std::mt19937& rng) {
  std::uniform_real_distribution<double> pos(-1.5, 1.5), ang(-0.5, 0.5), vel(-0.3, 0.3), ctl(-0.95, 0.95);
  const auto& d = f.tr->data();
  std::vector<StateVector> xs(d.x_ref);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    xs[i][0] += pos(rng);
    xs[i][1] += pos(rng);
    xs[i][2] += ang(rng);
    xs[i][3] = std::clamp(xs[i][3] + vel(rng), -1.9, 1.9);
    xs[i][4] += vel(rng);
    xs[i][5] = std::clamp(xs[i][5] + vel(rng), -0.75, 0.75);
  }
  std::vector<ControlVector> us(xs.size() - 1);
  for (auto& u : us) {
    u[0] = d.params.tau_u_max * (ctl(rng) > 0 ? 0.9 * std::abs(ctl(rng)) : -0.45 * std::abs(ctl(rng)));
    u[1] = d.params.tau_r_max * ctl(rng);
  }
  return f.tr->pack(xs, us);
}

/// Same problem with component `index` of the gradient scaled by 1.01.
inline NlpProblem corrupt_gradient(NlpProblem p, int index) {
  const auto good = p.objective;
  p.objective = [good, index](const Eigen::VectorXd& z, Eigen::VectorXd* g) {
    const double v = good(z, g);
    if (g) (*g)[index] *= 1.01;
    return v;
  };
  return p;
}

}  // namespace usvplan::test_support
