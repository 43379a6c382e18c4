#pragma once

#include <cmath>

#include "usvplan/vessel_dynamics.hpp"

namespace usvplan::test_support {

/// Empirical convergence order of the RK4 step on a turning, accelerating
/// rollout with constant thrust. Errors are taken against a reference run at
/// dt / 64, so the estimate is log2(e(dt) / e(dt/2)).
inline double measured_rk4_order(double dt = 0.2, double horizon = 4.0) {
  const HullParams p;
  const StateVector x0 = (StateVector() << 1.0, -2.0, 0.3, 0.8, 0.1, 0.05).finished();
  const ControlVector tau(60.0, 12.0);
  auto rollout = [&](double h) {
    const int n = static_cast<int>(std::lround(horizon / h));
    StateVector s = x0;
    for (int k = 0; k < n; ++k) s = rk4(s, tau, p, h);
    return s;
  };
  const StateVector ref = rollout(dt / 64.0);
  const double e1 = (rollout(dt) - ref).norm();
  const double e2 = (rollout(dt / 2.0) - ref).norm();
  return std::log2(e1 / e2);
}

}  // namespace usvplan::test_support
