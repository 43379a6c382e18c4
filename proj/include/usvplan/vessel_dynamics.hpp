#pragma once

// 3-DOF under-actuated catamaran: kinematics, hull dynamics, thrust allocation
// and the fixed-step RK4 integrator every other module builds on.
//
// Hull equations (body frame, diagonal inertia and linear damping):
//   m11 u' =  tau_u + m22 v r - d11 u
//   m22 v' = -m11 u r - d22 v
//   m33 r' =  tau_r - (m22 - m11) u v - d33 r
// The Coriolis terms are workless, so with zero input the kinetic energy
// 0.5 (m11 u^2 + m22 v^2 + m33 r^2) can only decrease.

#include <cmath>
#include <span>
#include <stdexcept>

#include <Eigen/Core>

#include "usvplan/trajectory.hpp"
#include "usvplan/vessel_state.hpp"

namespace usvplan {

using StateJacobian = Eigen::Matrix<double, 6, 6>;
using ControlJacobian = Eigen::Matrix<double, 6, 2>;

/// Time derivative of the raw 6-vector (psi is not wrapped here).
inline StateVector dynamics(const StateVector& s, const ControlVector& tau, const HullParams& p) {
  const double psi = s[2], u = s[3], v = s[4], r = s[5];
  const double c = std::cos(psi), sn = std::sin(psi);
  StateVector d;
  d[0] = u * c - v * sn;
  d[1] = u * sn + v * c;
  d[2] = r;
  d[3] = (tau[0] + p.m22 * v * r - p.d11 * u) / p.m11;
  d[4] = (-p.m11 * u * r - p.d22 * v) / p.m22;
  d[5] = (tau[1] - (p.m22 - p.m11) * u * v - p.d33 * r) / p.m33;
  return d;
}

/// Partial derivatives of `dynamics` with respect to state (A) and input (B).
inline void dynamics_jacobians(const StateVector& s, const HullParams& p, StateJacobian& a,
                               ControlJacobian& b) {
  const double psi = s[2], u = s[3], v = s[4], r = s[5];
  const double c = std::cos(psi), sn = std::sin(psi);
  a.setZero();
  a(0, 2) = -u * sn - v * c;
  a(0, 3) = c;
  a(0, 4) = -sn;
  a(1, 2) = u * c - v * sn;
  a(1, 3) = sn;
  a(1, 4) = c;
  a(2, 5) = 1.0;
  a(3, 3) = -p.d11 / p.m11;
  a(3, 4) = p.m22 * r / p.m11;
  a(3, 5) = p.m22 * v / p.m11;
  a(4, 3) = -p.m11 * r / p.m22;
  a(4, 4) = -p.d22 / p.m22;
  a(4, 5) = -p.m11 * u / p.m22;
  a(5, 3) = -(p.m22 - p.m11) * v / p.m33;
  a(5, 4) = -(p.m22 - p.m11) * u / p.m33;
  a(5, 5) = -p.d33 / p.m33;
  b.setZero();
  b(3, 0) = 1.0 / p.m11;
  b(5, 1) = 1.0 / p.m33;
}

inline StateVector state_derivative(const VesselState& state, const ControlInput& input,
                                    const HullParams& params) {
  return dynamics(state.as_vector(), input.as_vector(), params);
}

/// One classical RK4 step on the raw vector with the input held constant.
inline StateVector rk4(const StateVector& s, const ControlVector& tau, const HullParams& p,
                       double h) {
  const StateVector k1 = dynamics(s, tau, p);
  const StateVector k2 = dynamics(s + 0.5 * h * k1, tau, p);
  const StateVector k3 = dynamics(s + 0.5 * h * k2, tau, p);
  const StateVector k4 = dynamics(s + h * k3, tau, p);
  return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// RK4 step together with its sensitivities d(next)/d(state), d(next)/d(tau).
inline StateVector rk4_linearized(const StateVector& s, const ControlVector& tau,
                                  const HullParams& p, double h, StateJacobian& jx,
                                  ControlJacobian& ju) {
  StateJacobian a;
  ControlJacobian b;
  const StateJacobian eye = StateJacobian::Identity();

  const StateVector k1 = dynamics(s, tau, p);
  dynamics_jacobians(s, p, a, b);
  const StateJacobian k1x = a;
  const ControlJacobian k1u = b;

  const StateVector s2 = s + 0.5 * h * k1;
  const StateVector k2 = dynamics(s2, tau, p);
  dynamics_jacobians(s2, p, a, b);
  const StateJacobian k2x = a * (eye + 0.5 * h * k1x);
  const ControlJacobian k2u = a * (0.5 * h * k1u) + b;

  const StateVector s3 = s + 0.5 * h * k2;
  const StateVector k3 = dynamics(s3, tau, p);
  dynamics_jacobians(s3, p, a, b);
  const StateJacobian k3x = a * (eye + 0.5 * h * k2x);
  const ControlJacobian k3u = a * (0.5 * h * k2u) + b;

  const StateVector s4 = s + h * k3;
  const StateVector k4 = dynamics(s4, tau, p);
  dynamics_jacobians(s4, p, a, b);
  const StateJacobian k4x = a * (eye + h * k3x);
  const ControlJacobian k4u = a * (h * k3u) + b;

  jx = eye + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  ju = (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
  return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline VesselState step_rk4(const VesselState& state, const ControlInput& input,
                            const HullParams& params, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("step_rk4: dt must be > 0");
  if (!state.finite()) throw std::invalid_argument("step_rk4: non-finite state");
  if (!input.finite()) throw std::invalid_argument("step_rk4: non-finite input");
  return VesselState::from_vector(rk4(state.as_vector(), input.as_vector(), params, dt));
}

/// Solves tau_u = T1 + T2, tau_r = (T1 - T2) B for the two propeller thrusts.
inline ThrusterPair allocate_thrusters(const ControlInput& input, const HullParams& params) {
  const double diff = input.tau_r / params.prop_separation;
  return {0.5 * (input.tau_u + diff), 0.5 * (input.tau_u - diff)};
}

inline ControlInput combine_thrusters(const ThrusterPair& pair, const HullParams& params) {
  return {pair.t_left + pair.t_right, (pair.t_left - pair.t_right) * params.prop_separation};
}

/// Repeated RK4 rollout; the result has inputs.size() + 1 knots.
inline Trajectory simulate(const VesselState& initial, std::span<const ControlInput> inputs,
                           const HullParams& params, double dt) {
  if (inputs.empty()) throw std::invalid_argument("simulate: empty input sequence");
  Trajectory traj;
  traj.dt = dt;
  traj.provenance = Provenance::kExecuted;
  traj.knots.reserve(inputs.size() + 1);
  VesselState s = initial;
  for (const auto& in : inputs) {
    traj.knots.push_back({s, in});
    s = step_rk4(s, in, params, dt);
  }
  traj.knots.push_back({s, {}});
  return traj;
}

/// Kinetic energy of the body-frame motion (added mass included).
inline double kinetic_energy(const VesselState& s, const HullParams& p) {
  return 0.5 * (p.m11 * s.u * s.u + p.m22 * s.v * s.v + p.m33 * s.r * s.r);
}

}  // namespace usvplan
