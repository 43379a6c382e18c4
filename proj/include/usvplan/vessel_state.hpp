#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "usvplan/angles.hpp"
#include "usvplan/config.hpp"

namespace usvplan {

using StateVector = Eigen::Matrix<double, 6, 1>;
using ControlVector = Eigen::Vector2d;

/// Planar pose (world frame) plus body-frame velocities.
struct VesselState {
  double x = 0.0;    ///< east [m]
  double y = 0.0;    ///< north [m]
  double psi = 0.0;  ///< heading [rad], (-pi, pi], counter-clockwise from east
  double u = 0.0;    ///< surge [m/s]
  double v = 0.0;    ///< sway [m/s]
  double r = 0.0;    ///< yaw rate [rad/s]

  StateVector as_vector() const {
    StateVector s;
    s << x, y, psi, u, v, r;
    return s;
  }

  static VesselState from_vector(const StateVector& s) {
    return {s[0], s[1], wrap_angle(s[2]), s[3], s[4], s[5]};
  }

  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(psi) && std::isfinite(u) &&
           std::isfinite(v) && std::isfinite(r);
  }

  bool operator==(const VesselState&) const = default;
};

/// Surge thrust and yaw moment.
struct ControlInput {
  double tau_u = 0.0;  ///< [N]
  double tau_r = 0.0;  ///< [N m]

  ControlVector as_vector() const { return {tau_u, tau_r}; }
  static ControlInput from_vector(const ControlVector& t) { return {t[0], t[1]}; }
  bool finite() const { return std::isfinite(tau_u) && std::isfinite(tau_r); }

  bool operator==(const ControlInput&) const = default;
};

struct ThrusterPair {
  double t_left = 0.0;   ///< T1 [N]
  double t_right = 0.0;  ///< T2 [N]
};

/// Inertia, damping and actuator limits of the 3-DOF catamaran model.
///
/// The defaults describe an Otter-class hull (2.0 m x 1.08 m, 65 kg dry).
struct HullParams {
  double m11 = 85.28;
  double m22 = 162.5;
  double m33 = 41.4;
  double d11 = 77.55;
  double d22 = 162.5;
  double d33 = 45.26;
  double prop_separation = 0.395;
  double u_max = 2.0;
  double r_max = 0.8;
  double tau_u_min = -100.0;
  double tau_u_max = 200.0;
  double tau_r_max = 60.0;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(std::isfinite(v) && v > 0.0))
        throw std::invalid_argument(std::string("HullParams.") + name + " must be > 0");
    };
    positive(m11, "m11");
    positive(m22, "m22");
    positive(m33, "m33");
    positive(d11, "d11");
    positive(d22, "d22");
    positive(d33, "d33");
    positive(prop_separation, "prop_separation");
    positive(u_max, "u_max");
    positive(r_max, "r_max");
    positive(tau_r_max, "tau_r_max");
    if (!std::isfinite(tau_u_min) || !std::isfinite(tau_u_max) || !(tau_u_max > tau_u_min))
      throw std::invalid_argument("HullParams: tau_u_max must exceed tau_u_min");
  }

  ControlInput clamp(ControlInput in) const {
    in.tau_u = std::clamp(in.tau_u, tau_u_min, tau_u_max);
    in.tau_r = std::clamp(in.tau_r, -tau_r_max, tau_r_max);
    return in;
  }

  bool within_bounds(const ControlInput& in, double slack = 1e-9) const {
    return in.tau_u >= tau_u_min - slack && in.tau_u <= tau_u_max + slack &&
           std::abs(in.tau_r) <= tau_r_max + slack;
  }

  /// Reads every field from a section; all keys are required.
  static HullParams from_section(const ConfigSection& s) {
    HullParams p;
    p.m11 = s.number("m11");
    p.m22 = s.number("m22");
    p.m33 = s.number("m33");
    p.d11 = s.number("d11");
    p.d22 = s.number("d22");
    p.d33 = s.number("d33");
    p.prop_separation = s.number("prop_separation");
    p.u_max = s.number("u_max");
    p.r_max = s.number("r_max");
    p.tau_u_min = s.number("tau_u_min");
    p.tau_u_max = s.number("tau_u_max");
    p.tau_r_max = s.number("tau_r_max");
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return p;
  }

  /// Applies any keys present in `s` on top of `*this`.
  HullParams overridden_by(const ConfigSection& s) const {
    HullParams p = *this;
    p.m11 = s.number_or("m11", p.m11);
    p.m22 = s.number_or("m22", p.m22);
    p.m33 = s.number_or("m33", p.m33);
    p.d11 = s.number_or("d11", p.d11);
    p.d22 = s.number_or("d22", p.d22);
    p.d33 = s.number_or("d33", p.d33);
    p.prop_separation = s.number_or("prop_separation", p.prop_separation);
    p.u_max = s.number_or("u_max", p.u_max);
    p.r_max = s.number_or("r_max", p.r_max);
    p.tau_u_min = s.number_or("tau_u_min", p.tau_u_min);
    p.tau_u_max = s.number_or("tau_u_max", p.tau_u_max);
    p.tau_r_max = s.number_or("tau_r_max", p.tau_r_max);
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return p;
  }

  static HullParams load(const std::string& path) {
    return from_section(ConfigFile::load(path).root());
  }
};

}  // namespace usvplan
