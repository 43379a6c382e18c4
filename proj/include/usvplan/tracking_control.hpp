#pragma once

// Closed-loop tracking: receding-horizon NMPC on the shared transcription and
// a pure-pursuit / dual PID baseline.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "usvplan/occupancy_grid.hpp"
#include "usvplan/trajectory.hpp"
#include "usvplan/transcription.hpp"
#include "usvplan/vessel_dynamics.hpp"

namespace usvplan {

struct NmpcConfig {
  int horizon = 20;
  double dt = 0.1;
  CostWeights weights{{10.0, 10.0, 2.0, 0.5, 0.1, 0.5}, {1e-3, 1e-3}, {1e-2, 1e-2}};
  SolveOptions solver = default_solver();
  /// A max-iters solve is still used when its defects are below this.
  double accept_violation = 1e-2;

  /// Looser than the global solve: a stiff start and tolerances sized to
  /// the 2 s window keep each solve well inside the control period.
  static SolveOptions default_solver() {
    SolveOptions o;
    o.initial_penalty = 1e3;
    o.constraint_tol = 1e-3;
    o.grad_tol = 1e-2;
    return o;
  }

  void validate() const {
    if (horizon < 2) throw std::invalid_argument("NmpcConfig: horizon must be >= 2");
    if (!(dt > 0.0)) throw std::invalid_argument("NmpcConfig: dt must be > 0");
    weights.validate();
    solver.validate();
  }
};

/// Controller memory carried between NMPC calls.
struct NmpcMemory {
  ControlVector last_applied = ControlVector::Zero();
  std::vector<StateVector> xs;
  std::vector<ControlVector> us;
  VectorXd multipliers;
  bool has_warm = false;
};

struct NmpcStep {
  ControlInput applied;
  std::vector<StateVector> predicted;  ///< horizon + 1 states
  std::vector<ControlVector> controls;
  SolveReport report;
  bool degraded = false;
};

namespace nmpc_detail {

inline OcpData window(const VesselState& current, const Trajectory& reference, double t_now,
                      const NmpcConfig& cfg, const HullParams& params, const ControlVector& tau_prev) {
  OcpData d;
  d.params = params;
  d.dt = cfg.dt;
  d.weights = cfg.weights;
  d.x0 = current.as_vector();
  d.tau_prev = tau_prev;
  const std::size_t last = reference.size() - 1;
  const double tref0 = t_now / reference.dt;
  for (int i = 0; i <= cfg.horizon; ++i) {
    const std::size_t k = std::min(last, static_cast<std::size_t>(std::max(0.0, std::round(tref0 + i * cfg.dt / reference.dt))));
    d.x_ref.push_back(reference.state(k).as_vector());
    if (i < cfg.horizon) {
      // Past the end the reference holds its final state at rest.
      d.tau_ref.push_back(k < last ? reference.control(k).as_vector() : ControlVector::Zero());
    }
  }
  return d;
}

}  // namespace nmpc_detail

/// One receding-horizon solve; returns the first control of the window.
inline NmpcStep nmpc_step(const VesselState& current, const Trajectory& reference, double t_now,
                          const NmpcConfig& cfg, const HullParams& params, NmpcMemory& mem) {
  if (reference.empty()) throw std::invalid_argument("nmpc_step: empty reference");
  cfg.validate();
  const OcpData d = nmpc_detail::window(current, reference, t_now, cfg, params, mem.last_applied);
  const Transcription tr(d);
  const int n = cfg.horizon;

  std::vector<StateVector> wx(n + 1);
  std::vector<ControlVector> wu(n);
  const VectorXd* lambda0 = nullptr;
  if (mem.has_warm && static_cast<int>(mem.us.size()) == n) {
    // Shift the previous window by one knot and repeat its last control.
    for (int i = 0; i < n; ++i) wu[i] = mem.us[std::min(i + 1, n - 1)];
    wx[0] = d.x0;
    for (int i = 1; i <= n; ++i)
      wx[i] = i < n ? mem.xs[i + 1] : rk4(mem.xs[n], wu[n - 1], params, cfg.dt);
    if (mem.multipliers.size() == 6 * n) {
      VectorXd shifted(6 * n);
      shifted.head(6 * (n - 1)) = mem.multipliers.tail(6 * (n - 1));
      shifted.tail(6) = mem.multipliers.tail(6);
      mem.multipliers = shifted;
      lambda0 = &mem.multipliers;
    }
  } else {
    wx[0] = d.x0;
    for (int i = 0; i < n; ++i) {
      wu[i] = d.tau_ref[i];
      wu[i][0] = std::clamp(wu[i][0], params.tau_u_min, params.tau_u_max);
      wu[i][1] = std::clamp(wu[i][1], -params.tau_r_max, params.tau_r_max);
      wx[i + 1] = rk4(wx[i], wu[i], params, cfg.dt);
    }
  }

  NmpcStep out;
  out.report = minimize(tr.problem(), tr.pack(wx, wu), cfg.solver, lambda0);
  const bool failed = out.report.status == SolveStatus::kNumericalFailure ||
                      !(out.report.constraint_violation <= cfg.accept_violation) || !out.report.z_star.allFinite();
  if (failed) {
    out.degraded = true;
    out.applied = ControlInput::from_vector(mem.last_applied);
    mem.has_warm = false;
    return out;
  }
  tr.unpack(out.report.z_star, out.predicted, out.controls);
  out.applied = params.clamp(ControlInput::from_vector(out.controls.front()));
  mem.xs = out.predicted;
  mem.us = out.controls;
  mem.multipliers = out.report.multipliers;
  mem.has_warm = true;
  mem.last_applied = out.applied.as_vector();
  return out;
}

struct PidGains {
  double kp = 0.0, ki = 0.0, kd = 0.0;
};

/// Defaults come from the tools/pid_tune grid search on the s_curve scenario.
struct PidConfig {
  PidGains heading{160.0, 2.0, 80.0};
  PidGains speed{800.0, 15360.0, 0.0};
  double lookahead = 1.0;
  double heading_integral_clamp = 2.0;  ///< |integral of heading error| [rad s]
  double speed_integral_clamp = 3.0;    ///< |integral of speed error| [m]
  double dt = 0.1;

  void validate() const {
    for (const auto* g : {&heading, &speed})
      if (!(g->kp >= 0.0) || !(g->ki >= 0.0) || !(g->kd >= 0.0))
        throw std::invalid_argument("PidConfig: gains must be >= 0");
    if (!(lookahead > 0.0)) throw std::invalid_argument("PidConfig: lookahead must be > 0");
    if (!(heading_integral_clamp >= 0.0) || !(speed_integral_clamp >= 0.0))
      throw std::invalid_argument("PidConfig: integral clamps must be >= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("PidConfig: dt must be > 0");
  }
};

struct PidMemory {
  double heading_integral = 0.0;
  double speed_integral = 0.0;
  double prev_heading_error = 0.0;
  double prev_speed_error = 0.0;
  bool started = false;
};

/// Pure-pursuit target: the reference point `lookahead` metres of path
/// beyond knot k (the final knot if the path is shorter).
inline Eigen::Vector2d pursuit_target(const Trajectory& reference, std::size_t k, double lookahead) {
  double acc = 0.0;
  for (std::size_t i = k; i + 1 < reference.size(); ++i) {
    const auto& a = reference.state(i);
    const auto& b = reference.state(i + 1);
    const double seg = std::hypot(b.x - a.x, b.y - a.y);
    if (acc + seg >= lookahead && seg > 0.0) {
      const double f = (lookahead - acc) / seg;
      return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
    }
    acc += seg;
  }
  return {reference.knots.back().state.x, reference.knots.back().state.y};
}

inline ControlInput pid_step(const VesselState& current, const Trajectory& reference, double t_now,
                             const PidConfig& cfg, const HullParams& params, PidMemory& mem) {
  if (reference.empty()) throw std::invalid_argument("pid_step: empty reference");
  const std::size_t k = reference.index_at(t_now);
  const bool finished = t_now > reference.duration();
  const auto& rs = reference.state(k);
  const bool reversing = rs.u < 0.0;

  const Eigen::Vector2d target = pursuit_target(reference, k, cfg.lookahead);
  const double dx = target.x() - current.x, dy = target.y() - current.y;
  double desired = rs.psi;
  if (std::hypot(dx, dy) > 0.25 * cfg.lookahead) {
    desired = std::atan2(dy, dx);
    if (reversing) desired = wrap_angle(desired + kPi);
  }
  const double e_psi = angle_diff(desired, current.psi);
  const double e_u = rs.u - current.u;

  const double de_psi = mem.started ? angle_diff(e_psi, mem.prev_heading_error) / cfg.dt : 0.0;
  const double de_u = mem.started ? (e_u - mem.prev_speed_error) / cfg.dt : 0.0;
  if (finished) {
    mem.heading_integral = 0.0;
    mem.speed_integral = 0.0;
  } else {
    mem.heading_integral = std::clamp(mem.heading_integral + e_psi * cfg.dt, -cfg.heading_integral_clamp,
                                      cfg.heading_integral_clamp);
    mem.speed_integral =
        std::clamp(mem.speed_integral + e_u * cfg.dt, -cfg.speed_integral_clamp, cfg.speed_integral_clamp);
  }
  mem.prev_heading_error = e_psi;
  mem.prev_speed_error = e_u;
  mem.started = true;

  ControlInput out;
  out.tau_r = cfg.heading.kp * e_psi + cfg.heading.ki * mem.heading_integral + cfg.heading.kd * de_psi;
  out.tau_u = cfg.speed.kp * e_u + cfg.speed.ki * mem.speed_integral + cfg.speed.kd * de_u;
  return params.clamp(out);
}

using ControllerConfig = std::variant<NmpcConfig, PidConfig>;

struct TrackingLog {
  Trajectory executed;               ///< one knot per control step, applied control attached
  std::vector<std::size_t> ref_index;
  std::vector<double> solve_ms;
  int degraded_steps = 0;
  int overruns = 0;                  ///< solves slower than the control period
};

class TrackingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double controller_dt(const ControllerConfig& c) {
  return std::visit([](const auto& cfg) { return cfg.dt; }, c);
}

/// Zero-order-hold closed loop. `bounds`, when given, aborts the run if the
/// vessel leaves the map.
inline TrackingLog run_tracking(const Trajectory& reference, const VesselState& x0, const ControllerConfig& controller,
                                const HullParams& params, double sim_dt, double duration,
                                const OccupancyGrid* bounds = nullptr) {
  const double cdt = controller_dt(controller);
  if (!(sim_dt > 0.0) || sim_dt > cdt + 1e-12) throw std::invalid_argument("run_tracking: need 0 < sim_dt <= controller dt");
  const int sub = static_cast<int>(std::round(cdt / sim_dt));
  if (std::abs(sub * sim_dt - cdt) > 1e-9) throw std::invalid_argument("run_tracking: controller dt must be a multiple of sim_dt");
  if (reference.empty()) throw std::invalid_argument("run_tracking: empty reference");
  if (duration + 1e-9 < reference.duration()) throw std::invalid_argument("run_tracking: duration shorter than reference");
  std::visit([](const auto& c) { c.validate(); }, controller);

  TrackingLog log;
  log.executed.dt = cdt;
  log.executed.provenance = Provenance::kExecuted;
  NmpcMemory nmem;
  PidMemory pmem;
  VesselState x = x0;
  const int steps = static_cast<int>(std::round(duration / cdt));
  for (int j = 0; j <= steps; ++j) {
    const double t = j * cdt;
    if (!x.finite()) throw TrackingError("state became non-finite at t = " + detail::fmt_num(t));
    if (bounds && !bounds->cell_of(x.x, x.y)) throw TrackingError("vessel left the map at t = " + detail::fmt_num(t));
    ControlInput u;
    const auto t0 = std::chrono::steady_clock::now();
    if (const auto* nc = std::get_if<NmpcConfig>(&controller)) {
      const NmpcStep st = nmpc_step(x, reference, t, *nc, params, nmem);
      u = st.applied;
      log.degraded_steps += st.degraded ? 1 : 0;
    } else {
      u = pid_step(x, reference, t, std::get<PidConfig>(controller), params, pmem);
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!u.finite() || !params.within_bounds(u)) throw TrackingError("controller produced an invalid input");
    log.executed.knots.push_back({x, u});
    log.ref_index.push_back(reference.index_at(t));
    log.solve_ms.push_back(ms);
    if (ms > 1e3 * cdt) ++log.overruns;
    if (j == steps) break;
    for (int s = 0; s < sub; ++s) x = step_rk4(x, u, params, sim_dt);
  }
  return log;
}

inline constexpr const char* kTrackingCsvHeader = "t,x,y,psi,u,v,r,tau_u,tau_r,ref_index,solve_ms";

/// Without `with_timing` the solve_ms column is written as 0 so the file is
/// reproducible.
inline void write_tracking_csv(std::ostream& out, const TrackingLog& log, bool with_timing = true) {
  using detail::fmt_num;
  out << kTrackingCsvHeader << "\n";
  for (std::size_t i = 0; i < log.executed.size(); ++i) {
    const auto& k = log.executed.knots[i];
    out << fmt_num(log.executed.time(i)) << ',' << fmt_num(k.state.x) << ',' << fmt_num(k.state.y) << ','
        << fmt_num(k.state.psi) << ',' << fmt_num(k.state.u) << ',' << fmt_num(k.state.v) << ','
        << fmt_num(k.state.r) << ',' << fmt_num(k.control.tau_u) << ',' << fmt_num(k.control.tau_r) << ','
        << log.ref_index[i] << ',' << (with_timing ? fmt_num(log.solve_ms[i]) : std::string("0")) << "\n";
  }
}

}  // namespace usvplan
