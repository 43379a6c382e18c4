#pragma once

// Planned path -> time-parameterised reference -> dynamically feasible
// low-effort trajectory, plus the length / error metrics used by the bench.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "usvplan/hybrid_astar.hpp"
#include "usvplan/occupancy_grid.hpp"
#include "usvplan/trajectory.hpp"
#include "usvplan/transcription.hpp"
#include "usvplan/vessel_dynamics.hpp"

namespace usvplan {

namespace ref_detail {

/// Trapezoidal speed profile over a run of length `len` from speed v0 to
/// rest. Returns the distance covered after time t. A start speed too high
/// to stop within `len` at `accel` brakes harder instead.
struct Trapezoid {
  double len = 0.0, v0 = 0.0, accel = 1.0, decel = 1.0, vpeak = 0.0, t_up = 0.0, t_cruise = 0.0, t_down = 0.0;

  Trapezoid(double length, double cruise, double a, double start_speed = 0.0)
      : len(length), v0(std::max(0.0, start_speed)), accel(a), decel(a) {
    vpeak = std::min(cruise, std::sqrt(a * length + 0.5 * v0 * v0));
    if (vpeak < v0) {
      vpeak = v0;
      if (length > 0.0) decel = std::max(a, v0 * v0 / (2.0 * length));
    }
    t_up = (vpeak - v0) / accel;
    t_down = vpeak / decel;
    const double d_up = 0.5 * (v0 + vpeak) * t_up, d_down = 0.5 * vpeak * t_down;
    t_cruise = vpeak > 0.0 ? std::max(0.0, (length - d_up - d_down) / vpeak) : 0.0;
  }
  double duration() const { return t_up + t_cruise + t_down; }
  double distance(double t) const {
    t = std::clamp(t, 0.0, duration());
    if (t <= t_up) return v0 * t + 0.5 * accel * t * t;
    const double d_up = 0.5 * (v0 + vpeak) * t_up;
    if (t <= t_up + t_cruise) return d_up + vpeak * (t - t_up);
    const double tr = duration() - t;
    return std::min(len, len - 0.5 * decel * tr * tr);
  }
  double speed(double t) const {
    t = std::clamp(t, 0.0, duration());
    if (t <= t_up) return v0 + accel * t;
    if (t <= t_up + t_cruise) return vpeak;
    return decel * (duration() - t);
  }
};

}  // namespace ref_detail

/// Surge acceleration used for the reference ramps: stays inside the thrust
/// margin left over at cruise speed.
inline double reference_acceleration(const HullParams& p, double cruise) {
  return std::min(0.8, 0.9 * (p.tau_u_max - p.d11 * cruise) / p.m11);
}

/// Time-parameterises `path` at `cruise` with ramps to rest on each
/// same-gear run; the first run starts at `start_speed` (forward gear only).
/// Controls are left at zero.
inline Trajectory build_reference(const PlannedPath& path, const HullParams& params, double cruise, double dt,
                                  std::optional<VesselState> x0 = std::nullopt,
                                  std::optional<VesselState> xf = std::nullopt, double start_speed = 0.0) {
  if (!(cruise > 0.0) || cruise > params.u_max)
    throw std::invalid_argument("build_reference: cruise speed must be in (0, u_max]");
  if (!(dt > 0.0)) throw std::invalid_argument("build_reference: dt must be > 0");
  if (path.poses.empty()) throw std::invalid_argument("build_reference: empty path");
  const double accel = reference_acceleration(params, cruise);
  if (!(accel > 0.0)) throw std::invalid_argument("build_reference: no thrust margin at cruise speed");

  const auto& P = path.poses;
  // Unwrapped headings and cumulative chord length.
  std::vector<double> psi(P.size()), s(P.size(), 0.0);
  psi[0] = P[0].psi;
  for (std::size_t k = 1; k < P.size(); ++k) {
    psi[k] = psi[k - 1] + angle_diff(P[k].psi, P[k - 1].psi);
    s[k] = s[k - 1] + std::hypot(P[k].x - P[k - 1].x, P[k].y - P[k - 1].y);
  }

  Trajectory ref;
  ref.dt = dt;
  ref.provenance = Provenance::kInitial;
  auto push = [&](double x, double y, double heading, double u) {
    VesselState st{x, y, heading, u, 0.0, 0.0};
    ref.knots.push_back({st, {}});
  };

  // Runs of constant gear; the gear of segment k-1 -> k is P[k].direction.
  std::size_t run_start = 0;
  bool first_run = true;
  while (run_start + 1 < P.size()) {
    std::size_t run_end = run_start + 1;
    const Direction gear = P[run_end].direction;
    while (run_end + 1 < P.size() && P[run_end + 1].direction == gear) ++run_end;
    const double len = s[run_end] - s[run_start];
    const double sign = gear == Direction::kReverse ? -1.0 : 1.0;
    if (len > 1e-9) {
      const double v0 = first_run && gear == Direction::kForward ? start_speed : 0.0;
      const ref_detail::Trapezoid tz(len, cruise, accel, v0);
      const int steps = std::max(1, static_cast<int>(std::ceil(tz.duration() / dt - 1e-9)));
      std::size_t seg = run_start;
      // A cusp knot is shared between consecutive runs.
      for (int j = first_run ? 0 : 1; j <= steps; ++j) {
        const double t = std::min(j * dt, tz.duration());
        const double sq = s[run_start] + tz.distance(t);
        while (seg + 1 < run_end && s[seg + 1] < sq) ++seg;
        const double span = s[seg + 1] - s[seg];
        const double a = span > 0.0 ? std::clamp((sq - s[seg]) / span, 0.0, 1.0) : 1.0;
        push(P[seg].x + a * (P[seg + 1].x - P[seg].x), P[seg].y + a * (P[seg + 1].y - P[seg].y),
             psi[seg] + a * (psi[seg + 1] - psi[seg]), sign * tz.speed(t));
      }
      first_run = false;
    }
    run_start = run_end;
  }
  if (ref.knots.empty()) push(P[0].x, P[0].y, P[0].psi, 0.0);
  if (ref.knots.size() < 2) ref.knots.push_back(ref.knots.back());

  // Yaw rate from central differences of the unwrapped heading.
  const std::size_t n = ref.knots.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1, b = std::min(n - 1, i + 1);
    if (b > a)
      ref.knots[i].state.r = (ref.knots[b].state.psi - ref.knots[a].state.psi) / ((b - a) * dt);
  }
  if (x0) ref.knots.front().state = *x0;
  if (xf) ref.knots.back().state = *xf;
  for (auto& k : ref.knots) k.state.psi = wrap_angle(k.state.psi);
  return ref;
}

struct OptimizerOptions {
  SolveOptions solver{};
  double defect_tol = 1e-3;
  int window = 400;   ///< max intervals per solve
  int overlap = 50;   ///< knots shared with the next window
  double obstacle_margin = 1.0;
  double obstacle_weight = 100.0;
  bool unknown_is_obstacle = true;
  bool check_collisions = true;
  bool pin_final = true;  ///< false leaves the last knot free (receding local windows)
};

enum class OptimizeStatus { kOk, kSolverFailure, kDefectViolation, kCollision };

inline const char* to_string(OptimizeStatus s) {
  switch (s) {
    case OptimizeStatus::kOk:
      return "ok";
    case OptimizeStatus::kSolverFailure:
      return "solver-failure";
    case OptimizeStatus::kDefectViolation:
      return "defect-violation";
    case OptimizeStatus::kCollision:
      return "collision";
  }
  return "?";
}

struct OptimizeResult {
  Trajectory trajectory;
  OptimizeStatus status = OptimizeStatus::kOk;
  double max_defect = 0.0;
  double objective = 0.0;       ///< full-horizon cost of the result
  double warm_objective = 0.0;  ///< same cost for the dynamics-projected reference
  int windows = 0;
  int iterations = 0;
  std::vector<SolveReport> reports;
  std::string message;
  bool ok() const { return status == OptimizeStatus::kOk; }
};

namespace opt_detail {

/// Per-step least-squares inverse dynamics: the clipped control that brings
/// RK4(from, tau) closest to `to`, by a few Gauss-Newton passes.
inline ControlVector inverse_dynamics(const StateVector& from, const StateVector& to, const HullParams& p,
                                      double dt, ControlVector guess) {
  ControlVector tau = guess;
  for (int it = 0; it < 3; ++it) {
    StateJacobian jx;
    ControlJacobian ju;
    StateVector e = to - rk4_linearized(from, tau, p, dt, jx, ju);
    e[2] = wrap_angle(e[2]);
    const Eigen::Matrix2d h = ju.transpose() * ju;
    tau += h.ldlt().solve(ju.transpose() * e);
    tau[0] = std::clamp(tau[0], p.tau_u_min, p.tau_u_max);
    tau[1] = std::clamp(tau[1], -p.tau_r_max, p.tau_r_max);
  }
  return tau;
}

inline std::vector<StateVector> states_of(const Trajectory& t) {
  std::vector<StateVector> xs;
  xs.reserve(t.size());
  for (const auto& k : t.knots) xs.push_back(k.state.as_vector());
  return xs;
}

inline bool point_collides(const OccupancyGrid& grid, double x, double y, bool unknown_is_obstacle) {
  const auto cell = grid.cell_of(x, y);
  if (!cell) return true;
  return grid.blocked(cell->col, cell->row, unknown_is_obstacle);
}

}  // namespace opt_detail

/// Controls from per-step inverse dynamics along the reference states.
inline std::vector<ControlVector> warm_start_controls(const Trajectory& reference, const HullParams& params) {
  const auto xs = opt_detail::states_of(reference);
  std::vector<ControlVector> us(xs.size() - 1);
  ControlVector guess = ControlVector::Zero();
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    us[i] = opt_detail::inverse_dynamics(xs[i], xs[i + 1], params, reference.dt, guess);
    guess = us[i];
  }
  return us;
}

/// Feasible rollout from x0 that chases the reference by per-step inverse
/// dynamics: the baseline the optimizer must not lose to.
inline Trajectory dynamics_projected_reference(const Trajectory& reference, const VesselState& x0,
                                               const HullParams& params) {
  Trajectory out;
  out.dt = reference.dt;
  out.provenance = Provenance::kInitial;
  StateVector x = x0.as_vector();
  ControlVector guess = ControlVector::Zero();
  for (std::size_t i = 0; i + 1 < reference.size(); ++i) {
    const ControlVector u =
        opt_detail::inverse_dynamics(x, reference.state(i + 1).as_vector(), params, reference.dt, guess);
    guess = u;
     out.knots.push_back({VesselState::from_vector(x), ControlInput::from_vector(u)});
    x = rk4(x, u, params, reference.dt);
  }
  out.knots.push_back({VesselState::from_vector(x), out.knots.empty() ? ControlInput{} : out.knots.back().control});
  return out;
}

/// Cost of a trajectory against a reference with free end state.
inline double trajectory_cost(const Trajectory& traj, const Trajectory& reference, const HullParams& params,
                              const CostWeights& weights, const DistanceField* clearance = nullptr,
                              double margin = 1.0, double obstacle_weight = 100.0) {
  if (traj.size() != reference.size()) throw std::invalid_argument("trajectory_cost: size mismatch");
  OcpData d;
  d.params = params;
  d.dt = reference.dt;
  d.x_ref = opt_detail::states_of(reference);
  d.weights = weights;
  d.x0 = traj.state(0).as_vector();
  d.clearance = clearance;
  d.obstacle_margin = margin;
  d.obstacle_weight = obstacle_weight;
  const Transcription tr(d);
  std::vector<StateVector> xs = opt_detail::states_of(traj);
  std::vector<ControlVector> us;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) us.push_back(traj.control(i).as_vector());
  return tr.objective(tr.pack(xs, us), nullptr);
}

/// Solves the tracking problem against `reference` with x0 and xf pinned.
inline OptimizeResult optimize(const Trajectory& reference, const VesselState& x0, const VesselState& xf,
                               const OccupancyGrid* grid, const HullParams& params, const CostWeights& weights,
                               const OptimizerOptions& opts = {}) {
  if (reference.size() < 2) throw std::invalid_argument("optimize: reference needs at least 2 knots");
  if (!x0.finite() || !xf.finite()) throw std::invalid_argument("optimize: non-finite end state");
  if (opts.window < 2 || opts.overlap < 0 || opts.overlap >= opts.window)
    throw std::invalid_argument("optimize: need window >= 2 and 0 <= overlap < window");
  weights.validate();
  opts.solver.validate();

  std::optional<DistanceField> field;
  if (grid) field.emplace(*grid, opts.unknown_is_obstacle);

  Trajectory ref = reference;
  ref.knots.front().state = x0;
  ref.knots.back().state = xf;
  for (std::size_t i = 1; i < ref.size(); ++i) {
    auto& h = ref.knots[i].state.psi;
    h = ref.knots[i - 1].state.psi + angle_diff(h, ref.knots[i - 1].state.psi);
  }
  const auto xs_ref = opt_detail::states_of(ref);
  const auto us_warm = warm_start_controls(ref, params);
  const int total = static_cast<int>(ref.size()) - 1;

  OptimizeResult res;
  std::vector<StateVector> xs(xs_ref.size());
  std::vector<ControlVector> us(us_warm.size());
  xs[0] = xs_ref[0];

  // Window k covers [a, b]; the next starts at a + window - overlap, pinned to
  // this window's state there.
  int a = 0;
  std::optional<ControlVector> tau_prev;
  while (true) {
    const int b = std::min(total, a + opts.window);
    const bool last = b == total;
    OcpData d;
    d.params = params;
    d.dt = ref.dt;
    d.x_ref.assign(xs_ref.begin() + a, xs_ref.begin() + b + 1);
    d.weights = weights;
    d.x0 = xs[a];
    if (last && opts.pin_final) d.xf = xs_ref[total];
    d.tau_prev = tau_prev;
    d.clearance = field ? &*field : nullptr;
    d.obstacle_margin = opts.obstacle_margin;
    d.obstacle_weight = opts.obstacle_weight;
    const Transcription tr(d);

    std::vector<StateVector> wx(d.x_ref);
    wx.front() = xs[a];
    std::vector<ControlVector> wu(us_warm.begin() + a, us_warm.begin() + b);
    const VectorXd z0 = tr.pack(wx, wu);
    const SolveReport rep = minimize(tr.problem(), z0, opts.solver);
    ++res.windows;
    res.iterations += rep.iterations;
    res.reports.push_back(rep);
    if (rep.status == SolveStatus::kNumericalFailure) {
      res.status = OptimizeStatus::kSolverFailure;
      res.message = "window " + std::to_string(res.windows) + ": numerical failure";
      return res;
    }
    std::vector<StateVector> sx;
    std::vector<ControlVector> su;
    tr.unpack(rep.z_star, sx, su);
    const int keep = last ? b : a + opts.window - opts.overlap;
    for (int i = a + 1; i <= keep; ++i) xs[i] = sx[i - a];
    for (int i = a; i < keep; ++i) us[i] = su[i - a];
    if (last) break;
    tau_prev = us[keep - 1];
    a = keep;
  }

  Trajectory out;
  out.dt = ref.dt;
  out.provenance = Provenance::kOptimized;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const VesselState st = VesselState::from_vector(xs[i]);
    const ControlVector u = i < us.size() ? us[i] : us.back();
    out.knots.push_back({st, ControlInput::from_vector(u)});
  }

  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    StateVector e = xs[i + 1] - rk4(xs[i], us[i], params, ref.dt);
    e[2] = wrap_angle(e[2]);
    worst = std::max(worst, e.lpNorm<Eigen::Infinity>());
  }
  res.max_defect = worst;
  const DistanceField* cf = field ? &*field : nullptr;
  res.objective = trajectory_cost(out, ref, params, weights, cf, opts.obstacle_margin, opts.obstacle_weight);
  res.warm_objective = trajectory_cost(dynamics_projected_reference(ref, x0, params), ref, params, weights, cf,
                                       opts.obstacle_margin, opts.obstacle_weight);
  res.trajectory = std::move(out);
  if (!(worst <= opts.defect_tol)) {
    res.status = OptimizeStatus::kDefectViolation;
    res.message = "max defect " + detail::fmt_num(worst) + " exceeds tolerance";
    return res;
  }
  if (grid && opts.check_collisions) {
    for (std::size_t i = 0; i < res.trajectory.size(); ++i) {
      const auto& st = res.trajectory.state(i);
      if (opt_detail::point_collides(*grid, st.x, st.y, opts.unknown_is_obstacle)) {
        res.status = OptimizeStatus::kCollision;
        res.message = "knot " + std::to_string(i) + " collides";
        return res;
      }
    }
  }
  return res;
}

struct Metrics {
  double length = 0.0;
  double rmse = 0.0;
  double max_error = 0.0;
  double mean_speed = 0.0;
};

/// Errors against a reference trajectory at matched timestamps.
inline Metrics trajectory_metrics(const Trajectory& traj, const Trajectory& reference) {
  if (traj.empty() || reference.empty()) throw std::invalid_argument("trajectory_metrics: empty input");
  Metrics m;
  m.length = traj.planar_length();
  double sq = 0.0;
  const bool same_clock = std::abs(traj.dt - reference.dt) < 1e-12;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& rk = reference.state(std::min(i, reference.size() - 1));
    const Eigen::Vector2d p = same_clock ? Eigen::Vector2d(rk.x, rk.y) : reference.position_at(traj.time(i));
    const double e = std::hypot(traj.state(i).x - p.x(), traj.state(i).y - p.y());
    sq += e * e;
    m.max_error = std::max(m.max_error, e);
  }
  m.rmse = std::sqrt(sq / static_cast<double>(traj.size()));
  m.mean_speed = traj.duration() > 0.0 ? m.length / traj.duration() : 0.0;
  return m;
}

/// Errors against a path by nearest-point matching.
inline Metrics trajectory_metrics(const Trajectory& traj, const PlannedPath& path) {
  if (traj.empty() || path.poses.empty()) throw std::invalid_argument("trajectory_metrics: empty input");
  Metrics m;
  m.length = traj.planar_length();
  double sq = 0.0;
  const auto& P = path.poses;
  for (const auto& k : traj.knots) {
    const Eigen::Vector2d q(k.state.x, k.state.y);
    double best = std::hypot(q.x() - P[0].x, q.y() - P[0].y);
    for (std::size_t j = 1; j < P.size(); ++j) {
      const Eigen::Vector2d a(P[j - 1].x, P[j - 1].y), b(P[j].x, P[j].y);
      const Eigen::Vector2d ab = b - a;
      const double l2 = ab.squaredNorm();
      const double t = l2 > 0.0 ? std::clamp((q - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
      best = std::min(best, (a + t * ab - q).norm());
    }
    sq += best * best;
    m.max_error = std::max(m.max_error, best);
  }
  m.rmse = std::sqrt(sq / static_cast<double>(traj.size()));
  m.mean_speed = traj.duration() > 0.0 ? m.length / traj.duration() : 0.0;
  return m;
}

}  // namespace usvplan
