#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "usvplan/vessel_state.hpp"

namespace usvplan {

enum class Provenance { kInitial, kOptimized, kExecuted };

struct Knot {
  VesselState state;
  ControlInput control;  ///< applied over [t_i, t_i + dt); unused on the last knot
};

/// Time-stamped states and controls on a fixed step. Knot i sits at t = i * dt.
struct Trajectory {
  double dt = 0.1;
  std::vector<Knot> knots;
  Provenance provenance = Provenance::kInitial;

  std::size_t size() const { return knots.size(); }
  bool empty() const { return knots.empty(); }
  double time(std::size_t i) const { return static_cast<double>(i) * dt; }
  double duration() const { return knots.empty() ? 0.0 : time(knots.size() - 1); }
  const VesselState& state(std::size_t i) const { return knots[i].state; }
  const ControlInput& control(std::size_t i) const { return knots[i].control; }

  /// Index of the knot nearest to t, clamped to the valid range.
  std::size_t index_at(double t) const {
    if (knots.empty()) return 0;
    double k = std::round(t / dt);
    if (!(k > 0.0)) return 0;
    auto idx = static_cast<std::size_t>(k);
    return std::min(idx, knots.size() - 1);
  }

  /// Planar position linearly interpolated at t (clamped to the end points).
  Eigen::Vector2d position_at(double t) const {
    if (knots.empty()) return Eigen::Vector2d::Zero();
    if (t <= 0.0) return {knots.front().state.x, knots.front().state.y};
    double f = t / dt;
    auto i = static_cast<std::size_t>(std::floor(f));
    if (i + 1 >= knots.size()) return {knots.back().state.x, knots.back().state.y};
    double a = f - static_cast<double>(i);
    const auto& s0 = knots[i].state;
    const auto& s1 = knots[i + 1].state;
    return {(1 - a) * s0.x + a * s1.x, (1 - a) * s0.y + a * s1.y};
  }

  double planar_length() const {
    double len = 0.0;
    for (std::size_t i = 1; i < knots.size(); ++i)
      len += std::hypot(knots[i].state.x - knots[i - 1].state.x,
                        knots[i].state.y - knots[i - 1].state.y);
    return len;
  }
};

namespace detail {

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v == 0.0 ? 0.0 : v);  // no "-0"
  return buf;
}

}  // namespace detail

inline constexpr const char* kTrajectoryCsvHeader = "t,x,y,psi,u,v,r,tau_u,tau_r";

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  using detail::fmt_num;
  out << kTrajectoryCsvHeader << '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& s = traj.knots[i].state;
    const auto& c = traj.knots[i].control;
    out << fmt_num(traj.time(i)) << ',' << fmt_num(s.x) << ',' << fmt_num(s.y) << ','
        << fmt_num(s.psi) << ',' << fmt_num(s.u) << ',' << fmt_num(s.v) << ',' << fmt_num(s.r)
        << ',' << fmt_num(c.tau_u) << ',' << fmt_num(c.tau_r) << '\n';
  }
}

inline void save_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_trajectory_csv(out, traj);
}

/// Parses the CSV written by write_trajectory_csv; dt is recovered from the
/// first two timestamps.
inline Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trajectory csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryCsvHeader)
    throw std::runtime_error("trajectory csv: unexpected header '" + line + "'");
  Trajectory traj;
  std::vector<double> times;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::array<double, 9> f{};
    std::istringstream ls(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ls, cell, ',')) {
      if (n >= f.size())
        throw std::runtime_error("trajectory csv line " + std::to_string(lineno) +
                                 ": too many columns");
      try {
        f[n++] = std::stod(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("trajectory csv line " + std::to_string(lineno) +
                                 ": bad number '" + cell + "'");
      }
    }
    if (n != f.size())
      throw std::runtime_error("trajectory csv line " + std::to_string(lineno) +
                               ": expected 9 columns");
    times.push_back(f[0]);
    traj.knots.push_back({{f[1], f[2], wrap_angle(f[3]), f[4], f[5], f[6]}, {f[7], f[8]}});
  }
  if (traj.knots.size() < 2) throw std::runtime_error("trajectory csv: need at least 2 rows");
  traj.dt = times[1] - times[0];
  if (!(traj.dt > 0.0)) throw std::runtime_error("trajectory csv: non-increasing time column");
  return traj;
}

inline Trajectory load_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_trajectory_csv(in);
}

}  // namespace usvplan
