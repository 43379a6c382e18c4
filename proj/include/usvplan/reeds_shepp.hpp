#pragma once

// Shortest Reeds-Shepp curves between two planar poses.
//
// Closed forms for the CSC, CCC, CCCC, CCSC and CCSCC families in normalised
// coordinates (unit turning radius), combined with the time-flip, reflection
// and backwards symmetries. Segment lengths are signed: negative means reverse.

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "usvplan/angles.hpp"

namespace usvplan {

enum class Direction { kForward, kReverse };

struct SearchPose {
  double x = 0.0;
  double y = 0.0;
  double psi = 0.0;
  Direction direction = Direction::kForward;
};

enum class RsSegment : unsigned char { kNop, kLeft, kStraight, kRight };

struct ReedsSheppPath {
  std::array<RsSegment, 5> type{};
  std::array<double, 5> seg{};  ///< signed, in units of the turning radius
  double radius = 1.0;

  double normalized_length() const {
    double s = 0.0;
    for (double v : seg) s += std::abs(v);
    return s;
  }
  double length() const { return radius * normalized_length(); }
};

namespace rs_detail {

inline constexpr double kZero = 1e-9;
constexpr RsSegment L = RsSegment::kLeft, R = RsSegment::kRight, S = RsSegment::kStraight,
                    N = RsSegment::kNop;

inline constexpr std::array<std::array<RsSegment, 5>, 18> kTypes{{
    {L, R, L, N, N}, {R, L, R, N, N}, {L, R, L, R, N}, {R, L, R, L, N}, {L, R, S, L, N},
    {R, L, S, R, N}, {L, S, R, L, N}, {R, S, L, R, N}, {L, R, S, R, N}, {R, L, S, L, N},
    {R, S, R, L, N}, {L, S, L, R, N}, {L, S, R, N, N}, {R, S, L, N, N}, {L, S, L, N, N},
    {R, S, R, N, N}, {L, R, S, L, R}, {R, L, S, R, L},
}};

/// Reduces to (-pi, pi].
inline double mod2pi(double x) {
  double v = std::fmod(x, kTwoPi);
  if (v < -kPi)
    v += kTwoPi;
  else if (v > kPi)
    v -= kTwoPi;
  return v;
}

inline void polar(double x, double y, double& r, double& theta) {
  r = std::sqrt(x * x + y * y);
  theta = std::atan2(y, x);
}

inline void tau_omega(double u, double v, double xi, double eta, double phi, double& tau,
                      double& omega) {
  const double delta = mod2pi(u - v);
  const double a = std::sin(u) - std::sin(delta);
  const double b = std::cos(u) - std::cos(delta) - 1.0;
  const double t1 = std::atan2(eta * a - xi * b, xi * a + eta * b);
  const double t2 = 2.0 * (std::cos(delta) - std::cos(v) - std::cos(u)) + 3.0;
  tau = t2 < 0 ? mod2pi(t1 + kPi) : mod2pi(t1);
  omega = mod2pi(tau - u + v - phi);
}

inline bool lp_sp_lp(double x, double y, double phi, double& t, double& u, double& v) {
  polar(x - std::sin(phi), y - 1.0 + std::cos(phi), u, t);
  if (t >= -kZero) {
    v = mod2pi(phi - t);
    if (v >= -kZero) return true;
  }
  return false;
}

inline bool lp_sp_rp(double x, double y, double phi, double& t, double& u, double& v) {
  double t1, u1;
  polar(x + std::sin(phi), y - 1.0 - std::cos(phi), u1, t1);
  u1 = u1 * u1;
  if (u1 >= 4.0) {
    u = std::sqrt(u1 - 4.0);
    const double theta = std::atan2(2.0, u);
    t = mod2pi(t1 + theta);
    v = mod2pi(t - phi);
    return t >= -kZero && v >= -kZero;
  }
  return false;
}

inline bool lp_rm_l(double x, double y, double phi, double& t, double& u, double& v) {
  const double xi = x - std::sin(phi), eta = y - 1.0 + std::cos(phi);
  double u1, theta;
  polar(xi, eta, u1, theta);
  if (u1 <= 4.0) {
    u = -2.0 * std::asin(0.25 * u1);
    t = mod2pi(theta + 0.5 * u + kPi);
    v = mod2pi(phi - t + u);
    return t >= -kZero && u <= kZero;
  }
  return false;
}

inline bool lp_rup_lum_rm(double x, double y, double phi, double& t, double& u, double& v) {
  const double xi = x + std::sin(phi), eta = y - 1.0 - std::cos(phi);
  const double rho = 0.25 * (2.0 + std::sqrt(xi * xi + eta * eta));
  if (rho <= 1.0) {
    u = std::acos(rho);
    tau_omega(u, -u, xi, eta, phi, t, v);
    return t >= -kZero && v <= kZero;
  }
  return false;
}

inline bool lp_rum_lum_rp(double x, double y, double phi, double& t, double& u, double& v) {
  const double xi = x + std::sin(phi), eta = y - 1.0 - std::cos(phi);
  const double rho = (20.0 - xi * xi - eta * eta) / 16.0;
  if (rho >= 0.0 && rho <= 1.0) {
    u = -std::acos(rho);
    if (u >= -0.5 * kPi) {
      tau_omega(u, u, xi, eta, phi, t, v);
      return t >= -kZero && v >= -kZero;
    }
  }
  return false;
}

inline bool lp_rm_sm_lm(double x, double y, double phi, double& t, double& u, double& v) {
  const double xi = x - std::sin(phi), eta = y - 1.0 + std::cos(phi);
  double rho, theta;
  polar(xi, eta, rho, theta);
  if (rho >= 2.0) {
    const double r = std::sqrt(rho * rho - 4.0);
    u = 2.0 - r;
    t = mod2pi(theta + std::atan2(r, -2.0));
    v = mod2pi(phi - 0.5 * kPi - t);
    return t >= -kZero && u <= kZero && v <= kZero;
  }
  return false;
}

inline bool lp_rm_sm_rm(double x, double y, double phi, double& t, double& u, double& v) {
  const double xi = x + std::sin(phi), eta = y - 1.0 - std::cos(phi);
  double rho, theta;
  polar(-eta, xi, rho, theta);
  if (rho >= 2.0) {
    t = theta;
    u = 2.0 - rho;
    v = mod2pi(t + 0.5 * kPi - phi);
    return t >= -kZero && u <= kZero && v <= kZero;
  }
  return false;
}

inline bool lp_rm_s_lm_rp(double x, double y, double phi, double& t, double& u, double& v) {
  const double xi = x + std::sin(phi), eta = y - 1.0 - std::cos(phi);
  double rho, theta;
  polar(xi, eta, rho, theta);
  if (rho >= 2.0) {
    u = 4.0 - std::sqrt(rho * rho - 4.0);
    if (u <= kZero) {
      t = mod2pi(std::atan2((4.0 - u) * xi - 2.0 * eta, -2.0 * xi + (u - 4.0) * eta));
      v = mod2pi(t - phi);
      return t >= -kZero && v >= -kZero;
    }
  }
  return false;
}

class Best {
 public:
  void offer(int type, double a, double b, double c, double d = 0.0, double e = 0.0) {
    const double len = std::abs(a) + std::abs(b) + std::abs(c) + std::abs(d) + std::abs(e);
    if (len < best_) {
      best_ = len;
      path_.type = kTypes[type];
      path_.seg = {a, b, c, d, e};
    }
  }
  double length() const { return best_; }
  const ReedsSheppPath& path() const { return path_; }

 private:
  double best_ = std::numeric_limits<double>::infinity();
  ReedsSheppPath path_;
};

inline void csc(double x, double y, double phi, Best& b) {
  double t, u, v;
  if (lp_sp_lp(x, y, phi, t, u, v)) b.offer(14, t, u, v);
  if (lp_sp_lp(-x, y, -phi, t, u, v)) b.offer(14, -t, -u, -v);
  if (lp_sp_lp(x, -y, -phi, t, u, v)) b.offer(15, t, u, v);
  if (lp_sp_lp(-x, -y, phi, t, u, v)) b.offer(15, -t, -u, -v);
  if (lp_sp_rp(x, y, phi, t, u, v)) b.offer(12, t, u, v);
  if (lp_sp_rp(-x, y, -phi, t, u, v)) b.offer(12, -t, -u, -v);
  if (lp_sp_rp(x, -y, -phi, t, u, v)) b.offer(13, t, u, v);
  if (lp_sp_rp(-x, -y, phi, t, u, v)) b.offer(13, -t, -u, -v);
}

inline void ccc(double x, double y, double phi, Best& b) {
  double t, u, v;
  if (lp_rm_l(x, y, phi, t, u, v)) b.offer(0, t, u, v);
  if (lp_rm_l(-x, y, -phi, t, u, v)) b.offer(0, -t, -u, -v);
  if (lp_rm_l(x, -y, -phi, t, u, v)) b.offer(1, t, u, v);
  if (lp_rm_l(-x, -y, phi, t, u, v)) b.offer(1, -t, -u, -v);
  const double xb = x * std::cos(phi) + y * std::sin(phi);
  const double yb = x * std::sin(phi) - y * std::cos(phi);
  if (lp_rm_l(xb, yb, phi, t, u, v)) b.offer(0, v, u, t);
  if (lp_rm_l(-xb, yb, -phi, t, u, v)) b.offer(0, -v, -u, -t);
  if (lp_rm_l(xb, -yb, -phi, t, u, v)) b.offer(1, v, u, t);
  if (lp_rm_l(-xb, -yb, phi, t, u, v)) b.offer(1, -v, -u, -t);
}

inline void cccc(double x, double y, double phi, Best& b) {
  double t, u, v;
  if (lp_rup_lum_rm(x, y, phi, t, u, v)) b.offer(2, t, u, -u, v);
  if (lp_rup_lum_rm(-x, y, -phi, t, u, v)) b.offer(2, -t, -u, u, -v);
  if (lp_rup_lum_rm(x, -y, -phi, t, u, v)) b.offer(3, t, u, -u, v);
  if (lp_rup_lum_rm(-x, -y, phi, t, u, v)) b.offer(3, -t, -u, u, -v);
  if (lp_rum_lum_rp(x, y, phi, t, u, v)) b.offer(2, t, u, u, v);
  if (lp_rum_lum_rp(-x, y, -phi, t, u, v)) b.offer(2, -t, -u, -u, -v);
  if (lp_rum_lum_rp(x, -y, -phi, t, u, v)) b.offer(3, t, u, u, v);
  if (lp_rum_lum_rp(-x, -y, phi, t, u, v)) b.offer(3, -t, -u, -u, -v);
}

inline void ccsc(double x, double y, double phi, Best& b) {
  constexpr double h = 0.5 * kPi;
  double t, u, v;
  if (lp_rm_sm_lm(x, y, phi, t, u, v)) b.offer(4, t, -h, u, v);
  if (lp_rm_sm_lm(-x, y, -phi, t, u, v)) b.offer(4, -t, h, -u, -v);
  if (lp_rm_sm_lm(x, -y, -phi, t, u, v)) b.offer(5, t, -h, u, v);
  if (lp_rm_sm_lm(-x, -y, phi, t, u, v)) b.offer(5, -t, h, -u, -v);
  if (lp_rm_sm_rm(x, y, phi, t, u, v)) b.offer(8, t, -h, u, v);
  if (lp_rm_sm_rm(-x, y, -phi, t, u, v)) b.offer(8, -t, h, -u, -v);
  if (lp_rm_sm_rm(x, -y, -phi, t, u, v)) b.offer(9, t, -h, u, v);
  if (lp_rm_sm_rm(-x, -y, phi, t, u, v)) b.offer(9, -t, h, -u, -v);
  const double xb = x * std::cos(phi) + y * std::sin(phi);
  const double yb = x * std::sin(phi) - y * std::cos(phi);
  if (lp_rm_sm_lm(xb, yb, phi, t, u, v)) b.offer(6, v, u, -h, t);
  if (lp_rm_sm_lm(-xb, yb, -phi, t, u, v)) b.offer(6, -v, -u, h, -t);
  if (lp_rm_sm_lm(xb, -yb, -phi, t, u, v)) b.offer(7, v, u, -h, t);
  if (lp_rm_sm_lm(-xb, -yb, phi, t, u, v)) b.offer(7, -v, -u, h, -t);
  if (lp_rm_sm_rm(xb, yb, phi, t, u, v)) b.offer(10, v, u, -h, t);
  if (lp_rm_sm_rm(-xb, yb, -phi, t, u, v)) b.offer(10, -v, -u, h, -t);
  if (lp_rm_sm_rm(xb, -yb, -phi, t, u, v)) b.offer(11, v, u, -h, t);
  if (lp_rm_sm_rm(-xb, -yb, phi, t, u, v)) b.offer(11, -v, -u, h, -t);
}

inline void ccscc(double x, double y, double phi, Best& b) {
  constexpr double h = 0.5 * kPi;
  double t, u, v;
  if (lp_rm_s_lm_rp(x, y, phi, t, u, v)) b.offer(16, t, -h, u, -h, v);
  if (lp_rm_s_lm_rp(-x, y, -phi, t, u, v)) b.offer(16, -t, h, -u, h, -v);
  if (lp_rm_s_lm_rp(x, -y, -phi, t, u, v)) b.offer(17, t, -h, u, -h, v);
  if (lp_rm_s_lm_rp(-x, -y, phi, t, u, v)) b.offer(17, -t, h, -u, h, -v);
}

}  // namespace rs_detail

/// Shortest path in normalised coordinates: goal at (x, y, phi) relative to a
/// start at the origin facing +x, unit turning radius.
inline ReedsSheppPath reeds_shepp_normalized(double x, double y, double phi) {
  rs_detail::Best best;
  rs_detail::csc(x, y, phi, best);
  rs_detail::ccc(x, y, phi, best);
  rs_detail::cccc(x, y, phi, best);
  rs_detail::ccsc(x, y, phi, best);
  rs_detail::ccscc(x, y, phi, best);
  return best.path();
}

inline ReedsSheppPath reeds_shepp_connect(const SearchPose& from, const SearchPose& to,
                                          double min_turn_radius) {
  const double dx = to.x - from.x, dy = to.y - from.y;
  const double c = std::cos(from.psi), s = std::sin(from.psi);
  const double x = (c * dx + s * dy) / min_turn_radius;
  const double y = (-s * dx + c * dy) / min_turn_radius;
  ReedsSheppPath p = reeds_shepp_normalized(x, y, angle_diff(to.psi, from.psi));
  p.radius = min_turn_radius;
  return p;
}

inline double reeds_shepp_distance(const SearchPose& from, const SearchPose& to,
                                   double min_turn_radius) {
  return reeds_shepp_connect(from, to, min_turn_radius).length();
}

/// Pose reached after travelling `s` metres (signed) along one segment.
inline SearchPose rs_advance(const SearchPose& p, RsSegment type, double s, double radius) {
  SearchPose q = p;
  q.direction = s < 0 ? Direction::kReverse : Direction::kForward;
  const double phi = s / radius;
  switch (type) {
    case RsSegment::kLeft:
      q.x = p.x + radius * (std::sin(p.psi + phi) - std::sin(p.psi));
      q.y = p.y + radius * (-std::cos(p.psi + phi) + std::cos(p.psi));
      q.psi = wrap_angle(p.psi + phi);
      break;
    case RsSegment::kRight:
      q.x = p.x + radius * (-std::sin(p.psi - phi) + std::sin(p.psi));
      q.y = p.y + radius * (std::cos(p.psi - phi) - std::cos(p.psi));
      q.psi = wrap_angle(p.psi - phi);
      break;
    case RsSegment::kStraight:
      q.x = p.x + s * std::cos(p.psi);
      q.y = p.y + s * std::sin(p.psi);
      break;
    case RsSegment::kNop:
      break;
  }
  return q;
}

/// Poses along the path every `step` metres (plus each segment end), starting
/// with `from` itself and ending exactly at the final pose.
inline std::vector<SearchPose> rs_sample(const ReedsSheppPath& path, const SearchPose& from,
                                         double step) {
  std::vector<SearchPose> out{from};
  SearchPose seg_start = from;
  for (std::size_t k = 0; k < path.type.size(); ++k) {
    if (path.type[k] == RsSegment::kNop) break;
    const double len = path.seg[k] * path.radius;
    if (std::abs(len) < 1e-12) continue;
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(len) / step - 1e-9)));
    for (int i = 1; i <= n; ++i)
      out.push_back(rs_advance(seg_start, path.type[k], len * i / n, path.radius));
    seg_start = out.back();
  }
  if (out.size() > 1) out.front().direction = out[1].direction;
  return out;
}

}  // namespace usvplan
