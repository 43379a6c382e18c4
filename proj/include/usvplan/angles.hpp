#pragma once

#include <cmath>
#include <numbers>

namespace usvplan {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, kTwoPi);
  if (w <= -kPi) w += kTwoPi;
  return w;
}

/// Shortest signed rotation taking `from` onto `to`, in (-pi, pi].
inline double angle_diff(double to, double from) { return wrap_angle(to - from); }

}  // namespace usvplan
