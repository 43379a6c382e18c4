#pragma once

// Brute-force shortest Reeds-Shepp length used as a test oracle.
//
// Every word family is posed as a 3x3 root-finding problem in its free
// segment lengths (signed, so gear is implicit) and solved by damped Newton
// from a grid of starting points. The oracle only knows how to drive a unit
// radius car along an arc or a line; it shares no formulas with the closed
// forms under test.

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace usvplan::test_support {

struct OracleWord {
  std::array<char, 5> letters;  ///< 'L', 'R', 'S', or 0 for unused
  int count;
  // seg[k] = coeff[k] * p[index[k]] + fixed[k]
  std::array<int, 5> index;
  std::array<double, 5> coeff;
  std::array<double, 5> fixed;
};

inline std::vector<OracleWord> oracle_words() {
  std::vector<OracleWord> words;
  const double h = 0.5 * M_PI;
  auto free3 = [&](const char* l) {
    words.push_back({{l[0], l[1], l[2], 0, 0}, 3, {0, 1, 2, 0, 0}, {1, 1, 1, 0, 0}, {0, 0, 0, 0, 0}});
  };
  for (const char* l : {"LSL", "LSR", "RSL", "RSR", "LRL", "RLR"}) free3(l);
  // Four arcs whose middle pair share a magnitude.
  for (const char* l : {"LRLR", "RLRL"})
    for (double sigma : {1.0, -1.0})
      words.push_back({{l[0], l[1], l[2], l[3], 0}, 4, {0, 1, 1, 2, 0}, {1, 1, sigma, 1, 0}, {0, 0, 0, 0, 0}});
  // A quarter turn adjacent to the straight segment.
  for (const char* l : {"LRSL", "RLSR", "LRSR", "RLSL"})
    for (double q : {h, -h})
      words.push_back({{l[0], l[1], l[2], l[3], 0}, 4, {0, 0, 1, 2, 0}, {1, 0, 1, 1, 0}, {0, q, 0, 0, 0}});
  for (const char* l : {"LSRL", "RSLR", "RSRL", "LSLR"})
    for (double q : {h, -h})
      words.push_back({{l[0], l[1], l[2], l[3], 0}, 4, {0, 1, 0, 2, 0}, {1, 1, 0, 1, 0}, {0, 0, q, 0, 0}});
  // Quarter turns on both sides of the straight segment.
  for (const char* l : {"LRSLR", "RLSRL"})
    for (double q1 : {h, -h})
      for (double q2 : {h, -h})
        words.push_back({{l[0], l[1], l[2], l[3], l[4]}, 5, {0, 0, 1, 0, 2}, {1, 0, 1, 0, 1}, {0, q1, 0, q2, 0}});
  return words;
}

/// End pose of a unit-radius car starting at the origin facing +x.
inline Eigen::Vector3d oracle_drive(const OracleWord& w, const Eigen::Vector3d& p) {
  double x = 0, y = 0, th = 0;
  for (int k = 0; k < w.count; ++k) {
    const double s = w.coeff[k] * p[w.index[k]] + w.fixed[k];
    switch (w.letters[k]) {
      case 'S':
        x += s * std::cos(th);
        y += s * std::sin(th);
        break;
      case 'L':  // centre of rotation on the left
        x += std::sin(th + s) - std::sin(th);
        y += std::cos(th) - std::cos(th + s);
        th += s;
        break;
      case 'R':
        x += std::sin(th) - std::sin(th - s);
        y += std::cos(th - s) - std::cos(th);
        th -= s;
        break;
    }
  }
  return {x, y, th};
}

inline double oracle_length(const OracleWord& w, const Eigen::Vector3d& p) {
  double len = 0;
  for (int k = 0; k < w.count; ++k) len += std::abs(w.coeff[k] * p[w.index[k]] + w.fixed[k]);
  return len;
}

inline Eigen::Vector3d oracle_residual(const OracleWord& w, const Eigen::Vector3d& p,
                                       const Eigen::Vector3d& goal) {
  Eigen::Vector3d e = oracle_drive(w, p) - goal;
  e[2] = std::remainder(e[2], 2 * M_PI);
  return e;
}

/// Shortest length over all words for the normalised goal (x, y, phi).
inline double oracle_shortest(double gx, double gy, double gphi) {
  static const std::vector<OracleWord> words = oracle_words();
  const Eigen::Vector3d goal(gx, gy, gphi);
  const std::array<double, 4> arc_seeds{-2.4, -0.8, 0.8, 2.4};
  const std::array<double, 4> line_seeds{-6.0, -1.5, 1.5, 6.0};
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : words) {
    // Which parameters drive a straight segment (those get line seeds).
    std::array<bool, 3> is_line{false, false, false};
    for (int k = 0; k < w.count; ++k)
      if (w.letters[k] == 'S' && w.coeff[k] != 0) is_line[w.index[k]] = true;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c) {
          const int id[3] = {a, b, c};
          Eigen::Vector3d p;
          for (int i = 0; i < 3; ++i) p[i] = is_line[i] ? line_seeds[id[i]] : arc_seeds[id[i]];
          bool ok = false;
          for (int it = 0; it < 60; ++it) {
            const Eigen::Vector3d r = oracle_residual(w, p, goal);
            if (r.norm() < 1e-12) {
              ok = true;
              break;
            }
            Eigen::Matrix3d jac;
            for (int j = 0; j < 3; ++j) {
              Eigen::Vector3d pp = p, pm = p;
              pp[j] += 1e-7;
              pm[j] -= 1e-7;
              Eigen::Vector3d d = oracle_drive(w, pp) - oracle_drive(w, pm);
              jac.col(j) = d / 2e-7;
            }
            Eigen::FullPivLU<Eigen::Matrix3d> lu(jac);
            if (lu.rank() < 3) break;
            Eigen::Vector3d step = lu.solve(r);
            const double n = step.norm();
            if (n > 1.0) step *= 1.0 / n;
            p -= step;
            if (p.cwiseAbs().maxCoeff() > 60.0) break;
          }
          if (ok) best = std::min(best, oracle_length(w, p));
        }
  }
  return best;
}

}  // namespace usvplan::test_support
