#pragma once

// Equality-constrained strictly convex quadratics
//   min 1/2 z^T Q z + q^T z  s.t.  A z = b
// with optima solved from the KKT system in exact rational arithmetic
// offline and frozen here.

#include <vector>

#include <Eigen/Dense>

#include "usvplan/nlp_solver.hpp"

namespace usvplan::test_support {

struct QpCase {
  const char* name;
  Eigen::MatrixXd Q;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd z_opt;
  double f_opt;
};

inline Eigen::MatrixXd mat(int r, int c, std::initializer_list<double> v) {
  Eigen::MatrixXd m(r, c);
  auto it = v.begin();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline std::vector<QpCase> qp_cases() {
  std::vector<QpCase> cs;
  cs.push_back({"sum_to_one", mat(2, 2, {2, 0, 0, 2}), vec({0, 0}), mat(1, 2, {1, 1}), vec({1}),
                vec({0.5, 0.5}), 0.5});
  cs.push_back({"diagonal_line", mat(2, 2, {2, 0, 0, 2}), vec({-2, -4}), mat(1, 2, {1, -1}), vec({0}),
                vec({1.5, 1.5}), -4.5});
  cs.push_back({"weighted_plane", mat(3, 3, {2, 0, 0, 0, 4, 0, 0, 0, 6}), vec({0, 0, 0}), mat(1, 3, {1, 1, 1}),
                vec({6}), vec({36.0 / 11, 18.0 / 11, 12.0 / 11}), 216.0 / 11});
  cs.push_back({"closest_point_on_plane", mat(3, 3, {2, 0, 0, 0, 2, 0, 0, 0, 2}), vec({0, 0, 0}),
                mat(1, 3, {1, 2, 3}), vec({14}), vec({1, 2, 3}), 14.0});
  cs.push_back({"coupled_pair", mat(2, 2, {2, 1, 1, 2}), vec({-1, 0}), mat(1, 2, {1, 1}), vec({2}),
                vec({1.5, 0.5}), 1.75});
  cs.push_back({"two_blocks", Eigen::MatrixXd::Identity(4, 4) * 2.0, vec({0, 0, 0, 0}),
                mat(2, 4, {1, 1, 0, 0, 0, 0, 1, 1}), vec({1, 3}), vec({0.5, 0.5, 1.5, 1.5}), 5.0});
  cs.push_back({"two_planes", mat(3, 3, {2, 0, 0, 0, 2, 0, 0, 0, 2}), vec({0, 0, 0}), mat(2, 3, {1, 1, 1, 1, 0, -1}),
                vec({3, 1}), vec({1.5, 1.0, 0.5}), 3.5});
  cs.push_back({"chain", mat(3, 3, {8, -2, 0, -2, 2, 0, 0, 0, 2}), vec({0, 0, -2}), mat(2, 3, {1, 1, 0, 0, 1, 1}),
                vec({4, 5}), vec({1, 3, 2}), 7.0});
  // (z1-3)^2 + (z2+1)^2 + (z3-2)^2 + z4^2 minus its constant 14.
  cs.push_back({"shifted_sum_zero", Eigen::MatrixXd::Identity(4, 4) * 2.0, vec({-6, 2, -4, 0}),
                mat(1, 4, {1, 1, 1, 1}), vec({0}), vec({2, -2, 1, -1}), -10.0});
  cs.push_back({"ill_scaled", mat(2, 2, {20, 0, 0, 0.2}), vec({0, 0}), mat(1, 2, {1, 1}), vec({11}),
                vec({11.0 / 101, 1100.0 / 101}), 1210.0 / 101});
  return cs;
}

inline NlpProblem qp_problem(const QpCase& c) {
  NlpProblem p;
  p.dim = static_cast<int>(c.q.size());
  p.objective = [c](const Eigen::VectorXd& z, Eigen::VectorXd* g) {
    const Eigen::VectorXd qz = c.Q * z;
    if (g) *g = qz + c.q;
    return 0.5 * z.dot(qz) + c.q.dot(z);
  };
  p.equality = [c](const Eigen::VectorXd& z, bool, EqualityEval& out) {
    out.c = c.A * z - c.b;
    out.add_jt = [A = c.A](const Eigen::VectorXd& w, Eigen::VectorXd& acc) { acc += A.transpose() * w; };
  };
  return p;
}

}  // namespace usvplan::test_support
