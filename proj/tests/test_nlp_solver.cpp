#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support/qp_set.hpp"
#include "usvplan/nlp_solver.hpp"

using namespace usvplan;
using Eigen::VectorXd;

namespace {

NlpProblem distance_to(const VectorXd& target) {
  NlpProblem p;
  p.dim = static_cast<int>(target.size());
  p.objective = [target](const VectorXd& z, VectorXd* g) {
    const VectorXd d = z - target;
    if (g) *g = 2.0 * d;
    return d.squaredNorm();
  };
  return p;
}

void expect_status_contract(const SolveReport& r, const SolveOptions& o) {
  if (r.status == SolveStatus::kConverged) {
    EXPECT_LE(r.constraint_violation, o.constraint_tol);
    EXPECT_LE(r.projected_gradient, o.grad_tol);
  }
}

}  // namespace

TEST(Minimize, UnconstrainedQuadratic) {
  const auto p = distance_to(test_support::vec({1, 2, 3}));
  const auto r = minimize(p, VectorXd::Zero(3));
  EXPECT_EQ(r.status, SolveStatus::kConverged);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(r.z_star[i], i + 1.0, 1e-8);
}

TEST(Minimize, UpperBoundIsActive) {
  auto p = distance_to(test_support::vec({1, 2, 3}));
  const double inf = std::numeric_limits<double>::infinity();
  p.upper = test_support::vec({0.5, inf, inf});
  const auto r = minimize(p, VectorXd::Zero(3));
  EXPECT_EQ(r.status, SolveStatus::kConverged);
  EXPECT_NEAR(r.z_star[0], 0.5, 1e-10);
  EXPECT_NEAR(r.z_star[1], 2.0, 1e-8);
  EXPECT_NEAR(r.z_star[2], 3.0, 1e-8);
}

TEST(Minimize, StartIsClippedIntoBox) {
  auto p = distance_to(test_support::vec({0, 0}));
  p.lower = test_support::vec({1, -5});
  p.upper = test_support::vec({2, 5});
  const auto r = minimize(p, test_support::vec({-10, 10}));
  EXPECT_NEAR(r.z_star[0], 1.0, 1e-12);
  EXPECT_NEAR(r.z_star[1], 0.0, 1e-8);
}

// Objective accuracy of 1e-6 needs the residual well below the default
// constraint_tol, since the value error is about |lambda| * |c|.
static SolveOptions tight() {
  SolveOptions o;
  o.constraint_tol = 1e-8;
  return o;
}

TEST(Minimize, SumToOne) {
  const auto cs = test_support::qp_cases();
  const auto r = minimize(test_support::qp_problem(cs[0]), VectorXd::Zero(2), tight());
  EXPECT_EQ(r.status, SolveStatus::kConverged);
  EXPECT_NEAR(r.z_star[0], 0.5, 1e-6);
  EXPECT_NEAR(r.z_star[1], 0.5, 1e-6);
  EXPECT_NEAR(r.objective_value, 0.5, 1e-6);
  // Multiplier of z1 + z2 - 1 = 0 for z1^2 + z2^2 is -1.
  EXPECT_NEAR(r.multipliers[0], -1.0, 1e-4);
}

TEST(Minimize, EqualityQuadraticSet) {
  const SolveOptions opts = tight();
  for (const auto& c : test_support::qp_cases()) {
    const auto r = minimize(test_support::qp_problem(c), VectorXd::Zero(c.q.size()), opts);
    SCOPED_TRACE(c.name);
    EXPECT_EQ(r.status, SolveStatus::kConverged);
    EXPECT_NEAR(r.objective_value, c.f_opt, 1e-6);
    EXPECT_LE((r.z_star - c.z_opt).lpNorm<Eigen::Infinity>(), 1e-4);
    EXPECT_LE(r.constraint_violation, opts.constraint_tol);
    expect_status_contract(r, opts);
  }
}

TEST(Minimize, FrozenOptimaSatisfyKkt) {
  // Guards the frozen table against transcription slips.
  for (const auto& c : test_support::qp_cases()) {
    SCOPED_TRACE(c.name);
    EXPECT_LE((c.A * c.z_opt - c.b).lpNorm<Eigen::Infinity>(), 1e-12);
    const VectorXd g = c.Q * c.z_opt + c.q;
    // g must lie in the row space of A.
    const VectorXd lam = c.A.transpose().colPivHouseholderQr().solve(g);
    EXPECT_LE((c.A.transpose() * lam - g).norm(), 1e-10);
    EXPECT_NEAR(0.5 * c.z_opt.dot(c.Q * c.z_opt) + c.q.dot(c.z_opt), c.f_opt, 1e-12);
  }
}

TEST(Minimize, RandomStartsAndBoxesKeepContract) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-5, 5);
  const SolveOptions opts = tight();
  for (const auto& c : test_support::qp_cases()) {
    auto p = test_support::qp_problem(c);
    // Loose box that does not bind at the optimum.
    p.lower = VectorXd::Constant(p.dim, -100.0);
    p.upper = VectorXd::Constant(p.dim, 100.0);
    for (int k = 0; k < 5; ++k) {
      VectorXd z0(p.dim);
      for (int i = 0; i < p.dim; ++i) z0[i] = u(rng);
      const auto r = minimize(p, z0, opts);
      expect_status_contract(r, opts);
      EXPECT_NEAR(r.objective_value, c.f_opt, 1e-6) << c.name;
    }
  }
}

TEST(Minimize, NonlinearEqualityOnCircle) {
  // min x + y on x^2 + y^2 = 2 -> (-1, -1).
  NlpProblem p;
  p.dim = 2;
  p.objective = [](const VectorXd& z, VectorXd* g) {
    if (g) *g = VectorXd::Ones(2);
    return z.sum();
  };
  p.equality = [](const VectorXd& z, bool, EqualityEval& e) {
    e.c = test_support::vec({z.squaredNorm() - 2.0});
    e.add_jt = [z](const VectorXd& w, VectorXd& out) { out += 2.0 * w[0] * z; };
  };
  const auto r = minimize(p, test_support::vec({-0.5, -1.5}));
  EXPECT_EQ(r.status, SolveStatus::kConverged);
  EXPECT_NEAR(r.z_star[0], -1.0, 1e-4);
  EXPECT_NEAR(r.z_star[1], -1.0, 1e-4);
  EXPECT_LE(r.constraint_violation, 1e-4);
}

TEST(Minimize, Deterministic) {
  const auto c = test_support::qp_cases()[7];
  const auto a = minimize(test_support::qp_problem(c), test_support::vec({3, -1, 2}));
  const auto b = minimize(test_support::qp_problem(c), test_support::vec({3, -1, 2}));
  EXPECT_EQ(a.iterations, b.iterations);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a.z_star[i], b.z_star[i]);
  EXPECT_EQ(a.violation_trace, b.violation_trace);
}

TEST(Minimize, ViolationTraceMonotoneOrFlagged) {
  for (const auto& c : test_support::qp_cases()) {
    const auto r = minimize(test_support::qp_problem(c), VectorXd::Constant(c.q.size(), 7.0));
    bool grew = false;
    for (std::size_t k = 1; k < r.violation_trace.size(); ++k)
      if (r.violation_trace[k] > *std::min_element(r.violation_trace.begin(), r.violation_trace.begin() + k) + 1e-12)
        grew = true;
    EXPECT_EQ(grew, r.violation_increased) << c.name;
  }
}

TEST(Minimize, DefaultToleranceBoundsViolation) {
  const SolveOptions opts;
  for (const auto& c : test_support::qp_cases()) {
    const auto r = minimize(test_support::qp_problem(c), VectorXd::Zero(c.q.size()), opts);
    EXPECT_EQ(r.status, SolveStatus::kConverged) << c.name;
    EXPECT_LE(r.constraint_violation, 1e-4) << c.name;
    EXPECT_NEAR(r.objective_value, c.f_opt, 1e-2 * std::max(1.0, std::abs(c.f_opt))) << c.name;
  }
}

TEST(Minimize, WarmMultipliersSaveWork) {
  const auto c = test_support::qp_cases()[6];
  const auto cold = minimize(test_support::qp_problem(c), VectorXd::Zero(3));
  const auto warm = minimize(test_support::qp_problem(c), cold.z_star, {}, &cold.multipliers);
  EXPECT_EQ(warm.status, SolveStatus::kConverged);
  EXPECT_LE(warm.outer_iterations, cold.outer_iterations);
  EXPECT_LE(warm.iterations, cold.iterations);
}

TEST(Minimize, NonFiniteObjectiveIsNumericalFailure) {
  NlpProblem p;
  p.dim = 1;
  p.objective = [](const VectorXd& z, VectorXd* g) {
    if (g) (*g)[0] = std::nan("");
    return z[0];
  };
  const auto r = minimize(p, VectorXd::Zero(1));
  EXPECT_EQ(r.status, SolveStatus::kNumericalFailure);
}

TEST(Minimize, RejectsBadInput) {
  const auto p = distance_to(test_support::vec({1, 2}));
  EXPECT_THROW(minimize(p, VectorXd::Zero(3)), std::invalid_argument);
  SolveOptions o;
  o.penalty_growth = 1.0;
  EXPECT_THROW(minimize(p, VectorXd::Zero(2), o), std::invalid_argument);
  o = {};
  o.grad_tol = 0.0;
  EXPECT_THROW(minimize(p, VectorXd::Zero(2), o), std::invalid_argument);
}

TEST(CheckGradient, ExactOnQuadratics) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-3, 3);
  for (const auto& c : test_support::qp_cases()) {
    const auto p = test_support::qp_problem(c);
    VectorXd z(p.dim);
    for (int i = 0; i < p.dim; ++i) z[i] = u(rng);
    EXPECT_LE(check_gradient(p, z, 1e-5), 1e-8) << c.name;
    VectorXd w(c.b.size());
    for (int i = 0; i < w.size(); ++i) w[i] = u(rng);
    EXPECT_LE(check_constraint_jacobian(p, z, w, 1e-5), 1e-8) << c.name;
  }
}

TEST(CheckGradient, DetectsCorruptedComponent) {
  const auto c = test_support::qp_cases()[2];
  auto p = test_support::qp_problem(c);
  const auto good = p.objective;
  p.objective = [good](const VectorXd& z, VectorXd* g) {
    const double f = good(z, g);
    if (g) (*g)[1] *= 1.01;
    return f;
  };
  // Gradient at this point has magnitude well above 1 in component 1.
  EXPECT_GE(check_gradient(p, test_support::vec({1, 2, 3}), 1e-5), 5e-3);
}
