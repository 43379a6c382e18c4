#pragma once

// Smooth equality- and box-constrained minimisation.
//
// Outer loop: augmented Lagrangian
//   L_rho(z, lambda) = f(z) + lambda^T c(z) + rho/2 |c(z)|^2
// with first-order multiplier updates and penalty growth when the violation
// stalls. Inner loop: projected limited-memory BFGS on the box with an
// Armijo backtracking search along the projection arc.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace usvplan {

using Eigen::VectorXd;

/// Equality constraint values at z plus, when requested, an operator that
/// accumulates J(z)^T w into `out`.
struct EqualityEval {
  VectorXd c;
  std::function<void(const VectorXd& w, VectorXd& out)> add_jt;
};

struct NlpProblem {
  int dim = 0;
  /// Returns f(z); writes the gradient when `grad` is non-null.
  std::function<double(const VectorXd& z, VectorXd* grad)> objective;
  /// Optional. Fills `out.c`; fills `out.add_jt` when `want_jacobian`.
  std::function<void(const VectorXd& z, bool want_jacobian, EqualityEval& out)> equality;
  /// Optional curvature estimate used as a diagonal preconditioner: the
  /// objective Hessian diagonal and the diagonal of J^T J at z.
  std::function<void(const VectorXd& z, VectorXd& objective_diag, VectorXd& jtj_diag)> curvature;
  VectorXd lower;  ///< empty means unbounded below
  VectorXd upper;  ///< empty means unbounded above

  double lo(int i) const { return lower.size() ? lower[i] : -std::numeric_limits<double>::infinity(); }
  double hi(int i) const { return upper.size() ? upper[i] : std::numeric_limits<double>::infinity(); }
};

struct SolveOptions {
  int max_outer_iters = 12;
  int max_inner_iters = 400;
  double constraint_tol = 1e-4;
  double grad_tol = 1e-5;
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  int memory = 8;  ///< L-BFGS pairs

  void validate() const {
    if (!(constraint_tol > 0.0) || !(grad_tol > 0.0))
      throw std::invalid_argument("SolveOptions: tolerances must be > 0");
    if (!(penalty_growth > 1.0)) throw std::invalid_argument("SolveOptions: penalty_growth must be > 1");
    if (!(initial_penalty > 0.0)) throw std::invalid_argument("SolveOptions: initial_penalty must be > 0");
    if (max_outer_iters < 1 || max_inner_iters < 1 || memory < 1)
      throw std::invalid_argument("SolveOptions: iteration limits must be >= 1");
  }
};

enum class SolveStatus { kConverged, kMaxIters, kNumericalFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIters:
      return "max-iters";
    case SolveStatus::kNumericalFailure:
      return "numerical-failure";
  }
  return "?";
}

struct SolveReport {
  VectorXd z_star;
  VectorXd multipliers;
  double objective_value = 0.0;
  double constraint_violation = 0.0;  ///< |c(z*)|_inf
  double projected_gradient = 0.0;    ///< of the Lagrangian at z*, inf-norm
  int iterations = 0;                 ///< total inner iterations
  int outer_iterations = 0;
  SolveStatus status = SolveStatus::kMaxIters;
  /// Set when the violation grew between consecutive outer iterations.
  bool violation_increased = false;
  std::vector<double> violation_trace;
};

namespace nlp_detail {

inline void project(const NlpProblem& p, VectorXd& z) {
  for (int i = 0; i < p.dim; ++i) z[i] = std::clamp(z[i], p.lo(i), p.hi(i));
}

inline double projected_gradient_norm(const NlpProblem& p, const VectorXd& z, const VectorXd& g) {
  double m = 0.0;
  for (int i = 0; i < p.dim; ++i) {
    const double step = std::clamp(z[i] - g[i], p.lo(i), p.hi(i)) - z[i];
    m = std::max(m, std::abs(step));
  }
  return m;
}

/// Augmented Lagrangian value and gradient for fixed multipliers and penalty.
struct Merit {
  const NlpProblem& p;
  const VectorXd& lambda;
  double rho;
  int evaluations = 0;

  double operator()(const VectorXd& z, VectorXd* grad, VectorXd* c_out = nullptr) {
    ++evaluations;
    double f = p.objective(z, grad);
    if (!p.equality) return f;
    EqualityEval e;
    p.equality(z, grad != nullptr, e);
    if (e.c.size() != lambda.size()) throw std::logic_error("NlpProblem: constraint count changed");
    f += lambda.dot(e.c) + 0.5 * rho * e.c.squaredNorm();
    if (grad) {
      const VectorXd w = lambda + rho * e.c;
      e.add_jt(w, *grad);
    }
    if (c_out) *c_out = std::move(e.c);
    return f;
  }
};

struct InnerResult {
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  double value = 0.0;
  double pg = 0.0;
};

/// Projected L-BFGS on the box, starting from a feasible z.
inline InnerResult projected_lbfgs(const NlpProblem& p, Merit& merit, VectorXd& z, double tol,
                                   int max_iters, int memory) {
  InnerResult res;
  const int n = p.dim;
  VectorXd g(n);
  double f = merit(z, &g);
  if (!std::isfinite(f) || !g.allFinite()) {
    res.failed = true;
    return res;
  }
  std::deque<VectorXd> mem_s, mem_y;
  std::deque<double> mem_rho;
  std::vector<char> free_var(n);
  VectorXd d(n), z_new(n), g_new(n);
  std::vector<double> alpha_buf;
  VectorXd precond;
  auto refresh_precond = [&] {
    if (!p.curvature) return;
    VectorXd od(n), jd(n);
    p.curvature(z, od, jd);
    precond = (od + merit.rho * jd).cwiseMax(1e-12).cwiseInverse();
  };
  refresh_precond();

  for (int it = 0; it <= max_iters; ++it) {
    res.pg = projected_gradient_norm(p, z, g);
    res.value = f;
    if (res.pg <= tol) {
      res.converged = true;
      return res;
    }
    if (it == max_iters) break;
    res.iterations = it + 1;

    // Variables pinned at a bound with the gradient pushing outward stay put.
    for (int i = 0; i < n; ++i) {
      const bool at_lo = z[i] <= p.lo(i) && g[i] > 0.0;
      const bool at_hi = z[i] >= p.hi(i) && g[i] < 0.0;
      free_var[i] = !(at_lo || at_hi);
    }
    auto mask = [&](VectorXd& v) {
      for (int i = 0; i < n; ++i)
        if (!free_var[i]) v[i] = 0.0;
    };

    // Two-loop recursion restricted to the free subspace.
    d = -g;
    mask(d);
    const int m = static_cast<int>(mem_s.size());
    alpha_buf.assign(m, 0.0);
    for (int k = m - 1; k >= 0; --k) {
      alpha_buf[k] = mem_rho[k] * mem_s[k].dot(d);
      d -= alpha_buf[k] * mem_y[k];
      mask(d);
    }
    if (precond.size()) {
      d = d.cwiseProduct(precond);
      if (m > 0) {
        const VectorXd& yl = mem_y.back();
        d *= mem_s.back().dot(yl) / yl.dot(yl.cwiseProduct(precond));
      }
    } else if (m > 0)
      d *= mem_s.back().dot(mem_y.back()) / mem_y.back().squaredNorm();
    for (int k = 0; k < m; ++k) {
      const double beta = mem_rho[k] * mem_y[k].dot(d);
      d += (alpha_buf[k] - beta) * mem_s[k];
      mask(d);
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      mem_s.clear();
      mem_y.clear();
      mem_rho.clear();
      refresh_precond();
      d = precond.size() ? VectorXd(-g.cwiseProduct(precond)) : VectorXd(-g);
      mask(d);
      slope = g.dot(d);
    }
    double step = 1.0;
    if (mem_s.empty() && !precond.size()) step = std::min(1.0, 1.0 / std::max(d.lpNorm<Eigen::Infinity>(), 1e-12));

    // Armijo backtracking along the projection arc.
    constexpr double c1 = 1e-4;
    bool accepted = false;
    double f_new = f;
    while (step > 1e-20) {
      z_new = z + step * d;
      project(p, z_new);
      const VectorXd dz = z_new - z;
      const double pred = g.dot(dz);
      if (dz.lpNorm<Eigen::Infinity>() == 0.0) break;
      f_new = merit(z_new, &g_new);
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= f + c1 * pred) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!std::isfinite(f_new)) res.failed = true;
      // No descent is possible at machine precision: report where we are.
      if (!mem_s.empty() && !res.failed) {
        mem_s.clear();
        mem_y.clear();
        mem_rho.clear();
        refresh_precond();
        continue;
      }
      return res;
    }
    const VectorXd s = z_new - z;
    const VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      mem_s.push_back(s);
      mem_y.push_back(y);
      mem_rho.push_back(1.0 / sy);
      if (static_cast<int>(mem_s.size()) > memory) {
        mem_s.pop_front();
        mem_y.pop_front();
        mem_rho.pop_front();
      }
    }
    const double f_prev = f;
    z.swap(z_new);
    g.swap(g_new);
    f = f_new;
    // Stalled: relative decrease at roundoff level.
    if (std::abs(f_prev - f) <= 1e-15 * std::max(1.0, std::abs(f)) && s.lpNorm<Eigen::Infinity>() < 1e-14) {
      res.pg = projected_gradient_norm(p, z, g);
      res.value = f;
      return res;
    }
  }
  res.pg = projected_gradient_norm(p, z, g);
  res.value = f;
  return res;
}

}  // namespace nlp_detail

/// Minimises problem.objective subject to equality(z) = 0 and the box.
/// `lambda0` optionally seeds the multipliers (warm start).
inline SolveReport minimize(const NlpProblem& problem, const VectorXd& z0,
                            const SolveOptions& opts = {}, const VectorXd* lambda0 = nullptr) {
  using namespace nlp_detail;
  opts.validate();
  if (z0.size() != problem.dim) throw std::invalid_argument("minimize: z0 has wrong length");
  if (!problem.objective) throw std::invalid_argument("minimize: no objective");
  SolveReport rep;
  VectorXd z = z0;
  project(problem, z);

  int m = 0;
  VectorXd c;
  if (problem.equality) {
    EqualityEval e;
    problem.equality(z, false, e);
    m = static_cast<int>(e.c.size());
    c = e.c;
  }
  VectorXd lambda = (lambda0 && lambda0->size() == m) ? *lambda0 : VectorXd::Zero(m);
  double rho = opts.initial_penalty;
  double prev_violation = m ? c.lpNorm<Eigen::Infinity>() : 0.0;
  double best_outer_violation = std::numeric_limits<double>::infinity();
  if (!std::isfinite(prev_violation)) {
    rep.status = SolveStatus::kNumericalFailure;
    rep.z_star = z;
    return rep;
  }

  for (int outer = 0; outer < opts.max_outer_iters; ++outer) {
    rep.outer_iterations = outer + 1;
    Merit merit{problem, lambda, rho};
    // Loose inner tolerance early on, tightening towards grad_tol.
    const double inner_tol = m ? std::max(opts.grad_tol, 1e-2 * std::pow(0.1, outer)) : opts.grad_tol;
    const InnerResult in = projected_lbfgs(problem, merit, z, inner_tol, opts.max_inner_iters, opts.memory);
    rep.iterations += in.iterations;
    if (in.failed) {
      rep.status = SolveStatus::kNumericalFailure;
      break;
    }
    VectorXd grad(problem.dim);
    if (m) {
      EqualityEval e;
      problem.equality(z, false, e);
      c = e.c;
    }
    const double violation = m ? c.lpNorm<Eigen::Infinity>() : 0.0;
    rep.violation_trace.push_back(violation);
    if (violation > best_outer_violation + 1e-12) rep.violation_increased = true;
    best_outer_violation = std::min(best_outer_violation, violation);
    // Projected gradient of the Lagrangian with the updated multipliers.
    if (m) lambda += rho * c;
    Merit lagr{problem, lambda, 0.0};
    lagr(z, &grad);
    rep.projected_gradient = projected_gradient_norm(problem, z, grad);
    if (violation <= opts.constraint_tol && rep.projected_gradient <= opts.grad_tol) {
      rep.status = SolveStatus::kConverged;
      break;
    }
    if (!m) {
      rep.status = SolveStatus::kMaxIters;
      break;
    }
    if (violation > opts.constraint_tol && violation > 0.25 * prev_violation) rho *= opts.penalty_growth;
    prev_violation = std::min(prev_violation, violation);
    if (outer + 1 == opts.max_outer_iters) rep.status = SolveStatus::kMaxIters;
  }

  rep.z_star = z;
  rep.multipliers = lambda;
  rep.objective_value = problem.objective(z, nullptr);
  if (m) {
    EqualityEval e;
    problem.equality(z, false, e);
    rep.constraint_violation = e.c.lpNorm<Eigen::Infinity>();
  }
  if (rep.status == SolveStatus::kConverged && rep.constraint_violation > opts.constraint_tol)
    rep.status = SolveStatus::kMaxIters;
  if (!std::isfinite(rep.objective_value) || !z.allFinite()) rep.status = SolveStatus::kNumericalFailure;
  return rep;
}

/// Central-difference check of the objective gradient. Returns the largest
/// |fd_i - g_i| / max(1, |g_i|).
inline double check_gradient(const NlpProblem& problem, const VectorXd& z, double fd_step) {
  VectorXd g(problem.dim);
  problem.objective(z, &g);
  double worst = 0.0;
  VectorXd zp = z;
  for (int i = 0; i < problem.dim; ++i) {
    zp[i] = z[i] + fd_step;
    const double fp = problem.objective(zp, nullptr);
    zp[i] = z[i] - fd_step;
    const double fm = problem.objective(zp, nullptr);
    zp[i] = z[i];
    const double fd = (fp - fm) / (2.0 * fd_step);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
  }
  return worst;
}

/// Same check for the constraint Jacobian, applied to the scalar w^T c(z).
inline double check_constraint_jacobian(const NlpProblem& problem, const VectorXd& z,
                                        const VectorXd& w, double fd_step) {
  EqualityEval e;
  problem.equality(z, true, e);
  VectorXd g = VectorXd::Zero(problem.dim);
  e.add_jt(w, g);
  double worst = 0.0;
  VectorXd zp = z;
  for (int i = 0; i < problem.dim; ++i) {
    EqualityEval ep, em;
    zp[i] = z[i] + fd_step;
    problem.equality(zp, false, ep);
    zp[i] = z[i] - fd_step;
    problem.equality(zp, false, em);
    zp[i] = z[i];
    const double fd = w.dot(ep.c - em.c) / (2.0 * fd_step);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
  }
  return worst;
}

}  // namespace usvplan
