#pragma once

// Direct multiple-shooting transcription of the tracking objective
//   1/2 [ sum_i |X_i - Xref_i|^2_Wx + sum_i |tau_i - tauref_i|^2_Wtau
//         + sum_i |tau_i - tau_{i-1}|^2_Wu ] + sum_i w_obs max(0, m - sd(x_i, y_i))^2
// subject to X_{i+1} = RK4(X_i, tau_i). Shared by the global optimizer
// (tauref = 0, both ends pinned) and the receding-horizon controller
// (tauref from the plan, start pinned, tau_{-1} given).
//
// Decision vector: free states X_1..X_{N-1} (and X_N unless pinned), then
// controls scaled by the actuator limits.

#include <array>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "usvplan/angles.hpp"
#include "usvplan/nlp_solver.hpp"
#include "usvplan/occupancy_grid.hpp"
#include "usvplan/vessel_dynamics.hpp"

namespace usvplan {

struct CostWeights {
  std::array<double, 6> w_x{1.0, 1.0, 0.5, 0.1, 0.1, 0.1};
  std::array<double, 2> w_tau{1e-3, 1e-3};
  std::array<double, 2> w_u{1e-2, 1e-2};

  void validate() const {
    bool any = false;
    for (double w : w_x) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("CostWeights: w_x entries must be >= 0");
      any |= w > 0.0;
    }
    if (!any) throw std::invalid_argument("CostWeights: at least one w_x entry must be positive");
    for (double w : w_tau)
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("CostWeights: w_tau entries must be >= 0");
    for (double w : w_u)
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("CostWeights: w_u entries must be >= 0");
  }

  CostWeights scaled(double k) const {
    CostWeights c = *this;
    for (double& w : c.w_x) w *= k;
    for (double& w : c.w_tau) w *= k;
    for (double& w : c.w_u) w *= k;
    return c;
  }
};

struct OcpData {
  HullParams params;
  double dt = 0.1;
  std::vector<StateVector> x_ref;      ///< N + 1 entries
  std::vector<ControlVector> tau_ref;  ///< N entries; empty means zero
  CostWeights weights;
  StateVector x0 = StateVector::Zero();
  std::optional<StateVector> xf;         ///< pins X_N when set
  std::optional<ControlVector> tau_prev; ///< tau_{-1} for the first smoothness term
  const DistanceField* clearance = nullptr;
  double obstacle_margin = 1.0;
  double obstacle_weight = 100.0;
};

class Transcription {
 public:
  explicit Transcription(OcpData data) : d_(std::move(data)) {
    if (d_.x_ref.size() < 2) throw std::invalid_argument("Transcription: need at least one interval");
    if (!(d_.dt > 0.0)) throw std::invalid_argument("Transcription: dt must be > 0");
    n_ = static_cast<int>(d_.x_ref.size()) - 1;
    if (!d_.tau_ref.empty() && static_cast<int>(d_.tau_ref.size()) != n_)
      throw std::invalid_argument("Transcription: tau_ref must have one entry per interval");
    d_.weights.validate();
    d_.params.validate();
    free_states_ = d_.xf ? n_ - 1 : n_;
    scale_ << d_.params.tau_u_max, d_.params.tau_r_max;
  }

  int intervals() const { return n_; }
  int free_states() const { return free_states_; }
  int dim() const { return 6 * free_states_ + 2 * n_; }
  const OcpData& data() const { return d_; }

  StateVector state(const VectorXd& z, int i) const {
    if (i == 0) return d_.x0;
    if (i == n_ && d_.xf) return *d_.xf;
    return z.segment<6>(6 * (i - 1));
  }

  ControlVector control(const VectorXd& z, int i) const {
    return z.segment<2>(control_offset(i)).cwiseProduct(scale_);
  }

  VectorXd pack(const std::vector<StateVector>& xs, const std::vector<ControlVector>& us) const {
    if (static_cast<int>(xs.size()) != n_ + 1 || static_cast<int>(us.size()) != n_)
      throw std::invalid_argument("Transcription::pack: size mismatch");
    VectorXd z(dim());
    for (int i = 1; i <= free_states_; ++i) z.segment<6>(6 * (i - 1)) = xs[i];
    for (int i = 0; i < n_; ++i) z.segment<2>(control_offset(i)) = us[i].cwiseQuotient(scale_);
    return z;
  }

  void unpack(const VectorXd& z, std::vector<StateVector>& xs, std::vector<ControlVector>& us) const {
    xs.resize(n_ + 1);
    us.resize(n_);
    for (int i = 0; i <= n_; ++i) xs[i] = state(z, i);
    for (int i = 0; i < n_; ++i) us[i] = control(z, i);
  }

  VectorXd lower() const {
    VectorXd lo(dim());
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < free_states_; ++i) {
      lo.segment<6>(6 * i) << -inf, -inf, -inf, -d_.params.u_max, -inf, -d_.params.r_max;
    }
    for (int i = 0; i < n_; ++i) lo.segment<2>(control_offset(i)) << d_.params.tau_u_min / scale_[0], -1.0;
    return lo;
  }

  VectorXd upper() const {
    VectorXd hi(dim());
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < free_states_; ++i) {
      hi.segment<6>(6 * i) << inf, inf, inf, d_.params.u_max, inf, d_.params.r_max;
    }
    for (int i = 0; i < n_; ++i) hi.segment<2>(control_offset(i)) << 1.0, 1.0;
    return hi;
  }

  /// Objective value; the gradient is with respect to z (scaled controls).
  double objective(const VectorXd& z, VectorXd* grad) const {
    const auto& w = d_.weights;
    if (grad) grad->setZero(dim());
    double f = 0.0;
    for (int i = 0; i <= n_; ++i) {
      const StateVector x = state(z, i);
      StateVector e = x - d_.x_ref[i];
      e[2] = angle_diff(x[2], d_.x_ref[i][2]);
      StateVector we;
      for (int k = 0; k < 6; ++k) we[k] = w.w_x[k] * e[k];
      f += 0.5 * e.dot(we);
      double hinge_gx = 0.0, hinge_gy = 0.0;
      if (d_.clearance) {
        Eigen::Vector2d g;
        const double sd = d_.clearance->sample(x[0], x[1], &g);
        const double gap = d_.obstacle_margin - sd;
        if (gap > 0.0) {
          f += d_.obstacle_weight * gap * gap;
          hinge_gx = -2.0 * d_.obstacle_weight * gap * g[0];
          hinge_gy = -2.0 * d_.obstacle_weight * gap * g[1];
        }
      }
      if (grad && is_free(i)) {
        auto gs = grad->segment<6>(6 * (i - 1));
        gs += we;
        gs[0] += hinge_gx;
        gs[1] += hinge_gy;
      }
    }
    for (int i = 0; i < n_; ++i) {
      const ControlVector u = control(z, i);
      const ControlVector e = d_.tau_ref.empty() ? u : ControlVector(u - d_.tau_ref[i]);
      ControlVector gu(w.w_tau[0] * e[0], w.w_tau[1] * e[1]);
      f += 0.5 * e.dot(gu);
      const bool has_prev = i > 0 || d_.tau_prev.has_value();
      if (has_prev) {
        const ControlVector prev = i > 0 ? control(z, i - 1) : *d_.tau_prev;
        const ControlVector du = u - prev;
        const ControlVector wdu(w.w_u[0] * du[0], w.w_u[1] * du[1]);
        f += 0.5 * du.dot(wdu);
        gu += wdu;
        if (grad && i > 0) grad->segment<2>(control_offset(i - 1)) -= wdu.cwiseProduct(scale_);
      }
      if (grad) grad->segment<2>(control_offset(i)) += gu.cwiseProduct(scale_);
    }
    return f;
  }

  /// RK4 defects X_{i+1} - F(X_i, tau_i), heading component wrapped.
  void defects(const VectorXd& z, bool want_jacobian, EqualityEval& out) const {
    out.c.resize(6 * n_);
    std::shared_ptr<std::vector<StateJacobian>> jx;
    std::shared_ptr<std::vector<ControlJacobian>> ju;
    if (want_jacobian) {
      jx = std::make_shared<std::vector<StateJacobian>>(n_);
      ju = std::make_shared<std::vector<ControlJacobian>>(n_);
    }
    for (int i = 0; i < n_; ++i) {
      const StateVector x = state(z, i);
      const ControlVector u = control(z, i);
      StateVector next;
      if (want_jacobian)
        next = rk4_linearized(x, u, d_.params, d_.dt, (*jx)[i], (*ju)[i]);
      else
        next = rk4(x, u, d_.params, d_.dt);
      StateVector e = state(z, i + 1) - next;
      e[2] = wrap_angle(e[2]);
      out.c.segment<6>(6 * i) = e;
    }
    if (!want_jacobian) {
      out.add_jt = nullptr;
      return;
    }
    out.add_jt = [this, jx, ju](const VectorXd& w, VectorXd& acc) {
      for (int i = 0; i < n_; ++i) {
        const StateVector wi = w.segment<6>(6 * i);
        if (is_free(i + 1)) acc.segment<6>(6 * i) += wi;
        if (is_free(i)) acc.segment<6>(6 * (i - 1)) -= (*jx)[i].transpose() * wi;
        acc.segment<2>(control_offset(i)) -= ((*ju)[i].transpose() * wi).cwiseProduct(scale_);
      }
    };
  }

  /// Diagonals of the objective Hessian (Gauss-Newton for the hinge) and of
  /// J^T J for the defects, for preconditioning.
  void curvature(const VectorXd& z, VectorXd& od, VectorXd& jd) const {
    const auto& w = d_.weights;
    od.setZero(dim());
    jd.setZero(dim());
    for (int i = 1; i <= free_states_; ++i) {
      auto seg = od.segment<6>(6 * (i - 1));
      for (int k = 0; k < 6; ++k) seg[k] = w.w_x[k];
      if (d_.clearance) {
        const StateVector x = state(z, i);
        Eigen::Vector2d g;
        if (d_.obstacle_margin - d_.clearance->sample(x[0], x[1], &g) > 0.0) {
          seg[0] += 2.0 * d_.obstacle_weight * g[0] * g[0];
          seg[1] += 2.0 * d_.obstacle_weight * g[1] * g[1];
        }
      }
    }
    for (int i = 0; i < n_; ++i) {
      int links = (i > 0 || d_.tau_prev) ? 1 : 0;
      if (i + 1 < n_) ++links;
      for (int k = 0; k < 2; ++k)
        od[control_offset(i) + k] = (w.w_tau[k] + links * w.w_u[k]) * scale_[k] * scale_[k];
    }
    for (int i = 0; i < n_; ++i) {
      StateJacobian jx;
      ControlJacobian ju;
      rk4_linearized(state(z, i), control(z, i), d_.params, d_.dt, jx, ju);
      if (is_free(i + 1)) jd.segment<6>(6 * i).array() += 1.0;
      if (is_free(i)) jd.segment<6>(6 * (i - 1)) += jx.colwise().squaredNorm().transpose();
      jd.segment<2>(control_offset(i)) += (ju.colwise().squaredNorm().transpose()).cwiseProduct(scale_.cwiseAbs2());
    }
  }

  /// NlpProblem view; the Transcription must outlive it.
  NlpProblem problem() const {
    NlpProblem p;
    p.dim = dim();
    p.objective = [this](const VectorXd& z, VectorXd* g) { return objective(z, g); };
    p.equality = [this](const VectorXd& z, bool jac, EqualityEval& e) { defects(z, jac, e); };
    p.curvature = [this](const VectorXd& z, VectorXd& od, VectorXd& jd) { curvature(z, od, jd); };
    p.lower = lower();
    p.upper = upper();
    return p;
  }

  /// Largest defect component at z.
  double max_defect(const VectorXd& z) const {
    EqualityEval e;
    defects(z, false, e);
    return e.c.lpNorm<Eigen::Infinity>();
  }

 private:
  bool is_free(int i) const { return i >= 1 && i <= free_states_; }
  int control_offset(int i) const { return 6 * free_states_ + 2 * i; }

  OcpData d_;
  int n_ = 0;
  int free_states_ = 0;
  ControlVector scale_;
};

}  // namespace usvplan
