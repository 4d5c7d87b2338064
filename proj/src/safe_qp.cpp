/*
 Copyright 2026 The l1aug Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "l1aug/safe_qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <vector>

#include "l1aug/integrator.hpp"

namespace l1aug {

namespace {

// One linear inequality a'z <= b over z = (u, d).
struct Row {
  Vector a;
  double b = 0.0;
};

double box_limited(double value, double lo, double hi) {
  return std::min(std::max(value, lo), hi);
}

void check_qp_inputs(const ControlAffineModel& model, const Vector& x,
                     const Vector& sigma_hat, double gamma) {
  if (x.size() != model.n) {
    throw ConfigError("safety filter: state dimension mismatch");
  }
  if (sigma_hat.size() != model.n) {
    throw ConfigError("safety filter: sigma_hat must be an n-vector");
  }
  if (!(gamma >= 0.0)) {
    throw ConfigError("safety filter: gamma must be nonnegative");
  }
}

}  // namespace

void QPWeights::validate(int m) const {
  if (h_weight.rows() != m || h_weight.cols() != m) {
    throw ConfigError("safety filter: h_weight must be m x m");
  }
  Eigen::LLT<Matrix> llt(0.5 * (h_weight + h_weight.transpose()));
  if (llt.info() != Eigen::Success) {
    throw ConfigError("safety filter: h_weight must be positive definite");
  }
  if (!(p_slack > 0.0)) {
    throw ConfigError("safety filter: p_slack must be positive");
  }
}

double psi_v(const CLFSpec& clf, const ControlAffineModel& model,
             const Vector& x, const Vector& u, const Vector& sigma_hat,
             double gamma) {
  check_qp_inputs(model, x, sigma_hat, gamma);
  const Vector vx = clf.v_grad(x);
  const Vector f = model.f_eval(x);
  const Matrix g = model.g_eval(x);
  return vx.dot(f) + vx.dot(g * u) + vx.dot(sigma_hat) + vx.norm() * gamma;
}

double psi_h(const CBFSpec& cbf, const ControlAffineModel& model,
             const Vector& x, const Vector& u, const Vector& sigma_hat,
             double gamma) {
  check_qp_inputs(model, x, sigma_hat, gamma);
  const Vector hx = cbf.h_grad(x);
  const Vector f = model.f_eval(x);
  const Matrix g = model.g_eval(x);
  return hx.dot(f) + hx.dot(g * u) + hx.dot(sigma_hat) - hx.norm() * gamma;
}

QPResult solve_ad_clbf_qp(const CLFSpec& clf, const CBFSpec& cbf,
                          const QPWeights& weights,
                          const ControlAffineModel& model, const Vector& x,
                          const Vector& sigma_hat, double gamma,
                          const Vector& u_lower, const Vector& u_upper) {
  check_qp_inputs(model, x, sigma_hat, gamma);
  const int m = model.m;
  weights.validate(m);
  if (u_lower.size() != m || u_upper.size() != m) {
    throw ConfigError("safety filter: input bounds must be m-vectors");
  }
  for (int j = 0; j < m; ++j) {
    if (!(u_lower(j) <= u_upper(j))) {
      throw ConfigError("safety filter: input bounds out of order");
    }
  }

  const Vector f = model.f_eval(x);
  const Matrix g = model.g_eval(x);
  const Vector vx = clf.v_grad(x);
  const Vector hx = cbf.h_grad(x);
  const double v_val = clf.v_eval(x);
  const double alpha_h = cbf.alpha_of(cbf.h_eval(x));

  const Vector lgv = g.transpose() * vx;
  const Vector lgh = g.transpose() * hx;
  // c_v + lgv'u is psi_v + c1 V; c_h + lgh'u is psi_h + alpha(h).
  const double c_v =
      vx.dot(f) + vx.dot(sigma_hat) + vx.norm() * gamma + clf.c1 * v_val;
  const double c_h = hx.dot(f) + hx.dot(sigma_hat) - hx.norm() * gamma + alpha_h;

  // The barrier constraint is the only one that can be unsatisfiable (d
  // absorbs the Lyapunov side). Its best case over the box decides
  // feasibility and doubles as the fallback input.
  Vector u_best_h(m);
  double h_headroom = c_h;
  for (int j = 0; j < m; ++j) {
    u_best_h(j) = lgh(j) > 0.0   ? u_upper(j)
                  : lgh(j) < 0.0 ? u_lower(j)
                                 : box_limited(0.0, u_lower(j), u_upper(j));
    h_headroom += lgh(j) * u_best_h(j);
  }
  QPResult result;
  if (h_headroom < 0.0) {
    const double d = std::max(0.0, c_v + lgv.dot(u_best_h));
    result.u = u_best_h;
    result.slack = d;
    result.objective = 0.5 * u_best_h.dot(weights.h_weight * u_best_h) +
                       weights.p_slack * d * d;
    result.status = QPStatus::kInfeasible;
    result.cbf_margin = h_headroom;
    result.cbf_active = true;
    return result;
  }

  // z = (u, d); strictly convex objective half z'Qz.
  const int nz = m + 1;
  Matrix q_mat = Matrix::Zero(nz, nz);
  q_mat.topLeftCorner(m, m) = 0.5 * (weights.h_weight + weights.h_weight.transpose());
  q_mat(m, m) = 2.0 * weights.p_slack;

  std::vector<Row> rows;
  {
    Row clf_row;
    clf_row.a = Vector::Zero(nz);
    clf_row.a.head(m) = lgv;
    clf_row.a(m) = -1.0;
    clf_row.b = -c_v;
    rows.push_back(std::move(clf_row));

    Row cbf_row;
    cbf_row.a = Vector::Zero(nz);
    cbf_row.a.head(m) = -lgh;
    cbf_row.b = c_h;
    rows.push_back(std::move(cbf_row));

    for (int j = 0; j < m; ++j) {
      if (std::isfinite(u_upper(j))) {
        Row r;
        r.a = Vector::Zero(nz);
        r.a(j) = 1.0;
        r.b = u_upper(j);
        rows.push_back(std::move(r));
      }
      if (std::isfinite(u_lower(j))) {
        Row r;
        r.a = Vector::Zero(nz);
        r.a(j) = -1.0;
        r.b = -u_lower(j);
        rows.push_back(std::move(r));
      }
    }
    Row d_row;
    d_row.a = Vector::Zero(nz);
    d_row.a(m) = -1.0;
    d_row.b = 0.0;
    rows.push_back(std::move(d_row));
  }
  const int n_rows = static_cast<int>(rows.size());
  if (n_rows > 20) {
    throw ConfigError("safety filter: too many constraints to enumerate");
  }

  // Every optimum of a strictly convex QP solves the equality-constrained
  // problem of one linearly independent subset of its active constraints, so
  // scanning all small subsets and keeping the feasible minimizer is exact.
  bool found = false;
  double best_obj = 0.0;
  Vector best_z;
  for (unsigned mask = 0; mask < (1u << n_rows); ++mask) {
    const int k = __builtin_popcount(mask);
    if (k > nz) continue;
    Matrix kkt = Matrix::Zero(nz + k, nz + k);
    kkt.topLeftCorner(nz, nz) = q_mat;
    Vector rhs = Vector::Zero(nz + k);
    int r = 0;
    for (int i = 0; i < n_rows; ++i) {
      if (!(mask & (1u << i))) continue;
      kkt.block(nz + r, 0, 1, nz) = rows[i].a.transpose();
      kkt.block(0, nz + r, nz, 1) = rows[i].a;
      rhs(nz + r) = rows[i].b;
      ++r;
    }
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);
    const Vector z = sol.head(nz);
    if (!z.allFinite()) continue;
    bool feasible = true;
    for (const Row& row : rows) {
      if (row.a.dot(z) > row.b + 1e-7 * (1.0 + std::abs(row.b))) {
        feasible = false;
        break;
      }
    }
    if (!feasible) continue;
    const double obj = 0.5 * z.dot(q_mat * z);
    if (!found || obj < best_obj) {
      found = true;
      best_obj = obj;
      best_z = z;
    }
  }
  if (!found) {
    throw SolverError("safety filter: enumeration found no feasible point");
  }

  result.u = best_z.head(m);
  result.slack = std::max(0.0, best_z(m));
  result.objective = best_obj;
  result.status = QPStatus::kOptimal;
  result.cbf_margin = c_h + lgh.dot(result.u);
  result.cbf_active = result.cbf_margin <= 1e-6 * (1.0 + std::abs(c_h));
  return result;
}

UncertaintyBounds acc_build_constants(const ACCParams& p, double beta_margin,
                                      double v_max) {
  if (!(beta_margin >= 1.0)) {
    throw ConfigError("acc bounds: beta_margin must be >= 1");
  }
  constexpr double kTwoPi = 6.28318530717958647692;
  UncertaintyBounds b;
  b.margin_multiplier = beta_margin;
  b.l_t = 0.2 * p.gravity * kTwoPi / 10.0 * beta_margin;
  b.l_ftil = (p.f1 + 2.0 * p.f2 * v_max) * beta_margin;
  b.b_ftil = 0.2 * p.gravity * beta_margin;
  b.l_gtil = 0.0;
  b.b_gtil = 1.0 / p.m;
  b.l_u = 2.0 * p.u_max() / 0.1;
  return b;
}

double acc_gamma(const ACCParams& p, double a, double t_s, double beta_margin,
                 double v_max) {
  UncertaintyBounds b = acc_build_constants(p, beta_margin, v_max);
  const ControlAffineModel model = make_acc_nominal_model(p);
  compute_theta_phi(model, b, p.u_max());
  compute_beta(model, b, p.u_max());
  return compute_gamma(b, a, t_s);
}

CLFSpec make_acc_clf(const ACCParams& p, double c1) {
  CLFSpec clf;
  const double v_d = p.v_d;
  clf.v_eval = [v_d](const Vector& x) {
    return (x(1) - v_d) * (x(1) - v_d);
  };
  clf.v_grad = [v_d](const Vector& x) {
    Vector grad = Vector::Zero(3);
    grad(1) = 2.0 * (x(1) - v_d);
    return grad;
  };
  clf.c1 = c1;
  return clf;
}

CBFSpec make_acc_cbf(const ACCParams& p) {
  CBFSpec cbf;
  const double tau_d = p.tau_d;
  cbf.h_eval = [tau_d](const Vector& x) { return x(2) - tau_d * x(1); };
  cbf.h_grad = [tau_d](const Vector&) {
    Vector grad = Vector::Zero(3);
    grad(1) = -tau_d;
    grad(2) = 1.0;
    return grad;
  };
  cbf.alpha = [](double h) { return h; };
  return cbf;
}

ACCVariant acc_variant_from_name(const std::string& name) {
  if (name == "true-uncertainty") return ACCVariant::kTrueUncertainty;
  if (name == "ignore-uncertainty") return ACCVariant::kIgnoreUncertainty;
  if (name == "adaptive") return ACCVariant::kAdaptive;
  throw ConfigError("unknown scenario variant: " + name);
}

std::string acc_variant_name(ACCVariant variant) {
  switch (variant) {
    case ACCVariant::kTrueUncertainty:
      return "true-uncertainty";
    case ACCVariant::kIgnoreUncertainty:
      return "ignore-uncertainty";
    default:
      return "adaptive";
  }
}

void ACCScenarioConfig::finalize() {
  if (x0.size() == 0) {
    x0 = Vector(3);
    x0 << 18.0, 12.0, 80.0;
  }
  if (x0.size() != 3) {
    throw ConfigError("acc scenario: x0 must have 3 entries");
  }
  if (!(duration > 0.0) || !(t_qp > 0.0) || !(t_s > 0.0)) {
    throw ConfigError("acc scenario: duration and periods must be positive");
  }
  const double ratio = t_qp / t_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || ratio < 1.0) {
    throw ConfigError("acc scenario: t_qp must be a multiple of t_s");
  }
  if (!(gamma >= 0.0)) {
    throw ConfigError("acc scenario: gamma must be nonnegative");
  }
  if (!(a > 0.0) || !(c1 > 0.0) || !(p_slack > 0.0)) {
    throw ConfigError("acc scenario: a, c1 and p_slack must be positive");
  }
}

ACCScenarioResult run_acc_scenario(ACCVariant variant,
                                   const ACCScenarioConfig& config) {
  ACCScenarioConfig cfg = config;
  cfg.finalize();
  const ACCParams& p = cfg.plant;
  const ControlAffineModel model = make_acc_nominal_model(p);
  const CLFSpec clf = make_acc_clf(p, cfg.c1);
  const CBFSpec cbf = make_acc_cbf(p);
  QPWeights weights;
  weights.h_weight = Matrix::Constant(1, 1, 1.0 / (p.m * p.m));
  weights.p_slack = cfg.p_slack;

  const bool adaptive = variant == ACCVariant::kAdaptive;
  const int steps_per_qp = static_cast<int>(std::round(cfg.t_qp / cfg.t_s));
  const int n_rows = static_cast<int>(std::round(cfg.duration / cfg.t_s));
  const int substeps = 5;
  const double dt = cfg.t_s / substeps;

  ACCScenarioResult out;
  Trajectory& traj = out.trajectory;
  traj.n = 3;
  traj.m = 1;
  traj.scenario_id = "acc-" + acc_variant_name(variant);
  out.gamma_used = adaptive ? cfg.gamma : 0.0;

  Vector x = cfg.x0;
  L1ControllerState est = L1ControllerState::init(3, 1, cfg.x0);
  double u_qp = 0.0;
  bool cbf_active = false;
  bool infeasible = false;
  out.min_h = cbf.h_eval(x);
  const Vector zero_sigma = Vector::Zero(3);

  for (int i = 0; i <= n_rows; ++i) {
    const double t = i * cfg.t_s;
    if (adaptive && i >= 1) {
      adaptive_update(est, x, cfg.a, cfg.t_s);
    }
    const Vector sigma_row = adaptive ? est.sigma_hat
                             : variant == ACCVariant::kTrueUncertainty
                                 ? acc_true_delta(p, t, x)
                                 : zero_sigma;
    if (i % steps_per_qp == 0) {
      const QPResult res =
          solve_ad_clbf_qp(clf, cbf, weights, model, x, sigma_row,
                           out.gamma_used, model.input_lower,
                           model.input_upper);
      u_qp = res.u(0);
      cbf_active = res.cbf_active;
      infeasible = res.status == QPStatus::kInfeasible;
    }

    const Vector sigma_true = acc_true_delta(p, t, x);
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.u_rl.push_back(Vector::Constant(1, u_qp));
    traj.u_l1.push_back(Vector::Zero(1));
    traj.u_total.push_back(Vector::Constant(1, u_qp));
    traj.sigma_hat.push_back(sigma_row);
    // g spans coordinate 1 with gain 1/m; the complement is coordinates 0, 2.
    traj.sigma_matched.push_back(Vector::Constant(1, p.m * sigma_row(1)));
    Vector unmatched(2);
    unmatched << sigma_row(0), sigma_row(2);
    traj.sigma_unmatched.push_back(unmatched);
    traj.sigma_true.push_back(sigma_true);
    traj.reward.push_back(0.0);

    const double h_now = cbf.h_eval(x);
    out.h.push_back(h_now);
    out.v.push_back(clf.v_eval(x));
    out.psi_h_active.push_back(cbf_active ? 1.0 : 0.0);
    out.qp_status.push_back(infeasible ? 1.0 : 0.0);
    out.min_h = std::min(out.min_h, h_now);
    if (adaptive && i >= 1) {
      out.max_estimate_error = std::max(
          out.max_estimate_error, (est.sigma_hat - sigma_true).norm());
    }
    if (t >= cfg.duration - 5.0) {
      out.max_tracking_error =
          std::max(out.max_tracking_error, std::abs(x(1) - p.v_d));
    }
    if (i == n_rows) break;

    if (adaptive) {
      // Plant and predictor advance jointly so the prediction error sees the
      // continuously varying state, not a held measurement.
      Vector joint(6);
      joint << x, est.x_hat;
      auto fn = [&](double tt, const Vector& z) {
        Vector dz(6);
        const Vector xs = z.head(3);
        const Vector xh = z.tail(3);
        dz.head(3) = acc_derivative(p, tt, xs, u_qp);
        dz.tail(3) = model.f_eval(xs) +
                     model.g_eval(xs) * Vector::Constant(1, u_qp) +
                     est.sigma_hat - cfg.a * (xh - xs);
        return dz;
      };
      for (int s = 0; s < substeps; ++s) {
        joint = rk4_step(fn, t + s * dt, joint, dt);
      }
      x = joint.head(3);
      est.x_hat = joint.tail(3);
    } else {
      auto fn = [&](double tt, const Vector& xs) {
        return acc_derivative(p, tt, xs, u_qp);
      };
      for (int s = 0; s < substeps; ++s) {
        x = rk4_step(fn, t + s * dt, x, dt);
      }
    }
  }
  return out;
}

void ACCScenarioResult::write_csv(const std::string& path) const {
  write_trajectory_csv(trajectory, path, {"h", "V", "psi_h_active", "qp_status"},
                       {h, v, psi_h_active, qp_status});
}

}  // namespace l1aug
