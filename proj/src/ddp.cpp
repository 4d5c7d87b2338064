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

#include "l1aug/ddp.hpp"

#include <json.hpp>

#include <Eigen/Cholesky>
#include <cmath>
#include <fstream>
#include <memory>

#include "l1aug/integrator.hpp"

namespace l1aug {

DiscreteDynamicsFn discretize_rk4(DerivativeFn deriv, double dt) {
  if (!deriv) throw ConfigError("discretize_rk4 needs a derivative");
  if (!(dt > 0.0)) throw ConfigError("discretize_rk4 needs dt > 0");
  return [deriv, dt](int k, const Vector& x, const Vector& u) {
    auto fn = [&](double t, const Vector& xs) { return deriv(t, xs, u); };
    return rk4_step(fn, static_cast<double>(k) * dt, x, dt);
  };
}

void OCProblem::validate() const {
  if (n < 1 || m < 1) throw ConfigError("problem dimensions must be positive");
  if (horizon_n < 1) throw ConfigError("horizon must be at least one step");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!discrete_dynamics) throw ConfigError("discrete dynamics not set");
  if (x_start.size() != n) throw ConfigError("x_start dimension mismatch");
  if (x_target.size() != n) throw ConfigError("x_target dimension mismatch");
  if (p_stage.size() != n || p_final.size() != n) {
    throw ConfigError("state weight dimension mismatch");
  }
  if (q_input.size() != m) throw ConfigError("input weight dimension mismatch");
  if ((p_stage.array() < 0.0).any() || (p_final.array() < 0.0).any()) {
    throw ConfigError("state weights must be nonnegative");
  }
  if ((q_input.array() <= 0.0).any()) {
    throw ConfigError("input weights must be positive");
  }
  if (u_reference.size() != 0 && u_reference.size() != m) {
    throw ConfigError("u_reference dimension mismatch");
  }
}

namespace {

Vector input_reference(const OCProblem& prob) {
  return prob.u_reference.size() == prob.m ? prob.u_reference
                                           : Vector::Zero(prob.m);
}

}  // namespace

double trajectory_cost(const OCProblem& prob, const std::vector<Vector>& xs,
                       const std::vector<Vector>& us) {
  const Vector u_ref = input_reference(prob);
  double j = 0.0;
  for (int k = 0; k < prob.horizon_n; ++k) {
    const Vector xe = xs[k] - prob.x_target;
    const Vector ue = us[k] - u_ref;
    j += xe.dot(prob.p_stage.cwiseProduct(xe)) +
         ue.dot(prob.q_input.cwiseProduct(ue));
  }
  const Vector xe = xs[prob.horizon_n] - prob.x_target;
  j += xe.dot(prob.p_final.cwiseProduct(xe));
  return j;
}

void numeric_step_jacobians(const DiscreteDynamicsFn& step, int k,
                            const Vector& x, const Vector& u, Matrix& a_out,
                            Matrix& b_out) {
  const int n = static_cast<int>(x.size());
  const int m = static_cast<int>(u.size());
  a_out.resize(n, n);
  b_out.resize(n, m);
  Vector xp = x, xm = x;
  for (int i = 0; i < n; ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x(i)));
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    a_out.col(i) = (step(k, xp, u) - step(k, xm, u)) / (2.0 * h);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  Vector up = u, um = u;
  for (int i = 0; i < m; ++i) {
    const double h = 1e-6 * (1.0 + std::abs(u(i)));
    up(i) = u(i) + h;
    um(i) = u(i) - h;
    b_out.col(i) = (step(k, x, up) - step(k, x, um)) / (2.0 * h);
    up(i) = u(i);
    um(i) = u(i);
  }
}

std::optional<BackwardPassResult> ddp_backward_pass(
    const OCProblem& prob, const std::vector<Vector>& x_traj,
    const std::vector<Vector>& u_traj, double mu) {
  const int n = prob.n;
  const int m = prob.m;
  const Vector u_ref = input_reference(prob);
  const Matrix l_xx = 2.0 * Matrix(prob.p_stage.asDiagonal());
  const Matrix l_uu = 2.0 * Matrix(prob.q_input.asDiagonal());

  BackwardPassResult out;
  out.ff.resize(prob.horizon_n);
  out.gains.resize(prob.horizon_n);

  Vector v_x = 2.0 * prob.p_final.cwiseProduct(x_traj[prob.horizon_n] -
                                               prob.x_target);
  Matrix v_xx = 2.0 * Matrix(prob.p_final.asDiagonal());

  Matrix a(n, n), b(n, m);
  for (int k = prob.horizon_n - 1; k >= 0; --k) {
    numeric_step_jacobians(prob.discrete_dynamics, k, x_traj[k], u_traj[k], a,
                           b);
    const Vector l_x = 2.0 * prob.p_stage.cwiseProduct(x_traj[k] -
                                                       prob.x_target);
    const Vector l_u = 2.0 * prob.q_input.cwiseProduct(u_traj[k] - u_ref);

    const Vector q_x = l_x + a.transpose() * v_x;
    const Vector q_u = l_u + b.transpose() * v_x;
    const Matrix q_xx = l_xx + a.transpose() * v_xx * a;
    const Matrix q_ux = b.transpose() * v_xx * a;
    Matrix q_uu = l_uu + b.transpose() * v_xx * b;
    q_uu.diagonal().array() += mu;
    if (!q_uu.allFinite()) return std::nullopt;

    Eigen::LLT<Matrix> llt(q_uu);
    if (llt.info() != Eigen::Success) return std::nullopt;
    Vector kf = -llt.solve(q_u);
    Matrix kg = -llt.solve(q_ux);

    out.d1 += kf.dot(q_u);
    out.d2 += kf.dot(q_uu * kf);
    v_x = q_x + kg.transpose() * (q_uu * kf + q_u) + q_ux.transpose() * kf;
    v_xx = q_xx + kg.transpose() * q_uu * kg + kg.transpose() * q_ux +
           q_ux.transpose() * kg;
    v_xx = 0.5 * (v_xx + v_xx.transpose()).eval();

    out.ff[k] = std::move(kf);
    out.gains[k] = std::move(kg);
  }
  return out;
}

ForwardPassResult ddp_forward_pass(const OCProblem& prob,
                                   const DDPSolution& sol,
                                   const BackwardPassResult& bp,
                                   double alpha) {
  ForwardPassResult out;
  out.x.resize(prob.horizon_n + 1);
  out.u.resize(prob.horizon_n);
  out.x[0] = sol.x_nominal[0];
  for (int k = 0; k < prob.horizon_n; ++k) {
    out.u[k] = sol.u_nominal[k] + alpha * bp.ff[k] +
               bp.gains[k] * (out.x[k] - sol.x_nominal[k]);
    if (!out.u[k].allFinite()) return out;
    out.x[k + 1] = prob.discrete_dynamics(k, out.x[k], out.u[k]);
    if (!out.x[k + 1].allFinite() ||
        out.x[k + 1].lpNorm<Eigen::Infinity>() > 1e12) {
      return out;
    }
  }
  out.cost = trajectory_cost(prob, out.x, out.u);
  out.finite = std::isfinite(out.cost);
  return out;
}

DDPSolution solve_ddp(const OCProblem& prob, const std::vector<Vector>& u_init,
                      const DDPOptions& opts) {
  prob.validate();
  if (static_cast<int>(u_init.size()) != prob.horizon_n) {
    throw ConfigError("u_init must have one input per stage");
  }

  DDPSolution sol;
  sol.n = prob.n;
  sol.m = prob.m;
  sol.dt = prob.dt;
  sol.u_nominal = u_init;
  sol.x_nominal.resize(prob.horizon_n + 1);
  sol.x_nominal[0] = prob.x_start;
  for (int k = 0; k < prob.horizon_n; ++k) {
    if (sol.u_nominal[k].size() != prob.m || !sol.u_nominal[k].allFinite()) {
      throw ConfigError("u_init entries must be finite m-vectors");
    }
    sol.x_nominal[k + 1] =
        prob.discrete_dynamics(k, sol.x_nominal[k], sol.u_nominal[k]);
  }
  sol.cost = trajectory_cost(prob, sol.x_nominal, sol.u_nominal);
  if (!std::isfinite(sol.cost)) {
    throw SolverError("initial rollout has non-finite cost at iteration 0");
  }

  double mu = opts.mu_init;
  auto escalate = [&opts](double v) {
    return v < opts.mu_min ? opts.mu_min : 2.0 * v;
  };

  for (int outer = 0; outer < opts.max_iterations; ++outer) {
    std::optional<BackwardPassResult> bp;
    while (true) {
      bp = ddp_backward_pass(prob, sol.x_nominal, sol.u_nominal, mu);
      if (bp) break;
      mu = escalate(mu);
      if (mu > opts.mu_max) return sol;  // regularization exhausted
    }
    sol.ff = bp->ff;
    sol.gains = bp->gains;

    const double expected_full = -(bp->d1 + 0.5 * bp->d2);
    if (expected_full < opts.tolerance) {
      sol.converged = true;
      return sol;
    }

    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < opts.line_search_steps; ++ls, alpha *= 0.5) {
      ForwardPassResult fwd = ddp_forward_pass(prob, sol, *bp, alpha);
      if (!fwd.finite) continue;
      const double expected = -(alpha * bp->d1 + 0.5 * alpha * alpha * bp->d2);
      const double actual = sol.cost - fwd.cost;
      if (expected > 0.0 && actual >= opts.accept_ratio * expected) {
        const double previous = sol.cost;
        sol.x_nominal = std::move(fwd.x);
        sol.u_nominal = std::move(fwd.u);
        sol.cost = fwd.cost;
        sol.iterations += 1;
        accepted = true;
        mu = opts.mu_init;
        if (actual < opts.tolerance * std::max(1.0, std::abs(previous))) {
          sol.converged = true;
          return sol;
        }
        break;
      }
    }
    if (!accepted) {
      mu = escalate(mu);
      if (mu > opts.mu_max) return sol;
    }
  }
  return sol;
}

Policy ddp_policy(const DDPSolution& sol) {
  if (sol.u_nominal.empty() || sol.gains.size() != sol.u_nominal.size() ||
      sol.x_nominal.size() != sol.u_nominal.size() + 1 || !(sol.dt > 0.0)) {
    throw ConfigError("solution is not executable");
  }
  auto sp = std::make_shared<const DDPSolution>(sol);
  Policy p;
  double hint = 0.0;
  for (const Matrix& g : sol.gains) hint = std::max(hint, g.norm());
  p.lipschitz_hint = hint;
  p.eval = [sp](double t, const Vector& x) {
    const long long last = static_cast<long long>(sp->u_nominal.size()) - 1;
    long long k = static_cast<long long>(std::floor(t / sp->dt + 1e-9));
    if (k < 0) k = 0;
    if (k > last) k = last;
    const std::size_t i = static_cast<std::size_t>(k);
    return Vector(sp->u_nominal[i] + sp->gains[i] * (x - sp->x_nominal[i]));
  };
  return p;
}

void save_ddp_solution(const DDPSolution& sol, const std::string& path) {
  nlohmann::json doc;
  doc["type"] = "ddp_solution";
  doc["n"] = sol.n;
  doc["m"] = sol.m;
  doc["dt"] = sol.dt;
  doc["cost"] = sol.cost;
  doc["iterations"] = sol.iterations;
  doc["converged"] = sol.converged;
  auto vec_rows = [](const std::vector<Vector>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Vector& v : rows) {
      nlohmann::json row = nlohmann::json::array();
      for (int i = 0; i < v.size(); ++i) row.push_back(v(i));
      arr.push_back(std::move(row));
    }
    return arr;
  };
  doc["x_nominal"] = vec_rows(sol.x_nominal);
  doc["u_nominal"] = vec_rows(sol.u_nominal);
  doc["ff"] = vec_rows(sol.ff);
  nlohmann::json gains = nlohmann::json::array();
  for (const Matrix& g : sol.gains) {
    nlohmann::json row = nlohmann::json::array();
    for (int r = 0; r < g.rows(); ++r) {
      for (int c = 0; c < g.cols(); ++c) row.push_back(g(r, c));
    }
    gains.push_back(std::move(row));
  }
  doc["gains"] = gains;

  std::ofstream out(path);
  if (!out) throw LoadError("cannot open " + path + " for writing");
  out << doc.dump(1) << "\n";
}

DDPSolution load_ddp_solution(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("invalid solution file: ") + e.what());
  }
  DDPSolution sol;
  try {
    if (doc.at("type").get<std::string>() != "ddp_solution") {
      throw LoadError("not a solution file");
    }
    sol.n = doc.at("n").get<int>();
    sol.m = doc.at("m").get<int>();
    sol.dt = doc.at("dt").get<double>();
    sol.cost = doc.at("cost").get<double>();
    sol.iterations = doc.at("iterations").get<int>();
    sol.converged = doc.at("converged").get<bool>();
    auto read_rows = [](const nlohmann::json& arr, int width) {
      std::vector<Vector> rows;
      for (const auto& row : arr) {
        if (static_cast<int>(row.size()) != width) {
          throw LoadError("row width mismatch in solution file");
        }
        Vector v(width);
        for (int i = 0; i < width; ++i) v(i) = row[i].get<double>();
        rows.push_back(std::move(v));
      }
      return rows;
    };
    sol.x_nominal = read_rows(doc.at("x_nominal"), sol.n);
    sol.u_nominal = read_rows(doc.at("u_nominal"), sol.m);
    sol.ff = read_rows(doc.at("ff"), sol.m);
    for (const auto& row : doc.at("gains")) {
      if (static_cast<int>(row.size()) != sol.m * sol.n) {
        throw LoadError("gain width mismatch in solution file");
      }
      Matrix g(sol.m, sol.n);
      int idx = 0;
      for (int r = 0; r < sol.m; ++r) {
        for (int c = 0; c < sol.n; ++c) g(r, c) = row[idx++].get<double>();
      }
      sol.gains.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("invalid solution file: ") + e.what());
  }
  if (sol.x_nominal.size() != sol.u_nominal.size() + 1 ||
      sol.gains.size() != sol.u_nominal.size()) {
    throw LoadError("inconsistent trajectory lengths in solution file");
  }
  return sol;
}

OCProblem make_quadrotor_reach_problem(const QuadrotorParams& params,
                                       int horizon_n, double dt) {
  ControlAffineModel model = make_quadrotor_model(params);
  OCProblem prob;
  prob.n = 12;
  prob.m = 4;
  prob.horizon_n = horizon_n;
  prob.dt = dt;
  prob.discrete_dynamics = discretize_rk4(
      [model](double, const Vector& x, const Vector& u) {
        return nominal_derivative(model, x, u);
      },
      dt);
  prob.x_start = Vector::Zero(12);
  prob.x_target = Vector::Zero(12);
  prob.x_target(0) = 4.0;
  prob.x_target(1) = 4.0;
  prob.x_target(2) = 2.0;
  prob.p_stage = Vector(12);
  prob.p_stage << 2, 2, 2, 0.1, 0.1, 0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1;
  prob.p_final = Vector(12);
  prob.p_final << 10, 10, 10, 5, 5, 5, 5, 5, 5, 5, 5, 5;
  prob.q_input = Vector(4);
  prob.q_input << 20, 4, 4, 4;
  prob.u_reference = Vector::Zero(4);
  prob.u_reference(0) = params.mass * params.gravity;
  return prob;
}

}  // namespace l1aug
