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

#ifndef L1AUG_DDP_HPP
#define L1AUG_DDP_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "l1aug/dynamics.hpp"
#include "l1aug/plants.hpp"
#include "l1aug/types.hpp"

namespace l1aug {

// Discrete step x_{k+1} = step(k, x_k, u_k).
using DiscreteDynamicsFn =
    std::function<Vector(int, const Vector&, const Vector&)>;

// Wraps a continuous-time derivative as one RK4 step per stage with the
// input held constant, evaluated at t = k * dt.
DiscreteDynamicsFn discretize_rk4(DerivativeFn deriv, double dt);

// Finite-horizon tracking problem with diagonal quadratic weights:
// J = (x_N - x_target)' P_N (x_N - x_target)
//   + sum_k (x_k - x_target)' P (x_k - x_target)
//   + sum_k (u_k - u_reference)' Q (u_k - u_reference).
// An empty u_reference means zero, which penalizes the raw input.
struct OCProblem {
  int n = 0;
  int m = 0;
  int horizon_n = 0;
  double dt = 0.0;
  DiscreteDynamicsFn discrete_dynamics;
  Vector x_start;
  Vector x_target;
  Vector p_stage;   // diagonal of P, length n, entries >= 0
  Vector p_final;   // diagonal of P_N, length n, entries >= 0
  Vector q_input;   // diagonal of Q, length m, entries > 0
  Vector u_reference;  // length m or empty

  void validate() const;
};

double trajectory_cost(const OCProblem& prob, const std::vector<Vector>& xs,
                       const std::vector<Vector>& us);

// Nominal trajectory with its local feedback law
// u(k, x) = u_nominal[k] + gains[k] (x - x_nominal[k]).
struct DDPSolution {
  int n = 0;
  int m = 0;
  double dt = 0.0;
  std::vector<Vector> x_nominal;  // horizon + 1 entries
  std::vector<Vector> u_nominal;  // horizon entries
  std::vector<Matrix> gains;      // horizon entries, each m x n
  std::vector<Vector> ff;         // horizon entries, each length m
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct BackwardPassResult {
  std::vector<Vector> ff;     // horizon entries
  std::vector<Matrix> gains;  // horizon entries
  // Expected cost change of the alpha-scaled update is
  // alpha * d1 + 0.5 * alpha^2 * d2 (negative along a descent direction).
  double d1 = 0.0;
  double d2 = 0.0;
};

// Central finite differences of the discrete step, step size
// 1e-6 * (1 + |coordinate|) per direction.
void numeric_step_jacobians(const DiscreteDynamicsFn& step, int k,
                            const Vector& x, const Vector& u, Matrix& a_out,
                            Matrix& b_out);

// Value recursion with Q_uu + mu I regularization. Returns nothing when the
// regularized Q_uu fails to be positive definite at some stage; the caller
// raises mu and retries.
std::optional<BackwardPassResult> ddp_backward_pass(
    const OCProblem& prob, const std::vector<Vector>& x_traj,
    const std::vector<Vector>& u_traj, double mu);

struct ForwardPassResult {
  std::vector<Vector> x;
  std::vector<Vector> u;
  double cost = 0.0;
  bool finite = false;
};

// Rollout of u = u_nom + alpha * ff + K (x - x_nom). alpha = 0 reproduces
// the nominal trajectory unchanged.
ForwardPassResult ddp_forward_pass(const OCProblem& prob,
                                   const DDPSolution& sol,
                                   const BackwardPassResult& bp, double alpha);

struct DDPOptions {
  int max_iterations = 600;  // the bundled quadrotor mission needs ~320
  double tolerance = 1e-8;  // on expected and realized relative decrease
  double mu_init = 0.0;
  double mu_min = 1e-6;
  double mu_max = 1e10;
  int line_search_steps = 11;  // alpha = 1, 1/2, ..., 2^-10
  double accept_ratio = 0.1;   // realized / expected decrease floor
};

// Alternates backward and forward passes until the expected decrease or the
// realized relative decrease drops below tolerance. iterations counts
// accepted forward passes. Deterministic. Throws SolverError when the
// initial rollout already has non-finite cost.
DDPSolution solve_ddp(const OCProblem& prob, const std::vector<Vector>& u_init,
                      const DDPOptions& opts = DDPOptions{});

// Time-indexed execution: u(t, x) = u_nom[k] + K_k (x - x_nom[k]) with
// k = floor(t / dt) clamped to the final stage past the horizon.
Policy ddp_policy(const DDPSolution& sol);

// JSON round trip so experiments can reload a solution without re-solving.
// Gain matrices are flattened row-major.
void save_ddp_solution(const DDPSolution& sol, const std::string& path);
DDPSolution load_ddp_solution(const std::string& path);

// Point-to-point quadrotor mission: fly from the origin to (4, 4, 2) with
// stage weights diag(2,2,2,0.1,0.1,0.3,0.1...), terminal weights
// diag(10,10,10,5...), input weights diag(20,4,4,4) taken about the hover
// wrench so that holding altitude is free. The 10 s default horizon gives
// the slow optimal climb enough tail to land within 0.08 m of the target
// (8 s ends ~0.6 m low because the thrust penalty favours a gentle climb).
// Longer horizons buy nothing: past arrival the optimum circles the target
// in a lightly damped ±0.15 m lateral orbit, and the oscillating feedback
// schedule that rides along with it destabilises mass-perturbed tracking.
OCProblem make_quadrotor_reach_problem(const QuadrotorParams& params,
                                       int horizon_n = 500, double dt = 0.02);

}  // namespace l1aug

#endif  // L1AUG_DDP_HPP
