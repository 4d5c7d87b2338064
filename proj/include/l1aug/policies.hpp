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

#ifndef L1AUG_POLICIES_HPP
#define L1AUG_POLICIES_HPP

#include <string>
#include <vector>

#include "l1aug/dynamics.hpp"
#include "l1aug/types.hpp"

namespace l1aug {

// Infinite-horizon LQR about an equilibrium of the nominal model.
struct LQRSynthesis {
  Matrix a;  // continuous-time state Jacobian at the equilibrium
  Matrix b;  // input matrix g(x_eq)
  Matrix k;  // feedback gain, u = u_eq - k (x - x_eq)
  Matrix p;  // Riccati solution
  double riccati_residual = 0.0;  // ||A'P + PA - P B R^-1 B' P + Q||_F
  int iterations = 0;             // Kleinman steps taken
};

// Solves the continuous-time algebraic Riccati equation by Kleinman
// iteration started from a Bass stabilizing gain; Lyapunov subproblems are
// solved exactly through the Kronecker system. q_state and r_input are the
// diagonals of Q (nonnegative) and R (positive). The point must satisfy
// ||f(x_eq) + g(x_eq) u_eq||_inf <= eq_tolerance. Throws ConfigError on a
// non-equilibrium or bad weights, SolverError when no stabilizing gain
// exists or the residual relative to the Riccati term sizes cannot reach
// 1e-8.
LQRSynthesis lqr_synthesize(const ControlAffineModel& model,
                            const Vector& x_eq, const Vector& u_eq,
                            const Vector& q_state, const Vector& r_input,
                            double eq_tolerance = 1e-6);

// u(t, x) = u_eq - K (x - x_eq), clamped onto the model's input box.
Policy lqr_policy(const ControlAffineModel& model, const Vector& x_eq,
                  const Vector& u_eq, const Vector& q_state,
                  const Vector& r_input, double eq_tolerance = 1e-6);

// Feed-forward network policy. File schema (JSON):
//   {
//     "type": "mlp_policy",
//     "layer_sizes": [n, h1, ..., m],
//     "activation": "tanh" | "relu",          applied to hidden layers only;
//                                             the output layer is linear
//     "weights": [ [...], ... ],              one row-major block per layer,
//                                             layer i maps sizes[i]->sizes[i+1]
//     "biases":  [ [...], ... ],
//     "output_scale": [m values],             optional, default all-ones
//     "state_normalization": {                optional, default identity
//       "offset": [n values], "scale": [n values] }
//   }
// The evaluator computes u = output_scale .* net((x - offset) ./ scale).
struct MLPPolicy {
  std::vector<int> layer_sizes;
  std::vector<Matrix> weights;  // weights[i] is layer_sizes[i+1] x layer_sizes[i]
  std::vector<Vector> biases;
  std::string activation = "tanh";
  Vector output_scale;  // size m
  Vector norm_offset;   // size n
  Vector norm_scale;    // size n, entries nonzero

  void validate() const;  // ConfigError naming the inconsistent field
};

// Throws LoadError naming the offending field on parse/shape problems.
MLPPolicy mlp_load(const std::string& path);
void mlp_save(const MLPPolicy& mlp, const std::string& path);

// Deterministic forward evaluation; x must match layer_sizes.front().
Vector mlp_eval(const MLPPolicy& mlp, const Vector& x);

// Wraps the network as a time-invariant policy. lipschitz_hint is the
// product of layer weight norms and the normalization/output scales, an
// upper bound for both supported activations (slope at most 1).
Policy mlp_policy(const MLPPolicy& mlp);

// u held at a fixed vector regardless of (t, x).
Policy constant_policy(const Vector& u);

// Composes a policy with a box clamp so outputs respect an input set.
Policy clamp_policy(Policy inner, const Vector& lower, const Vector& upper);

}  // namespace l1aug

#endif  // L1AUG_POLICIES_HPP
