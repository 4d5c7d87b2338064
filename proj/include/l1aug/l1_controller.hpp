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

#ifndef L1AUG_L1_CONTROLLER_HPP
#define L1AUG_L1_CONTROLLER_HPP

#include "l1aug/dynamics.hpp"
#include "l1aug/types.hpp"

namespace l1aug {

// Adaptation-loop parameters: observer pole a, sampling period t_s of the
// piecewise-constant update, and the per-channel low-pass bandwidths of the
// compensation filter.
struct L1Params {
  double a = 10.0;
  double t_s = 1e-3;
  Vector k_filter;  // diagonal of the m x m filter bandwidth matrix

  void validate(int m) const;
};

L1Params make_l1_params(double a, double t_s, double k, int m);

// Running state of the augmentation loop.
struct L1ControllerState {
  Vector x_hat;            // state predictor
  Vector sigma_hat;        // sampled lumped-disturbance estimate, n-vector
  Vector sigma_matched;    // input-space component, m-vector
  Vector sigma_unmatched;  // residual coordinates, (n-m)-vector
  Vector u_filter;         // filter state; equals the injected u_l1

  static L1ControllerState init(int n, int m, const Vector& x0);
};

// Predictor derivative dx_hat/dt = f(x) + g(x) u + sigma_hat - a (x_hat - x)
// evaluated at a given measurement x. Exposed so callers can integrate the
// predictor jointly with the plant.
Vector predictor_derivative(const ControlAffineModel& model,
                            const Vector& x_hat, const Vector& x_meas,
                            const Vector& u, const Vector& sigma_hat,
                            double a);

// Integrates the predictor over dt with the measurement held constant.
// Substeps internally so the result stays accurate for a*dt up to O(1).
void predictor_step(L1ControllerState& state, const ControlAffineModel& model,
                    const Vector& x_meas, const Vector& u, double a,
                    double dt);

// Piecewise-constant adaptive law at a sampling boundary:
// sigma_hat = -a / (e^{a t_s} - 1) * (x_hat - x_meas).
void adaptive_update(L1ControllerState& state, const Vector& x_meas, double a,
                     double t_s);

// Splits sigma_hat into matched/unmatched coordinates by solving
// [g gperp] [sigma_m; sigma_um] = sigma_hat.
void decompose_sigma(L1ControllerState& state, const Matrix& g,
                     const Matrix& gperp);

// One zero-order-hold step of the compensation filter:
// u_f <- e^{-K T} u_f - (I - e^{-K T}) sigma_m, elementwise over the
// diagonal bandwidths. DC gain from sigma_m to -u_f is exactly one.
void filter_step(L1ControllerState& state, const Vector& k_filter, double dt);

// Growth/size constants of the admissible uncertainty class and the derived
// scalars consumed by the estimation error bound.
struct UncertaintyBounds {
  double l_ftil = 0.0;  // state Lipschitz constant of the residual drift
  double l_t = 0.0;     // time Lipschitz constant
  double l_gtil = 0.0;  // state Lipschitz constant of the input-gain error
  double b_ftil = 0.0;  // drift bound at x = 0
  double b_gtil = 0.0;  // input-gain error bound at x = 0
  double l_u = 0.0;     // input rate bound
  double margin_multiplier = 1.0;  // safety factor already folded into l_*
  double theta = 0.0;   // sup norm of the uncertainty over the operating set
  double phi = 0.0;     // sup norm of the true state derivative
  double beta = 0.0;    // time-derivative bound of the uncertainty signal
};

// theta = l_ftil max|x| + b_ftil + (l_gtil max|x| + b_gtil) max|u| and
// phi = max|f + g u| + theta, the maximum estimated by sampling the
// operating box (1e5 deterministic samples, 1.2x safety factor).
// max|x| is taken from model.state_set_bound.
void compute_theta_phi(const ControlAffineModel& model,
                       UncertaintyBounds& bounds, double max_u);

// beta = l_t + (l_ftil + l_gtil max|u|) phi + (l_gtil max|x| + b_gtil) l_u.
void compute_beta(const ControlAffineModel& model, UncertaintyBounds& bounds,
                  double max_u);

// Estimation error bound gamma(t_s) = 2 beta t_s + (1 - e^{-a t_s}) theta.
// Vanishes as t_s -> 0.
double compute_gamma(const UncertaintyBounds& bounds, double a, double t_s);

}  // namespace l1aug

#endif  // L1AUG_L1_CONTROLLER_HPP
