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

#include "l1aug/l1_controller.hpp"

#include <Eigen/LU>
#include <cmath>
#include <random>

#include "l1aug/integrator.hpp"

namespace l1aug {

void L1Params::validate(int m) const {
  if (!(a > 0.0)) throw ConfigError("observer pole a must be positive");
  if (!(t_s > 0.0)) throw ConfigError("sampling period t_s must be positive");
  if (k_filter.size() != m) {
    throw ConfigError("k_filter must have one bandwidth per input channel");
  }
  for (int i = 0; i < m; ++i) {
    if (!(k_filter(i) > 0.0)) {
      throw ConfigError("filter bandwidths must be positive");
    }
  }
}

L1Params make_l1_params(double a, double t_s, double k, int m) {
  L1Params p;
  p.a = a;
  p.t_s = t_s;
  p.k_filter = Vector::Constant(m, k);
  p.validate(m);
  return p;
}

L1ControllerState L1ControllerState::init(int n, int m, const Vector& x0) {
  if (x0.size() != n) throw ConfigError("x0 dimension does not match model");
  L1ControllerState s;
  s.x_hat = x0;
  s.sigma_hat = Vector::Zero(n);
  s.sigma_matched = Vector::Zero(m);
  s.sigma_unmatched = Vector::Zero(n - m);
  s.u_filter = Vector::Zero(m);
  return s;
}

Vector predictor_derivative(const ControlAffineModel& model,
                            const Vector& x_hat, const Vector& x_meas,
                            const Vector& u, const Vector& sigma_hat,
                            double a) {
  return model.f_eval(x_meas) + model.g_eval(x_meas) * u + sigma_hat -
         a * (x_hat - x_meas);
}

void predictor_step(L1ControllerState& state, const ControlAffineModel& model,
                    const Vector& x_meas, const Vector& u, double a,
                    double dt) {
  // Keep a*dt per substep small so one RK4 step stays near machine accuracy.
  const int substeps = std::max(1, static_cast<int>(std::ceil(a * dt / 0.05)));
  const double h = dt / substeps;
  auto fn = [&](double, const Vector& xh) {
    return predictor_derivative(model, xh, x_meas, u, state.sigma_hat, a);
  };
  for (int i = 0; i < substeps; ++i) {
    state.x_hat = rk4_step(fn, 0.0, state.x_hat, h);
  }
}

void adaptive_update(L1ControllerState& state, const Vector& x_meas, double a,
                     double t_s) {
  const double gain = -a / (std::exp(a * t_s) - 1.0);
  state.sigma_hat = gain * (state.x_hat - x_meas);
}

void decompose_sigma(L1ControllerState& state, const Matrix& g,
                     const Matrix& gperp) {
  const int n = static_cast<int>(g.rows());
  const int m = static_cast<int>(g.cols());
  Matrix basis(n, n);
  basis.leftCols(m) = g;
  basis.rightCols(n - m) = gperp;
  Eigen::PartialPivLU<Matrix> lu(basis);
  Vector coords = lu.solve(state.sigma_hat);
  state.sigma_matched = coords.head(m);
  state.sigma_unmatched = coords.tail(n - m);
}

void filter_step(L1ControllerState& state, const Vector& k_filter, double dt) {
  for (int i = 0; i < k_filter.size(); ++i) {
    const double decay = std::exp(-k_filter(i) * dt);
    state.u_filter(i) = decay * state.u_filter(i) -
                        (1.0 - decay) * state.sigma_matched(i);
  }
}

void compute_theta_phi(const ControlAffineModel& model,
                       UncertaintyBounds& bounds, double max_u) {
  const double max_x = model.state_set_bound;
  bounds.theta = bounds.l_ftil * max_x + bounds.b_ftil +
                 (bounds.l_gtil * max_x + bounds.b_gtil) * max_u;

  // Deterministic sampling of the operating box: states componentwise inside
  // the ball of radius state_set_bound, inputs inside the input box.
  std::mt19937_64 rng(0x1aa6u);
  auto unit = [&rng]() {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  const int n = model.n;
  const double half_width = max_x / std::sqrt(static_cast<double>(n));
  double max_deriv = 0.0;
  Vector x(n), u(model.m);
  for (int s = 0; s < 100000; ++s) {
    for (int i = 0; i < n; ++i) x(i) = (2.0 * unit() - 1.0) * half_width;
    for (int i = 0; i < model.m; ++i) {
      u(i) = model.input_lower(i) +
             unit() * (model.input_upper(i) - model.input_lower(i));
    }
    max_deriv = std::max(max_deriv, nominal_derivative(model, x, u).norm());
  }
  bounds.phi = 1.2 * max_deriv + bounds.theta;
}

void compute_beta(const ControlAffineModel& model, UncertaintyBounds& bounds,
                  double max_u) {
  const double max_x = model.state_set_bound;
  bounds.beta = bounds.l_t + (bounds.l_ftil + bounds.l_gtil * max_u) *
                                 bounds.phi +
                (bounds.l_gtil * max_x + bounds.b_gtil) * bounds.l_u;
}

double compute_gamma(const UncertaintyBounds& bounds, double a, double t_s) {
  return 2.0 * bounds.beta * t_s + (1.0 - std::exp(-a * t_s)) * bounds.theta;
}

}  // namespace l1aug
