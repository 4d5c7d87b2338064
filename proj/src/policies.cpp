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

#include "l1aug/policies.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <fstream>
#include <memory>
#include <utility>

namespace l1aug {

namespace {

// Solves A X + X A' = W through the n^2 x n^2 Kronecker system
// (I (x) A + A (x) I) vec(X) = vec(W), column-major vec. Exact up to the LU
// solve; A stable keeps the system nonsingular.
Matrix solve_lyapunov(const Matrix& a, const Matrix& w) {
  const int n = static_cast<int>(a.rows());
  Matrix big = Matrix::Zero(n * n, n * n);
  for (int j = 0; j < n; ++j) {
    big.block(n * j, n * j, n, n) += a;  // I (x) A
    for (int l = 0; l < n; ++l) {
      big.block(n * j, n * l, n, n).diagonal().array() += a(j, l);  // A (x) I
    }
  }
  Vector w_vec(n * n);
  for (int j = 0; j < n; ++j) w_vec.segment(n * j, n) = w.col(j);
  Eigen::PartialPivLU<Matrix> lu(big);
  Vector x_vec = lu.solve(w_vec);
  Matrix x(n, n);
  for (int j = 0; j < n; ++j) x.col(j) = x_vec.segment(n * j, n);
  return 0.5 * (x + x.transpose());
}

double spectral_abscissa(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

Vector apply_activation(const std::string& name, const Vector& z) {
  if (name == "tanh") return z.array().tanh();
  return z.cwiseMax(0.0);  // relu; validate() admits nothing else
}

}  // namespace

LQRSynthesis lqr_synthesize(const ControlAffineModel& model,
                            const Vector& x_eq, const Vector& u_eq,
                            const Vector& q_state, const Vector& r_input,
                            double eq_tolerance) {
  model.validate();
  const int n = model.n;
  const int m = model.m;
  if (x_eq.size() != n || u_eq.size() != m) {
    throw ConfigError("lqr equilibrium dimensions do not match the model");
  }
  if (q_state.size() != n || (q_state.array() < 0.0).any()) {
    throw ConfigError("lqr q_state must be a nonnegative n-vector");
  }
  if (r_input.size() != m || (r_input.array() <= 0.0).any()) {
    throw ConfigError("lqr r_input must be a positive m-vector");
  }
  const Vector residual_eq = nominal_derivative(model, x_eq, u_eq);
  if (residual_eq.lpNorm<Eigen::Infinity>() > eq_tolerance) {
    throw ConfigError("lqr point is not an equilibrium: ||f + g u|| = " +
                      std::to_string(residual_eq.lpNorm<Eigen::Infinity>()));
  }

  LQRSynthesis out;
  // Central-difference state Jacobian; the input matrix is exact because the
  // dynamics are affine in u.
  out.a.resize(n, n);
  Vector xp = x_eq, xm = x_eq;
  for (int i = 0; i < n; ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x_eq(i)));
    xp(i) = x_eq(i) + h;
    xm(i) = x_eq(i) - h;
    out.a.col(i) = (nominal_derivative(model, xp, u_eq) -
                    nominal_derivative(model, xm, u_eq)) /
                   (2.0 * h);
    xp(i) = x_eq(i);
    xm(i) = x_eq(i);
  }
  out.b = model.g_eval(x_eq);

  const Matrix q = Matrix(q_state.asDiagonal());
  const Vector r_inv = r_input.cwiseInverse();
  const Matrix b_rinv_bt = out.b * r_inv.asDiagonal() * out.b.transpose();

  // Bass initialization: with -(A + beta I) stable, the solution Z of
  // (A + beta I) Z + Z (A + beta I)' = 2 B R^-1 B' yields a stabilizing
  // K0 = R^-1 B' Z^-1 whenever (A, B) is controllable. beta must exceed
  // -min Re lambda(A); staying near that floor keeps Z well conditioned
  // when the dynamics are stiff.
  Eigen::EigenSolver<Matrix> spectrum(out.a, false);
  const double min_re = spectrum.eigenvalues().real().minCoeff();
  const double beta = std::max(1.0, 1.0 - 1.05 * min_re);
  const Matrix shifted = -(out.a + beta * Matrix::Identity(n, n));
  Matrix z = solve_lyapunov(shifted, -2.0 * b_rinv_bt);
  Eigen::FullPivLU<Matrix> z_lu(z);
  if (!z_lu.isInvertible()) {
    throw SolverError("lqr linearization is not stabilizable");
  }
  Matrix k = r_inv.asDiagonal() * out.b.transpose() * z_lu.inverse();
  if (spectral_abscissa(out.a - out.b * k) >= 0.0) {
    throw SolverError("lqr initialization failed to stabilize");
  }

  // Kleinman iteration: each step solves the closed-loop Lyapunov equation
  // and re-derives the gain; monotone in P and quadratically convergent.
  // Convergence is judged relative to the size of the Riccati terms, which
  // reach ~1e10 for stiff plants and cap the attainable absolute residual.
  Matrix p = Matrix::Zero(n, n);
  double residual = std::numeric_limits<double>::infinity();
  double relative = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 100; ++it) {
    const Matrix a_cl = out.a - out.b * k;
    const Matrix w = -(q + k.transpose() * Matrix(r_input.asDiagonal()) * k);
    p = solve_lyapunov(a_cl.transpose(), w);
    k = r_inv.asDiagonal() * out.b.transpose() * p;
    const Matrix linear = out.a.transpose() * p + p * out.a;
    const Matrix quadratic = p * b_rinv_bt * p;
    residual = (linear - quadratic + q).norm();
    relative = residual / (1.0 + linear.norm() + quadratic.norm() + q.norm());
    out.iterations = it + 1;
    if (relative < 1e-12) break;
  }
  if (!(relative < 1e-8)) {
    throw SolverError("lqr Riccati iteration stalled at relative residual " +
                      std::to_string(relative));
  }
  out.p = p;
  out.k = k;
  out.riccati_residual = residual;
  return out;
}

Policy lqr_policy(const ControlAffineModel& model, const Vector& x_eq,
                  const Vector& u_eq, const Vector& q_state,
                  const Vector& r_input, double eq_tolerance) {
  LQRSynthesis syn =
      lqr_synthesize(model, x_eq, u_eq, q_state, r_input, eq_tolerance);
  const Vector lower = model.input_lower;
  const Vector upper = model.input_upper;
  Policy p;
  p.lipschitz_hint = syn.k.norm();
  p.eval = [k = syn.k, x_eq, u_eq, lower, upper](double, const Vector& x) {
    Vector u = u_eq - k * (x - x_eq);
    return Vector(u.cwiseMax(lower).cwiseMin(upper));
  };
  return p;
}

void MLPPolicy::validate() const {
  if (layer_sizes.size() < 2) {
    throw ConfigError("layer_sizes: need at least input and output widths");
  }
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    if (layer_sizes[i] < 1) {
      throw ConfigError("layer_sizes[" + std::to_string(i) +
                        "]: must be positive");
    }
  }
  const std::size_t layers = layer_sizes.size() - 1;
  if (weights.size() != layers || biases.size() != layers) {
    throw ConfigError("weights/biases: expected " + std::to_string(layers) +
                      " layers");
  }
  for (std::size_t i = 0; i < layers; ++i) {
    if (weights[i].rows() != layer_sizes[i + 1] ||
        weights[i].cols() != layer_sizes[i]) {
      throw ConfigError("weights[" + std::to_string(i) + "]: expected " +
                        std::to_string(layer_sizes[i + 1]) + "x" +
                        std::to_string(layer_sizes[i]));
    }
    if (biases[i].size() != layer_sizes[i + 1]) {
      throw ConfigError("biases[" + std::to_string(i) + "]: expected " +
                        std::to_string(layer_sizes[i + 1]) + " values");
    }
  }
  if (activation != "tanh" && activation != "relu") {
    throw ConfigError("activation: unknown '" + activation + "'");
  }
  if (output_scale.size() != layer_sizes.back()) {
    throw ConfigError("output_scale: expected " +
                      std::to_string(layer_sizes.back()) + " values");
  }
  if (norm_offset.size() != layer_sizes.front() ||
      norm_scale.size() != layer_sizes.front()) {
    throw ConfigError("state_normalization: expected " +
                      std::to_string(layer_sizes.front()) + " values");
  }
  if ((norm_scale.array() == 0.0).any()) {
    throw ConfigError("state_normalization.scale: entries must be nonzero");
  }
}

namespace {

Vector json_vector(const nlohmann::json& arr, const std::string& field) {
  if (!arr.is_array()) throw LoadError(field + ": expected an array");
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) {
      throw LoadError(field + "[" + std::to_string(i) + "]: expected a number");
    }
    v(static_cast<int>(i)) = arr[i].get<double>();
  }
  return v;
}

}  // namespace

MLPPolicy mlp_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("invalid policy file: ") + e.what());
  }

  MLPPolicy mlp;
  try {
    if (doc.contains("type") && doc.at("type").get<std::string>() !=
                                    "mlp_policy") {
      throw LoadError("type: not an mlp_policy file");
    }
    for (const auto& s : doc.at("layer_sizes")) {
      mlp.layer_sizes.push_back(s.get<int>());
    }
    if (mlp.layer_sizes.size() < 2) {
      throw LoadError("layer_sizes: need at least input and output widths");
    }
    mlp.activation = doc.value("activation", std::string("tanh"));

    const auto& ws = doc.at("weights");
    const auto& bs = doc.at("biases");
    const std::size_t layers = mlp.layer_sizes.size() - 1;
    if (ws.size() != layers) {
      throw LoadError("weights: expected " + std::to_string(layers) +
                      " layers, got " + std::to_string(ws.size()));
    }
    if (bs.size() != layers) {
      throw LoadError("biases: expected " + std::to_string(layers) +
                      " layers, got " + std::to_string(bs.size()));
    }
    for (std::size_t i = 0; i < layers; ++i) {
      const int rows = mlp.layer_sizes[i + 1];
      const int cols = mlp.layer_sizes[i];
      const std::string field = "weights[" + std::to_string(i) + "]";
      const Vector flat = json_vector(ws[i], field);
      if (flat.size() != rows * cols) {
        throw LoadError(field + ": expected " + std::to_string(rows * cols) +
                        " values, got " + std::to_string(flat.size()));
      }
      Matrix w(rows, cols);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) w(r, c) = flat(r * cols + c);
      }
      mlp.weights.push_back(std::move(w));
      mlp.biases.push_back(
          json_vector(bs[i], "biases[" + std::to_string(i) + "]"));
    }

    const int n = mlp.layer_sizes.front();
    const int m = mlp.layer_sizes.back();
    mlp.output_scale = doc.contains("output_scale")
                           ? json_vector(doc["output_scale"], "output_scale")
                           : Vector::Ones(m);
    if (doc.contains("state_normalization")) {
      const auto& norm = doc["state_normalization"];
      mlp.norm_offset =
          json_vector(norm.at("offset"), "state_normalization.offset");
      mlp.norm_scale =
          json_vector(norm.at("scale"), "state_normalization.scale");
    } else {
      mlp.norm_offset = Vector::Zero(n);
      mlp.norm_scale = Vector::Ones(n);
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("invalid policy file: ") + e.what());
  }

  try {
    mlp.validate();
  } catch (const ConfigError& e) {
    throw LoadError(e.what());
  }
  return mlp;
}

void mlp_save(const MLPPolicy& mlp, const std::string& path) {
  mlp.validate();
  nlohmann::json doc;
  doc["type"] = "mlp_policy";
  doc["layer_sizes"] = mlp.layer_sizes;
  doc["activation"] = mlp.activation;
  nlohmann::json ws = nlohmann::json::array();
  nlohmann::json bs = nlohmann::json::array();
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    nlohmann::json flat = nlohmann::json::array();
    for (int r = 0; r < mlp.weights[i].rows(); ++r) {
      for (int c = 0; c < mlp.weights[i].cols(); ++c) {
        flat.push_back(mlp.weights[i](r, c));
      }
    }
    ws.push_back(std::move(flat));
    nlohmann::json bias = nlohmann::json::array();
    for (int r = 0; r < mlp.biases[i].size(); ++r) {
      bias.push_back(mlp.biases[i](r));
    }
    bs.push_back(std::move(bias));
  }
  doc["weights"] = std::move(ws);
  doc["biases"] = std::move(bs);
  doc["output_scale"] = std::vector<double>(
      mlp.output_scale.data(), mlp.output_scale.data() + mlp.output_scale.size());
  doc["state_normalization"] = {
      {"offset", std::vector<double>(mlp.norm_offset.data(),
                                     mlp.norm_offset.data() +
                                         mlp.norm_offset.size())},
      {"scale", std::vector<double>(mlp.norm_scale.data(),
                                    mlp.norm_scale.data() +
                                        mlp.norm_scale.size())}};
  std::ofstream out(path);
  if (!out) throw LoadError("cannot open " + path + " for writing");
  out << doc.dump(1) << "\n";
}

Vector mlp_eval(const MLPPolicy& mlp, const Vector& x) {
  if (x.size() != mlp.layer_sizes.front()) {
    throw ConfigError("mlp input dimension mismatch");
  }
  Vector h = (x - mlp.norm_offset).cwiseQuotient(mlp.norm_scale);
  const std::size_t layers = mlp.weights.size();
  for (std::size_t i = 0; i < layers; ++i) {
    Vector z = mlp.weights[i] * h + mlp.biases[i];
    h = (i + 1 < layers) ? apply_activation(mlp.activation, z) : std::move(z);
  }
  return mlp.output_scale.cwiseProduct(h);
}

Policy mlp_policy(const MLPPolicy& mlp) {
  mlp.validate();
  auto shared = std::make_shared<const MLPPolicy>(mlp);
  double hint = shared->output_scale.cwiseAbs().maxCoeff() *
                shared->norm_scale.cwiseAbs().cwiseInverse().maxCoeff();
  for (const Matrix& w : shared->weights) hint *= w.norm();
  Policy p;
  p.lipschitz_hint = hint;
  p.eval = [shared](double, const Vector& x) { return mlp_eval(*shared, x); };
  return p;
}

Policy constant_policy(const Vector& u) {
  Policy p;
  p.lipschitz_hint = 0.0;
  p.eval = [u](double, const Vector&) { return u; };
  return p;
}

Policy clamp_policy(Policy inner, const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size() || (lower.array() > upper.array()).any()) {
    throw ConfigError("clamp_policy bounds must satisfy lower <= upper");
  }
  if (!inner.eval) throw ConfigError("clamp_policy needs a policy");
  Policy p;
  p.lipschitz_hint = inner.lipschitz_hint;
  p.eval = [fn = std::move(inner.eval), lower, upper](double t,
                                                      const Vector& x) {
    return Vector(fn(t, x).cwiseMax(lower).cwiseMin(upper));
  };
  return p;
}

}  // namespace l1aug
