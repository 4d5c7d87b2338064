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

#include "l1aug/dynamics.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

namespace l1aug {

void ControlAffineModel::validate() const {
  if (n <= 0 || m <= 0) {
    throw ConfigError("model dimensions must be positive, got n=" +
                      std::to_string(n) + " m=" + std::to_string(m));
  }
  if (m > n) {
    throw ConfigError("model has more inputs than states");
  }
  if (!f_eval || !g_eval) {
    throw ConfigError("model is missing f_eval or g_eval");
  }
  if (input_lower.size() != m || input_upper.size() != m) {
    throw ConfigError("input bound size does not match m");
  }
  for (int i = 0; i < m; ++i) {
    if (!(input_lower(i) <= input_upper(i))) {
      throw ConfigError("input_lower exceeds input_upper in channel " +
                        std::to_string(i));
    }
  }
}

Vector ControlAffineModel::clamp_input(const Vector& u) const {
  return u.cwiseMax(input_lower).cwiseMin(input_upper);
}

bool is_strictly_row_diagonally_dominant(const Matrix& a) {
  if (a.rows() != a.cols()) return false;
  for (int i = 0; i < a.rows(); ++i) {
    if (a(i, i) <= 0.0) return false;
    double off = a.row(i).cwiseAbs().sum() - std::abs(a(i, i));
    if (std::abs(a(i, i)) <= off) return false;
  }
  return true;
}

void PerturbationSpec::validate(int m) const {
  if (lambda.rows() != m || lambda.cols() != m) {
    throw ConfigError("lambda must be " + std::to_string(m) + "x" +
                      std::to_string(m));
  }
  if (!is_strictly_row_diagonally_dominant(lambda)) {
    throw ConfigError(
        "lambda must be strictly row diagonally dominant with positive "
        "diagonal");
  }
}

Vector PerturbationSpec::disturbance(double t, const Vector& x) const {
  if (!d_eval) return Vector::Zero(x.size());
  Vector d = d_eval(t, x);
  if (d.size() != x.size()) {
    throw ConfigError("d_eval returned wrong dimension");
  }
  return d;
}

PerturbationSpec PerturbationSpec::identity(int m) {
  PerturbationSpec p;
  p.lambda = Matrix::Identity(m, m);
  p.description = "identity";
  return p;
}

Vector nominal_derivative(const ControlAffineModel& model, const Vector& x,
                          const Vector& u) {
  return model.f_eval(x) + model.g_eval(x) * u;
}

Vector perturbed_derivative(const ControlAffineModel& model,
                            const PerturbationSpec& pert, double t,
                            const Vector& x, const Vector& u) {
  return model.f_eval(x) + model.g_eval(x) * (pert.lambda * u) +
         pert.disturbance(t, x);
}

Vector lumped_sigma(const ControlAffineModel& model,
                    const PerturbationSpec& pert, double t, const Vector& x,
                    const Vector& u) {
  return model.g_eval(x) * (pert.lambda * u - u) + pert.disturbance(t, x);
}

Matrix g_perp(const Matrix& g) {
  const int n = static_cast<int>(g.rows());
  const int m = static_cast<int>(g.cols());
  Eigen::JacobiSVD<Matrix> svd(g);
  if (m == 0 || svd.singularValues()(m - 1) <= 1e-10) {
    throw SingularGeometryError("g(x) is column-rank deficient");
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  Matrix basis = q.rightCols(n - m);
  // Deterministic sign convention: leading non-negligible entry positive.
  for (int c = 0; c < basis.cols(); ++c) {
    for (int r = 0; r < n; ++r) {
      if (std::abs(basis(r, c)) > 1e-12) {
        if (basis(r, c) < 0.0) basis.col(c) *= -1.0;
        break;
      }
    }
  }
  return basis;
}

}  // namespace l1aug
