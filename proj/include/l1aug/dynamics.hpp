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

#ifndef L1AUG_DYNAMICS_HPP
#define L1AUG_DYNAMICS_HPP

#include <map>
#include <optional>
#include <string>

#include "l1aug/types.hpp"

namespace l1aug {

// Control-affine plant model dx/dt = f(x) + g(x) u with a box input set.
// g(x) must keep full column rank everywhere the model is evaluated.
struct ControlAffineModel {
  int n = 0;  // state dimension
  int m = 0;  // input dimension
  std::function<Vector(const Vector&)> f_eval;
  std::function<Matrix(const Vector&)> g_eval;
  Vector input_lower;
  Vector input_upper;
  // Radius of the operating set in the Euclidean norm; consumed by the
  // uncertainty-bound calculators, not enforced by the simulator.
  double state_set_bound = 0.0;

  void validate() const;
  Vector clamp_input(const Vector& u) const;
};

// Multiplicative input-gain error, additive disturbance and named parameter
// overrides that together define the "true" plant an episode runs against.
struct PerturbationSpec {
  Matrix lambda;               // m x m input-gain matrix
  DisturbanceFn d_eval;        // may be empty: treated as zero
  std::map<std::string, double> parameter_overrides;
  std::string description;

  void validate(int m) const;
  Vector disturbance(double t, const Vector& x) const;
  static PerturbationSpec identity(int m);
};

// Baseline feedback policy u = eval(t, x).
struct Policy {
  std::function<Vector(double, const Vector&)> eval;
  // Optional smoothness hint (sup of the state gradient norm); 0 = unknown.
  double lipschitz_hint = 0.0;
};

// True iff every row has |a_ii| strictly larger than the sum of the other
// absolute row entries and a positive diagonal.
bool is_strictly_row_diagonally_dominant(const Matrix& a);

// f(x) + g(x) u.
Vector nominal_derivative(const ControlAffineModel& model, const Vector& x,
                          const Vector& u);

// f(x) + g(x) Lambda u + d(t, x). Parameter overrides are expected to be
// baked into the model instance this is called on.
Vector perturbed_derivative(const ControlAffineModel& model,
                            const PerturbationSpec& pert, double t,
                            const Vector& x, const Vector& u);

// Lumped disturbance of the perturbed plant relative to the nominal one:
// sigma = g(x) (Lambda - I) u + d(t, x), so that
// perturbed_derivative = nominal_derivative + sigma identically.
Vector lumped_sigma(const ControlAffineModel& model,
                    const PerturbationSpec& pert, double t, const Vector& x,
                    const Vector& u);

// Orthonormal basis of the null space of g(x)^T as an n x (n-m) matrix.
// Column signs are fixed so the first entry above a small threshold is
// positive, which makes the basis deterministic across runs.
// Throws SingularGeometryError when g(x) is column-rank deficient
// (smallest singular value <= 1e-10).
Matrix g_perp(const Matrix& g);

}  // namespace l1aug

#endif  // L1AUG_DYNAMICS_HPP
