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

#ifndef L1AUG_TYPES_HPP
#define L1AUG_TYPES_HPP

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>

namespace l1aug {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// State derivative of a (possibly time-varying) plant: (t, x, u) -> dx/dt.
using DerivativeFn = std::function<Vector(double, const Vector&, const Vector&)>;

// Additive state-space disturbance: (t, x) -> n-vector.
using DisturbanceFn = std::function<Vector(double, const Vector&)>;

// Scalar instantaneous reward of a state.
using RewardFn = std::function<double(const Vector&)>;

// Invalid dimensions, rates, ranges or file schemas.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Input map lost column rank; matched/unmatched split is undefined there.
class SingularGeometryError : public std::runtime_error {
 public:
  explicit SingularGeometryError(const std::string& what)
      : std::runtime_error(what) {}
};

// Non-finite state encountered while integrating; carries the failure time.
class SimulationDivergedError : public std::runtime_error {
 public:
  SimulationDivergedError(double t, const std::string& what)
      : std::runtime_error(what), time(t) {}
  double time;
};

// Iterative solver could not make progress (regularization or line search
// exhausted, Riccati iteration stalled, ...).
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// File could not be parsed; message names the offending field or line.
class LoadError : public std::runtime_error {
 public:
  explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace l1aug

#endif  // L1AUG_TYPES_HPP
