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

#ifndef L1AUG_INTEGRATOR_HPP
#define L1AUG_INTEGRATOR_HPP

#include <functional>

#include "l1aug/types.hpp"

namespace l1aug {

// One classical fourth-order Runge-Kutta step of dx/dt = fn(t, x).
inline Vector rk4_step(const std::function<Vector(double, const Vector&)>& fn,
                       double t, const Vector& x, double dt) {
  Vector k1 = fn(t, x);
  Vector k2 = fn(t + 0.5 * dt, x + 0.5 * dt * k1);
  Vector k3 = fn(t + 0.5 * dt, x + 0.5 * dt * k2);
  Vector k4 = fn(t + dt, x + dt * k3);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace l1aug

#endif  // L1AUG_INTEGRATOR_HPP
