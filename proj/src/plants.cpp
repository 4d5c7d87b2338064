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

#include "l1aug/plants.hpp"

#include <cmath>

namespace l1aug {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_state_dim(const Vector& x, int n, const char* plant) {
  if (x.size() != n) {
    throw ConfigError(std::string(plant) + " expects a " + std::to_string(n) +
                      "-state, got " + std::to_string(x.size()));
  }
}

double take_override(std::map<std::string, double>& o, const std::string& key,
                     double fallback) {
  auto it = o.find(key);
  if (it == o.end()) return fallback;
  double v = it->second;
  o.erase(it);
  return v;
}

void reject_unknown(const std::map<std::string, double>& o,
                    const char* plant) {
  if (!o.empty()) {
    throw ConfigError(std::string("unknown parameter override '") +
                      o.begin()->first + "' for " + plant);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Cart-pole
// ---------------------------------------------------------------------------

Vector cartpole_f(const CartPoleParams& p, const Vector& x) {
  require_state_dim(x, 4, "cartpole");
  const double s4 = std::sin(x(3));
  const double c4 = std::cos(x(3));
  const double den = 4.0 * (p.m1 + p.m2) - 3.0 * p.m2 * c4 * c4;
  Vector dx(4);
  dx(0) = x(1);
  dx(1) = (2.0 * p.m2 * p.l * x(2) * x(2) * s4 +
           3.0 * p.m2 * p.gravity * s4 * c4 - 4.0 * p.b * x(1)) /
          den;
  dx(2) = (-3.0 * p.m2 * p.l * x(2) * x(2) * s4 * c4 -
           6.0 * (p.m1 + p.m2) * p.gravity * s4 + 6.0 * p.b * x(1) * c4) /
          (p.l * den);
  dx(3) = x(2);
  return dx;
}

Matrix cartpole_g(const CartPoleParams& p, const Vector& x) {
  require_state_dim(x, 4, "cartpole");
  const double c4 = std::cos(x(3));
  const double den = 4.0 * (p.m1 + p.m2) - 3.0 * p.m2 * c4 * c4;
  Matrix g(4, 1);
  g(0, 0) = 0.0;
  g(1, 0) = 4.0 / den;
  g(2, 0) = -6.0 * c4 / (p.l * den);
  g(3, 0) = 0.0;
  return g;
}

Vector cartpole_derivative(const CartPoleParams& p, const Vector& x,
                           double u) {
  return cartpole_f(p, x) + cartpole_g(p, x) * Vector::Constant(1, u);
}

double cartpole_energy(const CartPoleParams& p, const Vector& x) {
  require_state_dim(x, 4, "cartpole");
  const double xd = x(1);
  const double td = x(2);
  const double th = x(3);
  const double kinetic = 0.5 * (p.m1 + p.m2) * xd * xd +
                         0.5 * p.m2 * p.l * xd * td * std::cos(th) +
                         p.m2 * p.l * p.l * td * td / 6.0;
  const double potential = -0.5 * p.m2 * p.gravity * p.l * std::cos(th);
  return kinetic + potential;
}

CartPoleParams cartpole_apply_overrides(
    const CartPoleParams& p, const std::map<std::string, double>& overrides) {
  auto o = overrides;
  CartPoleParams q = p;
  q.m1 *= take_override(o, "m1_scale", 1.0);
  q.m2 *= take_override(o, "m2_scale", 1.0);
  q.l *= take_override(o, "l_scale", 1.0);
  q.b *= take_override(o, "b_scale", 1.0);
  reject_unknown(o, "cartpole");
  return q;
}

ControlAffineModel make_cartpole_model(const CartPoleParams& p) {
  ControlAffineModel model;
  model.n = 4;
  model.m = 1;
  model.f_eval = [p](const Vector& x) { return cartpole_f(p, x); };
  model.g_eval = [p](const Vector& x) { return cartpole_g(p, x); };
  model.input_lower = Vector::Constant(1, -p.input_limit);
  model.input_upper = Vector::Constant(1, p.input_limit);
  model.state_set_bound = 15.0;
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Pendubot
// ---------------------------------------------------------------------------

Matrix pendubot_mass_matrix(const PendubotParams& p, double q2) {
  const double c2 = std::cos(q2);
  Matrix d(2, 2);
  d(0, 0) = p.theta1 + p.theta2 + 2.0 * p.theta3 * c2;
  d(0, 1) = p.theta2 + p.theta3 * c2;
  d(1, 0) = d(0, 1);
  d(1, 1) = p.theta2;
  return d;
}

Matrix pendubot_coriolis(const PendubotParams& p, const Vector& x) {
  require_state_dim(x, 4, "pendubot");
  const double s2 = std::sin(x(1));
  const double q1d = x(2);
  const double q2d = x(3);
  Matrix c(2, 2);
  c(0, 0) = -p.theta3 * s2 * q2d;
  c(0, 1) = -p.theta3 * s2 * q2d - p.theta3 * s2 * q1d;
  c(1, 0) = p.theta3 * s2 * q1d;
  c(1, 1) = 0.0;
  return c;
}

Vector pendubot_gravity_vector(const PendubotParams& p, const Vector& x) {
  require_state_dim(x, 4, "pendubot");
  Vector g(2);
  g(0) = p.theta4 * p.gravity * std::cos(x(0)) +
         p.theta5 * p.gravity * std::cos(x(0) + x(1));
  g(1) = p.theta5 * p.gravity * std::cos(x(0) + x(1));
  return g;
}

namespace {

// D qdd = rhs solved by the closed-form 2x2 inverse.
Vector pendubot_solve(const PendubotParams& p, double q2, const Vector& rhs) {
  Matrix d = pendubot_mass_matrix(p, q2);
  const double det = d(0, 0) * d(1, 1) - d(0, 1) * d(1, 0);
  Vector qdd(2);
  qdd(0) = (d(1, 1) * rhs(0) - d(0, 1) * rhs(1)) / det;
  qdd(1) = (-d(1, 0) * rhs(0) + d(0, 0) * rhs(1)) / det;
  return qdd;
}

}  // namespace

Vector pendubot_f(const PendubotParams& p, const Vector& x) {
  require_state_dim(x, 4, "pendubot");
  Vector qd = x.tail(2);
  Vector rhs = -(pendubot_coriolis(p, x) * qd) - pendubot_gravity_vector(p, x);
  Vector qdd = pendubot_solve(p, x(1), rhs);
  Vector dx(4);
  dx.head(2) = qd;
  dx.tail(2) = qdd;
  return dx;
}

Matrix pendubot_g(const PendubotParams& p, const Vector& x) {
  require_state_dim(x, 4, "pendubot");
  Vector tau(2);
  tau << 1.0, 0.0;
  Vector col = pendubot_solve(p, x(1), tau);
  Matrix g = Matrix::Zero(4, 1);
  g(2, 0) = col(0);
  g(3, 0) = col(1);
  return g;
}

Vector pendubot_derivative(const PendubotParams& p, const Vector& x,
                           double u) {
  return pendubot_f(p, x) + pendubot_g(p, x) * Vector::Constant(1, u);
}

double pendubot_reward(const Vector& x) {
  require_state_dim(x, 4, "pendubot");
  return -3.0 * (std::abs(std::sin(x(0))) + std::abs(std::cos(x(0)) - 1.0) +
                 std::abs(std::sin(x(1))) + std::abs(std::cos(x(1)) - 1.0));
}

double pendubot_reward_min() { return -6.0 * (1.0 + std::sqrt(2.0)); }

Vector pendubot_upright_state() {
  Vector x(4);
  x << kPi / 2.0, 0.0, 0.0, 0.0;
  return x;
}

PendubotParams pendubot_apply_overrides(
    const PendubotParams& p, const std::map<std::string, double>& overrides) {
  auto o = overrides;
  PendubotParams q = p;
  const double s1 = take_override(o, "m1_scale", 1.0);
  const double s2 = take_override(o, "m2_scale", 1.0);
  q.m1 *= s1;
  q.theta1 *= s1;
  q.theta4 *= s1;
  q.m2 *= s2;
  q.theta2 *= s2;
  q.theta3 *= s2;
  q.theta5 *= s2;
  reject_unknown(o, "pendubot");
  return q;
}

ControlAffineModel make_pendubot_model(const PendubotParams& p) {
  ControlAffineModel model;
  model.n = 4;
  model.m = 1;
  model.f_eval = [p](const Vector& x) { return pendubot_f(p, x); };
  model.g_eval = [p](const Vector& x) { return pendubot_g(p, x); };
  model.input_lower = Vector::Constant(1, -p.input_limit);
  model.input_upper = Vector::Constant(1, p.input_limit);
  model.state_set_bound = 40.0;
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Quadrotor
// ---------------------------------------------------------------------------

Eigen::Matrix4d QuadrotorParams::default_mixing() {
  Eigen::Matrix4d mix;
  mix << 1.0, 1.0, 1.0, 1.0,   // f_z
      0.0, 1.0, 0.0, -1.0,     // tau_phi
      -1.0, 0.0, 1.0, 0.0,     // tau_theta
      1.0, -1.0, 1.0, -1.0;    // tau_psi
  return mix;
}

Eigen::Matrix4d quadrotor_input_map(const QuadrotorParams& p) {
  return p.mixing * p.prop_coeffs.asDiagonal() * p.mixing.inverse();
}

Vector quadrotor_f(const QuadrotorParams& p, const Vector& x) {
  require_state_dim(x, 12, "quadrotor");
  const double phid = x(9);
  const double thetad = x(10);
  const double psid = x(11);
  Vector dx = Vector::Zero(12);
  dx.segment(0, 3) = x.segment(3, 3);
  dx(5) = -p.gravity;
  dx.segment(6, 3) = x.segment(9, 3);
  dx(9) = thetad * psid * (p.inertia(1) - p.inertia(2)) / p.inertia(0);
  dx(10) = phid * psid * (p.inertia(2) - p.inertia(0)) / p.inertia(1);
  dx(11) = phid * thetad * (p.inertia(0) - p.inertia(1)) / p.inertia(2);
  return dx;
}

Matrix quadrotor_g(const QuadrotorParams& p, const Vector& x) {
  require_state_dim(x, 12, "quadrotor");
  const double cphi = std::cos(x(6)), sphi = std::sin(x(6));
  const double cth = std::cos(x(7)), sth = std::sin(x(7));
  const double cpsi = std::cos(x(8)), spsi = std::sin(x(8));
  Matrix base = Matrix::Zero(12, 4);
  base(3, 0) = (cphi * sth * cpsi + sphi * spsi) / p.mass;
  base(4, 0) = (cphi * sth * spsi - sphi * cpsi) / p.mass;
  base(5, 0) = cphi * cth / p.mass;
  base(9, 1) = 1.0 / p.inertia(0);
  base(10, 2) = 1.0 / p.inertia(1);
  base(11, 3) = 1.0 / p.inertia(2);
  return base * quadrotor_input_map(p);
}

Vector quadrotor_derivative(const QuadrotorParams& p, const Vector& x,
                            const Vector& u) {
  if (u.size() != 4) throw ConfigError("quadrotor expects a 4-input");
  return quadrotor_f(p, x) + quadrotor_g(p, x) * u;
}

double quadrotor_hover_thrust(const QuadrotorParams& p) {
  return p.mass * p.gravity;
}

QuadrotorParams quadrotor_apply_overrides(
    const QuadrotorParams& p, const std::map<std::string, double>& overrides) {
  auto o = overrides;
  QuadrotorParams q = p;
  q.mass *= take_override(o, "mass_scale", 1.0);
  q.inertia *= take_override(o, "inertia_scale", 1.0);
  for (int i = 0; i < 4; ++i) {
    const std::string key = "c_p" + std::to_string(i + 1);
    q.prop_coeffs(i) = take_override(o, key, q.prop_coeffs(i));
  }
  reject_unknown(o, "quadrotor");
  return q;
}

ControlAffineModel make_quadrotor_model(const QuadrotorParams& p) {
  ControlAffineModel model;
  model.n = 12;
  model.m = 4;
  model.f_eval = [p](const Vector& x) { return quadrotor_f(p, x); };
  model.g_eval = [p](const Vector& x) { return quadrotor_g(p, x); };
  model.input_lower = Vector(4);
  model.input_upper = Vector(4);
  model.input_lower << 0.0, -p.torque_max, -p.torque_max, -p.torque_max;
  model.input_upper << p.thrust_max, p.torque_max, p.torque_max, p.torque_max;
  model.state_set_bound = 30.0;
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Adaptive cruise control
// ---------------------------------------------------------------------------

double acc_rolling_resistance(const ACCParams& p, double v) {
  return p.f0 + p.f1 * v + p.f2 * v * v;
}

double acc_road_disturbance(const ACCParams& p, double t) {
  return 0.2 * p.gravity * std::sin(2.0 * kPi * t / 10.0);
}

Vector acc_derivative(const ACCParams& p, double t, const Vector& x,
                      double u) {
  require_state_dim(x, 3, "acc");
  Vector dx(3);
  dx(0) = p.a_l;
  dx(1) = u / p.m - acc_rolling_resistance(p, x(1)) / p.m +
          acc_road_disturbance(p, t);
  dx(2) = x(0) - x(1);
  return dx;
}

Vector acc_true_delta(const ACCParams& p, double t, const Vector& x) {
  require_state_dim(x, 3, "acc");
  Vector d = Vector::Zero(3);
  d(1) = -acc_rolling_resistance(p, x(1)) / p.m + acc_road_disturbance(p, t);
  return d;
}

ControlAffineModel make_acc_nominal_model(const ACCParams& p) {
  ControlAffineModel model;
  model.n = 3;
  model.m = 1;
  model.f_eval = [p](const Vector& x) {
    require_state_dim(x, 3, "acc");
    Vector f(3);
    f << p.a_l, 0.0, x(0) - x(1);
    return f;
  };
  model.g_eval = [p](const Vector& x) {
    require_state_dim(x, 3, "acc");
    Matrix g = Matrix::Zero(3, 1);
    g(1, 0) = 1.0 / p.m;
    return g;
  };
  model.input_lower = Vector::Constant(1, -p.u_max());
  model.input_upper = Vector::Constant(1, p.u_max());
  model.state_set_bound = 165.0;
  model.validate();
  return model;
}

DisturbanceFn make_acc_disturbance(const ACCParams& p) {
  return [p](double t, const Vector& x) { return acc_true_delta(p, t, x); };
}

// ---------------------------------------------------------------------------
// Scalar integrator
// ---------------------------------------------------------------------------

ControlAffineModel make_scalar_integrator_model() {
  ControlAffineModel model;
  model.n = 1;
  model.m = 1;
  model.f_eval = [](const Vector&) { return Vector::Zero(1); };
  model.g_eval = [](const Vector&) { return Matrix::Identity(1, 1); };
  model.input_lower = Vector::Constant(1, -1e9);
  model.input_upper = Vector::Constant(1, 1e9);
  model.state_set_bound = 10.0;
  model.validate();
  return model;
}

}  // namespace l1aug
