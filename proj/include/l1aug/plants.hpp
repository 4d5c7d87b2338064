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

#ifndef L1AUG_PLANTS_HPP
#define L1AUG_PLANTS_HPP

#include <map>
#include <string>

#include "l1aug/dynamics.hpp"
#include "l1aug/types.hpp"

namespace l1aug {

// ---------------------------------------------------------------------------
// Cart-pole. State [x, xdot, thetadot, theta], theta anticlockwise from the
// hanging position (upright is theta = pi). Input is the horizontal force on
// the cart in N. The pole is a uniform rod of length l.
// ---------------------------------------------------------------------------
struct CartPoleParams {
  double m1 = 0.5;       // cart mass, kg
  double m2 = 0.5;       // pole mass, kg
  double l = 0.6;        // pole length, m
  double b = 0.1;        // cart friction, N/(m/s)
  double gravity = 9.82;  // m/s^2
  double input_limit = 20.0;  // |u| bound used by the model box, N
};

Vector cartpole_f(const CartPoleParams& p, const Vector& x);
Matrix cartpole_g(const CartPoleParams& p, const Vector& x);
Vector cartpole_derivative(const CartPoleParams& p, const Vector& x, double u);
// Total mechanical energy (kinetic + potential of the rod about the pivot);
// conserved when b = 0 and u = 0.
double cartpole_energy(const CartPoleParams& p, const Vector& x);
CartPoleParams cartpole_apply_overrides(
    const CartPoleParams& p, const std::map<std::string, double>& overrides);
ControlAffineModel make_cartpole_model(const CartPoleParams& p);

// ---------------------------------------------------------------------------
// Pendubot: two-link arm actuated at the shoulder only. State
// [q1, q2, q1dot, q2dot]; q1 is measured anticlockwise from the positive
// x axis, q2 is the relative elbow angle. Input is the shoulder torque in Nm.
// Dynamics use the published lumped parameters theta1..theta5.
// ---------------------------------------------------------------------------
struct PendubotParams {
  double theta1 = 3.48e-3;
  double theta2 = 1.20e-3;
  double theta3 = 1.07e-3;
  double theta4 = 933.4e-3;
  double theta5 = 280.4e-3;
  double m1 = 0.12;  // link masses, kg (handles for mass perturbations)
  double m2 = 0.11;
  double gravity = 9.81;
  double input_limit = 4.0;  // Nm
};

Matrix pendubot_mass_matrix(const PendubotParams& p, double q2);
Matrix pendubot_coriolis(const PendubotParams& p, const Vector& x);
Vector pendubot_gravity_vector(const PendubotParams& p, const Vector& x);
Vector pendubot_f(const PendubotParams& p, const Vector& x);
Matrix pendubot_g(const PendubotParams& p, const Vector& x);
Vector pendubot_derivative(const PendubotParams& p, const Vector& x, double u);
// Dense shaping reward, 0 at [q1, q2] = [0, 0] (mod 2pi), minimum -6(1+sqrt2).
double pendubot_reward(const Vector& x);
double pendubot_reward_min();
// Torque-free upright configuration [pi/2, 0, 0, 0].
Vector pendubot_upright_state();
// Mass scale factors map onto the lumped parameters assuming fixed geometry:
// m1_scale multiplies theta1 and theta4, m2_scale multiplies theta2, theta3
// and theta5 (the m2*l1^2 cross term in theta1 is negligible here: the
// implied l1 = theta3/theta5 is about 3.8 mm).
PendubotParams pendubot_apply_overrides(
    const PendubotParams& p, const std::map<std::string, double>& overrides);
ControlAffineModel make_pendubot_model(const PendubotParams& p);

// ---------------------------------------------------------------------------
// Quadrotor with Euler-angle attitude. State
// [x, y, z, xdot, ydot, zdot, phi, theta, psi, phidot, thetadot, psidot].
// Wrench input [f_z, tau_phi, tau_theta, tau_psi]; motor mixing with
// per-propeller efficiency coefficients is applied inside the dynamics:
// u_eff = Mix * diag(prop_coeffs) * Mix^-1 * u.
// ---------------------------------------------------------------------------
struct QuadrotorParams {
  double mass = 4.34;  // kg
  Eigen::Vector3d inertia{0.082, 0.0845, 0.1377};  // Ixx, Iyy, Izz
  double gravity = 9.81;
  Eigen::Vector4d prop_coeffs{1.0, 1.0, 1.0, 1.0};
  Eigen::Matrix4d mixing = default_mixing();
  double thrust_max = 260.0;  // N, upper box bound on f_z
  double torque_max = 10.0;   // Nm, symmetric box bound on each torque

  // Plus configuration, unit arm length and unit yaw-drag coefficient:
  // rows map motor thrusts [F1..F4] to [f_z, tau_phi, tau_theta, tau_psi].
  static Eigen::Matrix4d default_mixing();
};

Eigen::Matrix4d quadrotor_input_map(const QuadrotorParams& p);
Vector quadrotor_f(const QuadrotorParams& p, const Vector& x);
Matrix quadrotor_g(const QuadrotorParams& p, const Vector& x);
Vector quadrotor_derivative(const QuadrotorParams& p, const Vector& x,
                            const Vector& u);
double quadrotor_hover_thrust(const QuadrotorParams& p);
QuadrotorParams quadrotor_apply_overrides(
    const QuadrotorParams& p, const std::map<std::string, double>& overrides);
ControlAffineModel make_quadrotor_model(const QuadrotorParams& p);

// ---------------------------------------------------------------------------
// Adaptive cruise control, longitudinal. State [v_l, v_f, D]: lead speed,
// follower speed, gap. Input is the wheel force in N. The nominal model is
// the double-integrator chain without resistance; rolling resistance and the
// sinusoidal road disturbance delta(t) enter only the true dynamics.
// ---------------------------------------------------------------------------
struct ACCParams {
  double m = 1650.0;    // vehicle mass, kg
  double gravity = 9.81;
  double f0 = 0.1;      // rolling resistance F_r = f0 + f1 v + f2 v^2
  double f1 = 5.0;
  double f2 = 0.25;
  double v_d = 22.0;    // desired speed, m/s
  double tau_d = 1.8;   // desired time headway, s
  double a_l = 0.0;     // lead acceleration, m/s^2
  double u_max() const { return 0.4 * m * gravity; }
};

double acc_rolling_resistance(const ACCParams& p, double v);
// delta(t) = 0.2 g sin(2 pi t / 10).
double acc_road_disturbance(const ACCParams& p, double t);
// True dynamics including resistance and delta(t).
Vector acc_derivative(const ACCParams& p, double t, const Vector& x, double u);
// [0, -F_r(v_f)/m + delta(t), 0], the model error of the nominal chain.
Vector acc_true_delta(const ACCParams& p, double t, const Vector& x);
ControlAffineModel make_acc_nominal_model(const ACCParams& p);
DisturbanceFn make_acc_disturbance(const ACCParams& p);

// ---------------------------------------------------------------------------
// Scalar integrator xdot = u, the minimal testbed for the adaptation loop.
// ---------------------------------------------------------------------------
ControlAffineModel make_scalar_integrator_model();

}  // namespace l1aug

#endif  // L1AUG_PLANTS_HPP
