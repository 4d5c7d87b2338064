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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "l1aug/integrator.hpp"
#include "l1aug/plants.hpp"
#include "l1aug/sim.hpp"

using namespace l1aug;

namespace {

Policy zero_policy(int m) {
  Policy p;
  p.eval = [m](double, const Vector&) { return Vector::Zero(m); };
  return p;
}

// Scalar plant with a constant additive disturbance sigma_c.
EpisodeSetup scalar_setup(const ControlAffineModel& model, double sigma_c,
                          bool with_l1) {
  EpisodeSetup s;
  s.nominal = &model;
  s.true_derivative = [sigma_c](double, const Vector&, const Vector& u) {
    return Vector::Constant(1, u(0) + sigma_c);
  };
  s.policy = zero_policy(1);
  if (with_l1) s.l1 = make_l1_params(10.0, 0.01, 200.0, 1);
  s.x0 = Vector::Zero(1);
  s.sim.t_ctrl = 0.01;
  s.sim.duration = 2.0;
  return s;
}

}  // namespace

TEST_CASE("rk4 matches the exponential to fourth order") {
  auto fn = [](double, const Vector& y) { return Vector(-y); };
  Vector y = Vector::Constant(1, 1.0);
  y = rk4_step(fn, 0.0, y, 0.1);
  CHECK(std::abs(y(0) - std::exp(-0.1)) < 1e-7);
}

TEST_CASE("rk4 integrates a cubic in time exactly") {
  auto fn = [](double t, const Vector&) {
    return Vector::Constant(1, 3.0 * t * t);
  };
  Vector y = Vector::Zero(1);
  y = rk4_step(fn, 0.0, y, 0.3);
  CHECK(y(0) == doctest::Approx(0.027).epsilon(1e-15));
}

TEST_CASE("config fills defaults and enforces nesting") {
  SUBCASE("defaults") {
    SimConfig c;
    c.t_ctrl = 0.02;
    c.duration = 1.0;
    c.finalize();
    CHECK(c.t_adapt == 0.02);
    CHECK(c.dt_int == doctest::Approx(2e-4).epsilon(1e-12));
  }
  SUBCASE("adaptation faster than control is kept") {
    SimConfig c;
    c.t_ctrl = 0.05;
    c.t_adapt = 0.001;
    c.duration = 1.0;
    c.finalize();
    CHECK(c.t_adapt == 0.001);
    CHECK(c.dt_int == doctest::Approx(2e-4).epsilon(1e-12));
  }
  SUBCASE("rejections") {
    SimConfig c;
    CHECK_THROWS_AS(c.finalize(), ConfigError);  // t_ctrl unset
    c.t_ctrl = 0.01;
    CHECK_THROWS_AS(c.finalize(), ConfigError);  // duration unset
    c.duration = 1.0;
    c.t_adapt = 0.02;  // slower than control
    CHECK_THROWS_AS(c.finalize(), ConfigError);
    c.t_adapt = 0.004;  // not a divisor of t_ctrl
    CHECK_THROWS_AS(c.finalize(), ConfigError);
    c.t_adapt = 0.005;
    c.dt_int = 0.002;  // not a divisor of t_adapt
    CHECK_THROWS_AS(c.finalize(), ConfigError);
    c.dt_int = 0.001;
    c.duration = 1.0005;  // not a whole number of steps
    CHECK_THROWS_AS(c.finalize(), ConfigError);
  }
}

TEST_CASE("row count is one per adaptation boundary plus the endpoint") {
  auto model = make_scalar_integrator_model();
  auto s = scalar_setup(model, 0.0, true);
  s.sim.duration = 0.5;
  Trajectory traj = run_episode(s);
  CHECK(traj.rows() == 51);
  CHECK(traj.times.front() == 0.0);
  CHECK(traj.times.back() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("augmentation stays silent when the model is exact") {
  auto model = make_cartpole_model(CartPoleParams{});
  EpisodeSetup s;
  s.nominal = &model;
  s.true_derivative = [&model](double, const Vector& x, const Vector& u) {
    return nominal_derivative(model, x, u);
  };
  s.policy = zero_policy(1);
  s.x0 = Vector::Zero(4);
  s.x0(3) = 0.4;
  s.sim.t_ctrl = 0.01;
  s.sim.duration = 1.0;

  EpisodeSetup with = s;
  with.l1 = make_l1_params(10.0, 0.01, 100.0, 1);
  Trajectory base = run_episode(s);
  Trajectory aug = run_episode(with);

  REQUIRE(base.rows() == aug.rows());
  double worst_state = 0.0, worst_u = 0.0, worst_sig = 0.0;
  for (std::size_t r = 0; r < base.rows(); ++r) {
    worst_state = std::max(
        worst_state,
        (base.states[r] - aug.states[r]).lpNorm<Eigen::Infinity>());
    worst_u = std::max(worst_u, aug.u_l1[r].lpNorm<Eigen::Infinity>());
    worst_sig =
        std::max(worst_sig, aug.sigma_hat[r].lpNorm<Eigen::Infinity>());
  }
  CHECK(worst_u < 1e-6);
  CHECK(worst_sig < 1e-6);
  CHECK(worst_state < 1e-10);
}

TEST_CASE("constant disturbance pins the estimate at its sampled value") {
  auto model = make_scalar_integrator_model();
  const double sigma_c = 1.0;
  auto s = scalar_setup(model, sigma_c, true);
  Trajectory traj = run_episode(s);
  REQUIRE(traj.rows() == 201);
  CHECK_FALSE(traj.failed);

  const double fixed_point = std::exp(-0.1) * sigma_c;
  // First row predates any prediction error, every later row is converged.
  CHECK(traj.sigma_hat[0](0) == 0.0);
  double worst = 0.0;
  for (std::size_t r = 1; r < traj.rows(); ++r) {
    worst = std::max(worst, std::abs(traj.sigma_hat[r](0) - fixed_point));
  }
  CHECK(worst < 1e-9);
  CHECK(traj.sigma_hat.back()(0) == doctest::Approx(fixed_point).epsilon(1e-6));

  // The recorded model error is the injected constant.
  for (std::size_t r = 0; r < traj.rows(); r += 50) {
    CHECK(traj.sigma_true[r](0) == doctest::Approx(sigma_c).epsilon(1e-12));
  }

  // Compensation leaves only the one-sample-delay drift; without it the
  // state grows linearly with the disturbance.
  auto bare = scalar_setup(model, sigma_c, false);
  Trajectory open = run_episode(bare);
  CHECK(open.states.back()(0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::abs(traj.states.back()(0)) < 0.3);
  CHECK(std::abs(traj.states.back()(0)) < 0.2 * open.states.back()(0));
}

TEST_CASE("episodes are bitwise deterministic") {
  auto model = make_cartpole_model(CartPoleParams{});
  EpisodeSetup s;
  s.nominal = &model;
  PerturbationSpec spec = PerturbationSpec::identity(1);
  spec.d_eval = [](double t, const Vector& x) {
    Vector d = Vector::Zero(4);
    d(1) = 0.5 * std::sin(3.0 * t) + 0.1 * x(0);
    return d;
  };
  s.true_derivative = [&model, spec](double t, const Vector& x,
                                     const Vector& u) {
    return perturbed_derivative(model, spec, t, x, u);
  };
  s.policy = zero_policy(1);
  s.l1 = make_l1_params(10.0, 0.005, 100.0, 1);
  s.x0 = Vector::Zero(4);
  s.x0(3) = 0.3;
  s.sim.t_ctrl = 0.01;
  s.sim.t_adapt = 0.005;
  s.sim.duration = 1.5;

  Trajectory t1 = run_episode(s);
  Trajectory t2 = run_episode(s);
  REQUIRE(t1.rows() == t2.rows());
  for (std::size_t r = 0; r < t1.rows(); ++r) {
    CHECK((t1.states[r] - t2.states[r]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((t1.u_total[r] - t2.u_total[r]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((t1.sigma_hat[r] - t2.sigma_hat[r]).lpNorm<Eigen::Infinity>() ==
          0.0);
  }
}

TEST_CASE("diverging plant marks failure instead of throwing") {
  auto model = make_scalar_integrator_model();
  EpisodeSetup s;
  s.nominal = &model;
  // Unstable beyond the controller's authority.
  s.true_derivative = [](double, const Vector& x, const Vector& u) {
    return Vector::Constant(1, u(0) + 40.0 * x(0) + 1.0);
  };
  s.policy = zero_policy(1);
  s.x0 = Vector::Constant(1, 1.0);
  s.sim.t_ctrl = 0.01;
  s.sim.duration = 5.0;
  s.sim.clamp_inputs = true;
  Trajectory traj = run_episode(s);
  CHECK(traj.failed);
  CHECK(std::isfinite(traj.divergence_time));
  CHECK(traj.divergence_time < 5.0);
}

TEST_CASE("metrics normalize against the worst-case floor") {
  Trajectory traj;
  traj.n = 1;
  traj.m = 1;
  for (int i = 0; i < 10; ++i) {
    traj.times.push_back(0.1 * i);
    traj.reward.push_back(i < 5 ? -2.0 : -1.0);
  }
  // accumulated = -15, floor = -6 * 10 = -60, nominal = -10
  EpisodeMetrics m = episode_metrics(traj, -6.0, -10.0, -1.5);
  CHECK(m.accumulated_reward == doctest::Approx(-15.0));
  CHECK(m.normalized_reward == doctest::Approx(45.0 / 50.0));
  // final window = last 2 rows, mean -1 >= -1.5
  CHECK(m.mean_final_window_reward == doctest::Approx(-1.0));
  CHECK(m.success);

  SUBCASE("failure zeroes everything") {
    traj.failed = true;
    EpisodeMetrics f = episode_metrics(traj, -6.0, -10.0, -1.5);
    CHECK(f.accumulated_reward == 0.0);
    CHECK(f.normalized_reward == 0.0);
    CHECK_FALSE(f.success);
  }
  SUBCASE("degenerate denominator") {
    EpisodeMetrics d = episode_metrics(traj, -1.5, -15.0, -1.5);
    CHECK(d.normalized_reward == 1.0);
  }
}

TEST_CASE("csv schema and value round trip") {
  auto model = make_scalar_integrator_model();
  auto s = scalar_setup(model, 1.0 / 3.0, true);
  s.sim.duration = 0.1;
  s.reward = [](const Vector& x) { return -x(0) * x(0); };
  Trajectory traj = run_episode(s);
  const std::string path = "test_sim_traj.csv";
  write_trajectory_csv(traj, path);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,x0,u_rl0,u_l10,u0,sighat0,sigtrue0,reward");

  // Every stored double must survive the text round trip bit for bit.
  std::string line;
  std::size_t r = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    REQUIRE(vals.size() == 8);
    CHECK(vals[0] == traj.times[r]);
    CHECK(vals[1] == traj.states[r](0));
    CHECK(vals[4] == traj.u_total[r](0));
    CHECK(vals[6] == traj.sigma_true[r](0));
    CHECK(vals[7] == traj.reward[r]);
    ++r;
  }
  CHECK(r == traj.rows());
  std::remove(path.c_str());

  SUBCASE("extra columns extend the header") {
    write_trajectory_csv(traj, path, {"h", "qp_status"},
                         {std::vector<double>(traj.rows(), 1.0),
                          std::vector<double>(traj.rows(), 0.0)});
    std::ifstream in2(path);
    std::string h2;
    std::getline(in2, h2);
    CHECK(h2 == "t,x0,u_rl0,u_l10,u0,sighat0,sigtrue0,reward,h,qp_status");
    std::remove(path.c_str());
  }
}
