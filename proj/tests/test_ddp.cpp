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

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <random>

#include "l1aug/ddp.hpp"

using namespace l1aug;

namespace {

OCProblem linear_problem(const Matrix& a, const Matrix& b,
                         const Vector& p_stage, const Vector& p_final,
                         const Vector& q_input, const Vector& x0,
                         int horizon) {
  OCProblem prob;
  prob.n = static_cast<int>(a.rows());
  prob.m = static_cast<int>(b.cols());
  prob.horizon_n = horizon;
  prob.dt = 0.1;
  prob.discrete_dynamics = [a, b](int, const Vector& x, const Vector& u) {
    return Vector(a * x + b * u);
  };
  prob.x_start = x0;
  prob.x_target = Vector::Zero(prob.n);
  prob.p_stage = p_stage;
  prob.p_final = p_final;
  prob.q_input = q_input;
  return prob;
}

OCProblem double_integrator_reach() {
  const double dt = 0.05;
  OCProblem prob;
  prob.n = 2;
  prob.m = 1;
  prob.horizon_n = 40;
  prob.dt = dt;
  prob.discrete_dynamics = discretize_rk4(
      [](double, const Vector& x, const Vector& u) {
        Vector dx(2);
        dx << x(1), u(0);
        return dx;
      },
      dt);
  prob.x_start = Vector::Zero(2);
  prob.x_target = Vector(2);
  prob.x_target << 1.0, 0.0;
  prob.p_stage = Vector::Zero(2);
  prob.p_final = Vector::Constant(2, 1e6);
  prob.q_input = Vector::Constant(1, 1.0);
  return prob;
}

std::vector<Vector> zero_inputs(int horizon, int m) {
  return std::vector<Vector>(horizon, Vector::Zero(m));
}

}  // namespace

TEST_CASE("finite differences recover the double integrator jacobians") {
  auto prob = double_integrator_reach();
  Vector x(2), u(1);
  x << 0.3, -1.2;
  u << 0.7;
  Matrix a, b;
  numeric_step_jacobians(prob.discrete_dynamics, 0, x, u, a, b);
  Matrix a_true(2, 2), b_true(2, 1);
  const double dt = prob.dt;
  a_true << 1.0, dt, 0.0, 1.0;
  b_true << 0.5 * dt * dt, dt;
  CHECK((a - a_true).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK((b - b_true).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("linear quadratic gains match the value recursion") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const int n = 3, m = 2, horizon = 30;

  Matrix a(n, n), b(n, m);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) a(r, c) = dist(rng);
    for (int c = 0; c < m; ++c) b(r, c) = dist(rng);
  }
  const double rho = Eigen::EigenSolver<Matrix>(a).eigenvalues()
                         .cwiseAbs()
                         .maxCoeff();
  a *= 0.9 / rho;

  Vector p_stage(n), p_final(n), q_input(m), x0(n);
  for (int i = 0; i < n; ++i) {
    p_stage(i) = 0.5 + std::abs(dist(rng));
    p_final(i) = 0.5 + std::abs(dist(rng));
    x0(i) = dist(rng);
  }
  for (int i = 0; i < m; ++i) q_input(i) = 0.5 + std::abs(dist(rng));

  OCProblem prob = linear_problem(a, b, p_stage, p_final, q_input, x0,
                                  horizon);
  DDPSolution sol = solve_ddp(prob, zero_inputs(horizon, m));
  CHECK(sol.converged);
  CHECK(sol.iterations == 1);

  // Independent finite-horizon value recursion with the exact matrices.
  std::vector<Matrix> k_ref(horizon);
  Matrix p = Matrix(p_final.asDiagonal());
  for (int k = horizon - 1; k >= 0; --k) {
    Matrix h = Matrix(q_input.asDiagonal()) + b.transpose() * p * b;
    k_ref[k] = h.ldlt().solve(b.transpose() * p * a);
    p = Matrix(p_stage.asDiagonal()) +
        a.transpose() * p * (a - b * k_ref[k]);
  }
  double worst = 0.0;
  for (int k = 0; k < horizon; ++k) {
    worst = std::max(
        worst, (sol.gains[k] + k_ref[k]).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("input-only cost makes the update cancel the nominal input") {
  const int horizon = 5;
  Matrix a = Matrix::Identity(2, 2);
  Matrix b(2, 1);
  b << 0.0, 1.0;
  OCProblem prob = linear_problem(a, b, Vector::Zero(2), Vector::Zero(2),
                                  Vector::Constant(1, 1.0),
                                  Vector::Constant(2, 0.5), horizon);
  std::vector<Vector> us(horizon, Vector::Constant(1, 0.8));
  std::vector<Vector> xs(horizon + 1);
  xs[0] = prob.x_start;
  for (int k = 0; k < horizon; ++k) {
    xs[k + 1] = prob.discrete_dynamics(k, xs[k], us[k]);
  }
  auto bp = ddp_backward_pass(prob, xs, us, 0.0);
  REQUIRE(bp.has_value());
  for (int k = 0; k < horizon; ++k) {
    CHECK(bp->gains[k].lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((bp->ff[k] + us[k]).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("one-step scalar problem solves by hand") {
  OCProblem prob;
  prob.n = 1;
  prob.m = 1;
  prob.horizon_n = 1;
  prob.dt = 1.0;
  prob.discrete_dynamics = [](int, const Vector& x, const Vector& u) {
    return Vector(x + u);
  };
  prob.x_start = Vector::Constant(1, 1.0);
  prob.x_target = Vector::Zero(1);
  prob.p_stage = Vector::Zero(1);
  prob.p_final = Vector::Constant(1, 1.0);
  prob.q_input = Vector::Constant(1, 1.0);

  std::vector<Vector> us = zero_inputs(1, 1);
  std::vector<Vector> xs = {prob.x_start,
                            prob.discrete_dynamics(0, prob.x_start, us[0])};
  auto bp = ddp_backward_pass(prob, xs, us, 0.0);
  REQUIRE(bp.has_value());
  // minimize (x + u)^2 + u^2 at x = 1: u* = -x/2, du*/dx = -1/2
  CHECK(bp->ff[0](0) == doctest::Approx(-0.5).epsilon(1e-8));
  CHECK(bp->gains[0](0, 0) == doctest::Approx(-0.5).epsilon(1e-8));

  DDPSolution sol = solve_ddp(prob, us);
  CHECK(sol.converged);
  CHECK(sol.u_nominal[0](0) == doctest::Approx(-0.5).epsilon(1e-8));
  CHECK(sol.cost == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("zero step size reproduces the nominal rollout bit for bit") {
  OCProblem prob = double_integrator_reach();
  DDPSolution nominal;
  nominal.n = prob.n;
  nominal.m = prob.m;
  nominal.dt = prob.dt;
  nominal.u_nominal = zero_inputs(prob.horizon_n, prob.m);
  nominal.x_nominal.resize(prob.horizon_n + 1);
  nominal.x_nominal[0] = prob.x_start;
  for (int k = 0; k < prob.horizon_n; ++k) {
    nominal.x_nominal[k + 1] =
        prob.discrete_dynamics(k, nominal.x_nominal[k], nominal.u_nominal[k]);
  }
  nominal.cost =
      trajectory_cost(prob, nominal.x_nominal, nominal.u_nominal);

  auto bp = ddp_backward_pass(prob, nominal.x_nominal, nominal.u_nominal,
                              0.0);
  REQUIRE(bp.has_value());
  ForwardPassResult fwd = ddp_forward_pass(prob, nominal, *bp, 0.0);
  REQUIRE(fwd.finite);
  CHECK(fwd.cost == nominal.cost);
  for (int k = 0; k <= prob.horizon_n; ++k) {
    CHECK((fwd.x[k] - nominal.x_nominal[k]).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("solved double integrator reaches the target") {
  OCProblem prob = double_integrator_reach();
  DDPSolution sol = solve_ddp(prob, zero_inputs(prob.horizon_n, prob.m));
  CHECK(sol.converged);
  CHECK(std::abs(sol.x_nominal.back()(0) - 1.0) < 1e-4);
  CHECK(std::abs(sol.x_nominal.back()(1)) < 1e-4);

  SUBCASE("cost is monotone in the accepted pass count") {
    double previous = trajectory_cost(prob, sol.x_nominal, sol.u_nominal);
    previous = std::numeric_limits<double>::infinity();
    for (int iters = 1; iters <= 5; ++iters) {
      DDPOptions opts;
      opts.max_iterations = iters;
      DDPSolution partial =
          solve_ddp(prob, zero_inputs(prob.horizon_n, prob.m), opts);
      CHECK(partial.cost <= previous * (1.0 + 1e-12));
      previous = partial.cost;
    }
  }

  SUBCASE("converged point is a fixed point of further passes") {
    auto bp = ddp_backward_pass(prob, sol.x_nominal, sol.u_nominal, 0.0);
    REQUIRE(bp.has_value());
    ForwardPassResult again = ddp_forward_pass(prob, sol, *bp, 1.0);
    REQUIRE(again.finite);
    CHECK(std::abs(again.cost - sol.cost) < 1e-10);
  }

  SUBCASE("stored nominal re-rolls onto itself") {
    Vector x = sol.x_nominal[0];
    double worst = 0.0;
    for (int k = 0; k < prob.horizon_n; ++k) {
      x = prob.discrete_dynamics(k, x, sol.u_nominal[k]);
      worst = std::max(
          worst, (x - sol.x_nominal[k + 1]).lpNorm<Eigen::Infinity>());
    }
    CHECK(worst < 1e-8);
  }

  SUBCASE("policy execution") {
    Policy pol = ddp_policy(sol);
    // On the nominal trajectory the policy replays the nominal input.
    Vector u0 = pol.eval(0.0, sol.x_nominal[0]);
    CHECK((u0 - sol.u_nominal[0]).lpNorm<Eigen::Infinity>() < 1e-12);
    Vector u7 = pol.eval(7 * prob.dt, sol.x_nominal[7]);
    CHECK((u7 - sol.u_nominal[7]).lpNorm<Eigen::Infinity>() < 1e-12);
    // Past the horizon the final stage stays in effect.
    Vector u_end = pol.eval(100.0, sol.x_nominal[prob.horizon_n - 1]);
    CHECK((u_end - sol.u_nominal[prob.horizon_n - 1])
              .lpNorm<Eigen::Infinity>() < 1e-12);

    // Applying the policy to the plant it was solved on reproduces the plan.
    Vector x = sol.x_nominal[0];
    double worst = 0.0;
    for (int k = 0; k < prob.horizon_n; ++k) {
      Vector u = pol.eval(k * prob.dt, x);
      x = prob.discrete_dynamics(k, x, u);
      worst = std::max(
          worst, (x - sol.x_nominal[k + 1]).lpNorm<Eigen::Infinity>());
    }
    CHECK(worst < 1e-6);

    // Feedback rejects a start offset better than replaying the inputs.
    Vector x_fb = sol.x_nominal[0], x_ol = sol.x_nominal[0];
    x_fb(0) += 0.05;
    x_ol(0) += 0.05;
    for (int k = 0; k < prob.horizon_n; ++k) {
      x_fb = prob.discrete_dynamics(k, x_fb, pol.eval(k * prob.dt, x_fb));
      x_ol = prob.discrete_dynamics(k, x_ol, sol.u_nominal[k]);
    }
    const double dev_fb = (x_fb - sol.x_nominal.back()).norm();
    const double dev_ol = (x_ol - sol.x_nominal.back()).norm();
    CHECK(dev_fb < dev_ol);
  }
}

TEST_CASE("solution file round trip") {
  OCProblem prob = double_integrator_reach();
  DDPSolution sol = solve_ddp(prob, zero_inputs(prob.horizon_n, prob.m));
  const std::string path = "test_ddp_solution.json";
  save_ddp_solution(sol, path);
  DDPSolution back = load_ddp_solution(path);
  std::remove(path.c_str());

  CHECK(back.n == sol.n);
  CHECK(back.m == sol.m);
  CHECK(back.dt == sol.dt);
  CHECK(back.cost == sol.cost);
  CHECK(back.iterations == sol.iterations);
  CHECK(back.converged == sol.converged);
  REQUIRE(back.x_nominal.size() == sol.x_nominal.size());
  REQUIRE(back.gains.size() == sol.gains.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < sol.u_nominal.size(); ++k) {
    worst = std::max(worst,
                     (back.u_nominal[k] - sol.u_nominal[k]).norm());
    worst = std::max(worst, (back.gains[k] - sol.gains[k]).norm());
    worst = std::max(worst,
                     (back.x_nominal[k] - sol.x_nominal[k]).norm());
  }
  CHECK(worst == 0.0);

  CHECK_THROWS_AS(load_ddp_solution("no_such_file.json"), LoadError);
}

TEST_CASE("problem validation rejects malformed setups") {
  OCProblem prob = double_integrator_reach();
  SUBCASE("missing dynamics") {
    prob.discrete_dynamics = nullptr;
    CHECK_THROWS_AS(prob.validate(), ConfigError);
  }
  SUBCASE("nonpositive input weight") {
    prob.q_input(0) = 0.0;
    CHECK_THROWS_AS(prob.validate(), ConfigError);
  }
  SUBCASE("negative state weight") {
    prob.p_stage(0) = -1.0;
    CHECK_THROWS_AS(prob.validate(), ConfigError);
  }
  SUBCASE("wrong u_init length") {
    CHECK_THROWS_AS(solve_ddp(prob, zero_inputs(3, 1)), ConfigError);
  }
  SUBCASE("explosive rollout reports a solver error") {
    prob.discrete_dynamics = [](int, const Vector& x, const Vector&) {
      return Vector(1e80 * x);
    };
    prob.x_start = Vector::Constant(2, 1.0);
    CHECK_THROWS_AS(solve_ddp(prob, zero_inputs(prob.horizon_n, 1)),
                    SolverError);
  }
}

TEST_CASE("quadrotor point-to-point mission") {
  OCProblem prob = make_quadrotor_reach_problem(QuadrotorParams{});
  std::vector<Vector> u_init(prob.horizon_n, prob.u_reference);
  DDPSolution sol = solve_ddp(prob, u_init);
  CHECK(sol.converged);

  const Vector final_pos = sol.x_nominal.back().head(3);
  Vector target(3);
  target << 4.0, 4.0, 2.0;
  CHECK((final_pos - target).norm() < 0.1);

  // Stored nominal is the rollout of the stored inputs.
  Vector x = sol.x_nominal[0];
  double worst = 0.0;
  for (int k = 0; k < prob.horizon_n; ++k) {
    x = prob.discrete_dynamics(k, x, sol.u_nominal[k]);
    worst = std::max(worst,
                     (x - sol.x_nominal[k + 1]).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst < 1e-8);
}
