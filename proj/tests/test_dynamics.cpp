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

#include <random>

#include "l1aug/dynamics.hpp"
#include "l1aug/plants.hpp"

using namespace l1aug;

namespace {

ControlAffineModel scalar_model() {
  ControlAffineModel m;
  m.n = 1;
  m.m = 1;
  m.f_eval = [](const Vector& x) { return Vector::Zero(x.size()); };
  m.g_eval = [](const Vector&) { return Matrix::Identity(1, 1); };
  m.input_lower = Vector::Constant(1, -1e9);
  m.input_upper = Vector::Constant(1, 1e9);
  m.state_set_bound = 10.0;
  return m;
}

Vector random_vector(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

}  // namespace

TEST_CASE("nominal derivative of the scalar integrator is u") {
  auto m = scalar_model();
  Vector x = Vector::Constant(1, 0.3);
  Vector u = Vector::Constant(1, 2.5);
  CHECK(nominal_derivative(m, x, u)(0) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("perturbed derivative applies lambda and disturbance") {
  auto m = scalar_model();
  PerturbationSpec pert;
  pert.lambda = Matrix::Constant(1, 1, 0.5);
  pert.d_eval = [](double t, const Vector&) {
    return Vector::Constant(1, 0.25 + t);
  };
  pert.validate(1);
  Vector x = Vector::Zero(1);
  Vector u = Vector::Constant(1, 2.0);
  // 0 + 1 * (0.5 * 2) + (0.25 + 1) = 2.25
  CHECK(perturbed_derivative(m, pert, 1.0, x, u)(0) ==
        doctest::Approx(2.25).epsilon(1e-15));
  Vector sig = lumped_sigma(m, pert, 1.0, x, u);
  CHECK(sig(0) == doctest::Approx(-1.0 + 1.25).epsilon(1e-15));
}

TEST_CASE("identity lambda and zero disturbance reproduce the nominal path") {
  auto model = make_pendubot_model(PendubotParams{});
  auto pert = PerturbationSpec::identity(1);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    Vector x = random_vector(rng, 4, -3.0, 3.0);
    Vector u = random_vector(rng, 1, -4.0, 4.0);
    Vector a = perturbed_derivative(model, pert, 0.0, x, u);
    Vector b = nominal_derivative(model, x, u);
    CHECK((a - b).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("lumped disturbance closes the perturbed/nominal identity") {
  struct Case {
    ControlAffineModel model;
    double xlo, xhi, ulo, uhi;
  };
  std::vector<Case> cases;
  cases.push_back({make_cartpole_model(CartPoleParams{}), -3.0, 3.0, -20.0, 20.0});
  cases.push_back({make_pendubot_model(PendubotParams{}), -3.0, 3.0, -4.0, 4.0});
  cases.push_back({make_quadrotor_model(QuadrotorParams{}), -1.0, 1.0, -10.0, 10.0});

  std::mt19937_64 rng(11);
  for (auto& c : cases) {
    PerturbationSpec pert;
    pert.lambda = Matrix::Identity(c.model.m, c.model.m);
    std::uniform_real_distribution<double> ld(-0.1, 0.1);
    for (int i = 0; i < c.model.m; ++i) pert.lambda(i, i) = 0.7 + 0.3 * ld(rng);
    pert.d_eval = [n = c.model.n](double t, const Vector& x) {
      Vector d = Vector::Constant(n, 0.05 * std::sin(t));
      d(n - 1) += 0.01 * x(0);
      return d;
    };
    pert.validate(c.model.m);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      Vector x = random_vector(rng, c.model.n, c.xlo, c.xhi);
      Vector u = random_vector(rng, c.model.m, c.ulo, c.uhi);
      double t = 0.1 * i;
      Vector residual = perturbed_derivative(c.model, pert, t, x, u) -
                        nominal_derivative(c.model, x, u) -
                        lumped_sigma(c.model, pert, t, x, u);
      worst = std::max(worst, residual.lpNorm<Eigen::Infinity>());
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("g_perp is an orthonormal null-space basis at random states") {
  struct Case {
    ControlAffineModel model;
    double lo, hi;
  };
  std::vector<Case> cases;
  cases.push_back({make_cartpole_model(CartPoleParams{}), -3.0, 3.0});
  cases.push_back({make_pendubot_model(PendubotParams{}), -3.0, 3.0});
  cases.push_back({make_quadrotor_model(QuadrotorParams{}), -1.2, 1.2});
  cases.push_back({make_acc_nominal_model(ACCParams{}), 0.0, 50.0});

  std::mt19937_64 rng(13);
  for (auto& c : cases) {
    double worst_orth = 0.0, worst_ortho_normal = 0.0;
    for (int i = 0; i < 1000; ++i) {
      Vector x = random_vector(rng, c.model.n, c.lo, c.hi);
      Matrix g = c.model.g_eval(x);
      Matrix perp = g_perp(g);
      REQUIRE(perp.rows() == c.model.n);
      REQUIRE(perp.cols() == c.model.n - c.model.m);
      worst_orth = std::max(worst_orth, (g.transpose() * perp).norm());
      worst_ortho_normal = std::max(
          worst_ortho_normal,
          (perp.transpose() * perp -
           Matrix::Identity(perp.cols(), perp.cols()))
              .norm());
    }
    CHECK(worst_orth < 1e-10);
    CHECK(worst_ortho_normal < 1e-10);
  }
}

TEST_CASE("g_perp sign convention is deterministic") {
  Matrix g(3, 1);
  g << 0.0, 1.0, 0.0;
  Matrix perp = g_perp(g);
  for (int c = 0; c < perp.cols(); ++c) {
    for (int r = 0; r < perp.rows(); ++r) {
      if (std::abs(perp(r, c)) > 1e-12) {
        CHECK(perp(r, c) > 0.0);
        break;
      }
    }
  }
  CHECK((g_perp(g) - perp).norm() == 0.0);
}

TEST_CASE("g_perp rejects rank-deficient input maps") {
  Matrix g(3, 2);
  g << 1.0, 2.0, 1.0, 2.0, 1.0, 2.0;  // second column is 2x the first
  CHECK_THROWS_AS(g_perp(g), SingularGeometryError);
}

TEST_CASE("lambda validation enforces strict row diagonal dominance") {
  PerturbationSpec pert;
  pert.lambda = Matrix(2, 2);
  pert.lambda << 1.0, 1.0, 0.0, 1.0;  // |off| == diag in row 0
  CHECK_THROWS_AS(pert.validate(2), ConfigError);
  pert.lambda << -1.0, 0.0, 0.0, 1.0;  // negative diagonal
  CHECK_THROWS_AS(pert.validate(2), ConfigError);
  pert.lambda << 1.0, 0.4, -0.2, 0.6;
  CHECK_NOTHROW(pert.validate(2));
  pert.lambda = Matrix::Constant(1, 1, 0.3);
  CHECK_NOTHROW(pert.validate(1));
}

TEST_CASE("model validation catches bad dimensions") {
  auto m = scalar_model();
  m.input_lower = Vector::Zero(2);
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = scalar_model();
  m.input_lower = Vector::Constant(1, 2.0);
  m.input_upper = Vector::Constant(1, -2.0);
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = scalar_model();
  m.f_eval = nullptr;
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("input clamping respects the box") {
  auto model = make_pendubot_model(PendubotParams{});
  Vector u = Vector::Constant(1, 9.0);
  CHECK(model.clamp_input(u)(0) == doctest::Approx(4.0));
  u = Vector::Constant(1, -9.0);
  CHECK(model.clamp_input(u)(0) == doctest::Approx(-4.0));
}
