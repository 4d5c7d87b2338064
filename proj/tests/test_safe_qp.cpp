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
#include <random>
#include <sstream>
#include <string>

#include "l1aug/safe_qp.hpp"

using namespace l1aug;

namespace {

// Scalar control-affine stub with constant drift and input gain, the
// smallest plant on which every QP constraint geometry can be staged.
struct ScalarStage {
  double c_f = 0.0;
  double c_g = 1.0;
  double w_v = 1.0;  // constant Lyapunov gradient
  double w_h = 1.0;  // constant barrier gradient
  double v0 = 0.0;
  double h0 = 0.0;
  double c1 = 1.0;
  double u_lo = -10.0;
  double u_hi = 10.0;

  ControlAffineModel model() const {
    ControlAffineModel m;
    m.n = 1;
    m.m = 1;
    m.f_eval = [c = c_f](const Vector&) { return Vector::Constant(1, c); };
    m.g_eval = [c = c_g](const Vector&) { return Matrix::Constant(1, 1, c); };
    m.input_lower = Vector::Constant(1, u_lo);
    m.input_upper = Vector::Constant(1, u_hi);
    m.state_set_bound = 100.0;
    return m;
  }
  CLFSpec clf() const {
    CLFSpec spec;
    spec.v_eval = [v = v0](const Vector&) { return v; };
    spec.v_grad = [w = w_v](const Vector&) { return Vector::Constant(1, w); };
    spec.c1 = c1;
    return spec;
  }
  CBFSpec cbf() const {
    CBFSpec spec;
    spec.h_eval = [h = h0](const Vector&) { return h; };
    spec.h_grad = [w = w_h](const Vector&) { return Vector::Constant(1, w); };
    return spec;
  }
};

QPWeights unit_weights(double h = 1.0, double p = 10.0) {
  QPWeights w;
  w.h_weight = Matrix::Constant(1, 1, h);
  w.p_slack = p;
  return w;
}

}  // namespace

TEST_CASE("certificate terms on the cruise-control plant") {
  ACCParams p;
  ControlAffineModel model = make_acc_nominal_model(p);
  CLFSpec clf = make_acc_clf(p, 5.0);
  CBFSpec cbf = make_acc_cbf(p);
  Vector x0(3);
  x0 << 18.0, 12.0, 80.0;
  const Vector u0 = Vector::Zero(1);
  const Vector s0 = Vector::Zero(3);

  SUBCASE("plain barrier rate is the closing speed") {
    // h = D - tau_d v_f, hdot at zero input reduces to v_l - v_f = 6.
    CHECK(psi_h(cbf, model, x0, u0, s0, 0.0) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(cbf.h_eval(x0) == doctest::Approx(80.0 - 1.8 * 12.0));
  }
  SUBCASE("lyapunov gradient vanishes at the speed target") {
    Vector at_target(3);
    at_target << 18.0, p.v_d, 80.0;
    Vector sig(3);
    sig << 0.0, -0.1, 0.0;
    CHECK(clf.v_grad(at_target).norm() == 0.0);
    CHECK(psi_v(clf, model, at_target, u0, sig, 0.172) == 0.0);
    CHECK(clf.v_eval(at_target) == 0.0);
    CHECK(clf.v_eval(x0) > 0.0);
  }
  SUBCASE("error envelope shifts both certificates by the gradient norm") {
    const double gamma = 0.5;
    const double shift = std::sqrt(1.0 + p.tau_d * p.tau_d) * gamma;
    CHECK(psi_h(cbf, model, x0, u0, s0, gamma) ==
          doctest::Approx(psi_h(cbf, model, x0, u0, s0, 0.0) - shift));
    CHECK(psi_v(clf, model, x0, u0, s0, gamma) ==
          doctest::Approx(psi_v(clf, model, x0, u0, s0, 0.0) +
                          clf.v_grad(x0).norm() * gamma));
  }
  SUBCASE("exact estimate with zero envelope recovers the true rates") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> un(-1.0, 1.0);
    for (int k = 0; k < 25; ++k) {
      Vector x(3);
      x << 18.0 + 5.0 * un(rng), 12.0 + 8.0 * un(rng), 60.0 + 30.0 * un(rng);
      const double t = 15.0 * (un(rng) + 1.0);
      const Vector u = Vector::Constant(1, 3000.0 * un(rng));
      const Vector delta = acc_true_delta(p, t, x);
      const Vector xdot_true = acc_derivative(p, t, x, u(0));
      const Vector hx = cbf.h_grad(x);
      const Vector vx = clf.v_grad(x);
      CHECK(psi_h(cbf, model, x, u, delta, 0.0) ==
            doctest::Approx(hx.dot(xdot_true)).epsilon(1e-12));
      CHECK(psi_v(clf, model, x, u, delta, 0.0) ==
            doctest::Approx(vx.dot(xdot_true)).epsilon(1e-12));
    }
  }
  SUBCASE("negative envelope is rejected") {
    CHECK_THROWS_AS(psi_h(cbf, model, x0, u0, s0, -0.1), ConfigError);
  }
}

TEST_CASE("safety filter picks the exact constrained minimizer") {
  SUBCASE("unconstrained optimum is returned untouched") {
    ScalarStage st;
    st.h0 = 5.0;  // barrier slack everywhere in the box
    st.v0 = 0.0;  // no decay demand
    QPResult res = solve_ad_clbf_qp(st.clf(), st.cbf(), unit_weights(),
                                    st.model(), Vector::Zero(1),
                                    Vector::Zero(1), 0.0,
                                    st.model().input_lower,
                                    st.model().input_upper);
    CHECK(res.u(0) == 0.0);
    CHECK(res.slack == 0.0);
    CHECK(res.objective == 0.0);
    CHECK(res.status == QPStatus::kOptimal);
    CHECK_FALSE(res.cbf_active);
  }
  SUBCASE("active decay demand balances input against relaxation") {
    // With residual r = c1 V > 0, unit input gain and wide bounds, the
    // optimum of half H u^2 + p (r + u)^2 sits at u = -2 p r / (H + 2 p).
    ScalarStage st;
    st.v0 = 1.0;
    st.c1 = 3.0;
    st.h0 = 100.0;
    st.u_lo = -50.0;
    st.u_hi = 50.0;
    QPResult res = solve_ad_clbf_qp(st.clf(), st.cbf(), unit_weights(2.0, 10.0),
                                    st.model(), Vector::Zero(1),
                                    Vector::Zero(1), 0.0,
                                    st.model().input_lower,
                                    st.model().input_upper);
    const double r = 3.0;
    const double u_expected = -2.0 * 10.0 * r / (2.0 + 2.0 * 10.0);
    CHECK(res.u(0) == doctest::Approx(u_expected).epsilon(1e-9));
    CHECK(res.slack == doctest::Approx(r + u_expected).epsilon(1e-9));
    CHECK_FALSE(res.cbf_active);
  }
  SUBCASE("barrier constraint pins the input when only one point survives") {
    // psi_h + alpha(h) = u - 2 >= 0 with box [-1, 2]: feasible set is {2}.
    ScalarStage st;
    st.h0 = -2.0;
    st.u_lo = -1.0;
    st.u_hi = 2.0;
    QPResult res = solve_ad_clbf_qp(st.clf(), st.cbf(), unit_weights(),
                                    st.model(), Vector::Zero(1),
                                    Vector::Zero(1), 0.0,
                                    st.model().input_lower,
                                    st.model().input_upper);
    CHECK(res.u(0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(res.status == QPStatus::kOptimal);
    CHECK(res.cbf_active);
  }
  SUBCASE("unsatisfiable barrier reports the least-violating input") {
    // u - 3.5 - 1 >= 0 needs u >= 4.5, but the box caps at 2.
    ScalarStage st;
    st.v0 = 4.0;
    st.h0 = -1.0;
    st.u_lo = -1.0;
    st.u_hi = 2.0;
    QPResult res = solve_ad_clbf_qp(st.clf(), st.cbf(), unit_weights(),
                                    st.model(), Vector::Zero(1),
                                    Vector::Zero(1), 3.5,
                                    st.model().input_lower,
                                    st.model().input_upper);
    CHECK(res.status == QPStatus::kInfeasible);
    CHECK(res.u(0) == 2.0);
    CHECK(res.cbf_margin == doctest::Approx(-2.5).epsilon(1e-12));
    // Lyapunov relaxation at the fallback: c1 V + |V_x| gamma + u = 9.5.
    CHECK(res.slack == doctest::Approx(9.5).epsilon(1e-12));
    CHECK(res.cbf_active);
  }
  SUBCASE("input validation") {
    ScalarStage st;
    QPWeights bad = unit_weights();
    bad.p_slack = 0.0;
    CHECK_THROWS_AS(solve_ad_clbf_qp(st.clf(), st.cbf(), bad, st.model(),
                                     Vector::Zero(1), Vector::Zero(1), 0.0,
                                     st.model().input_lower,
                                     st.model().input_upper),
                    ConfigError);
    QPWeights indef = unit_weights();
    indef.h_weight = Matrix::Constant(1, 1, -1.0);
    CHECK_THROWS_AS(solve_ad_clbf_qp(st.clf(), st.cbf(), indef, st.model(),
                                     Vector::Zero(1), Vector::Zero(1), 0.0,
                                     st.model().input_lower,
                                     st.model().input_upper),
                    ConfigError);
    CHECK_THROWS_AS(solve_ad_clbf_qp(st.clf(), st.cbf(), unit_weights(),
                                     st.model(), Vector::Zero(1),
                                     Vector::Zero(1), 0.0,
                                     Vector::Constant(1, 1.0),
                                     Vector::Constant(1, -1.0)),
                    ConfigError);
  }
}

TEST_CASE("safety filter matches a dense grid oracle on random instances") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    ScalarStage st;
    double sig, gamma, h_cost, p_cost;
    for (;;) {
      st.c_f = 3.0 * un(rng);
      st.c_g = 3.0 * un(rng);
      st.w_v = 2.0 * un(rng);
      st.w_h = 2.0 * un(rng);
      st.v0 = std::abs(2.0 * un(rng));
      st.h0 = 2.0 * un(rng);
      st.c1 = 0.2 + std::abs(3.0 * un(rng));
      st.u_lo = -2.0 - std::abs(2.0 * un(rng));
      st.u_hi = 2.0 + std::abs(2.0 * un(rng));
      sig = 2.0 * un(rng);
      gamma = std::abs(un(rng));
      h_cost = 0.1 + std::abs(2.0 * un(rng));
      p_cost = 0.5 + std::abs(50.0 * un(rng));
      const double lgh = st.w_h * st.c_g;
      const double c_h = st.w_h * st.c_f + st.w_h * sig -
                         std::abs(st.w_h) * gamma + st.h0;
      if (c_h + std::max(lgh * st.u_lo, lgh * st.u_hi) >= 1e-3) break;
    }
    ControlAffineModel model = st.model();
    QPResult res = solve_ad_clbf_qp(st.clf(), st.cbf(),
                                    unit_weights(h_cost, p_cost), model,
                                    Vector::Zero(1), Vector::Constant(1, sig),
                                    gamma, model.input_lower,
                                    model.input_upper);

    // Independent route: scan the input axis densely with three zoom
    // passes; for each input the relaxation that minimizes the objective is
    // the constraint residual clipped at zero.
    const double c_v = st.w_v * st.c_f + st.w_v * sig +
                       std::abs(st.w_v) * gamma + st.c1 * st.v0;
    const double lgv = st.w_v * st.c_g;
    const double lgh = st.w_h * st.c_g;
    const double c_h = st.w_h * st.c_f + st.w_h * sig -
                       std::abs(st.w_h) * gamma + st.h0;
    double lo = st.u_lo, hi = st.u_hi, best = 1e300, best_u = 0.0;
    for (int pass = 0; pass < 3; ++pass) {
      const int n = 20000;
      bool found = false;
      double arg = best_u;
      for (int i = 0; i <= n; ++i) {
        const double u = lo + (hi - lo) * i / n;
        if (c_h + lgh * u < -1e-12 * (1.0 + std::abs(c_h))) continue;
        const double d = std::max(0.0, c_v + lgv * u);
        const double obj = 0.5 * h_cost * u * u + p_cost * d * d;
        if (obj < best) {
          best = obj;
          arg = u;
          found = true;
        }
      }
      if (found) best_u = arg;
      const double pad = (hi - lo) * 4.0 / n;
      lo = std::max(st.u_lo, best_u - pad);
      hi = std::min(st.u_hi, best_u + pad);
    }
    worst = std::max(worst,
                     std::abs(res.objective - best) / (1.0 + std::abs(best)));
  }
  CHECK(worst < 1e-3);
  CHECK(worst < 1e-8);  // the enumeration is exact, not merely close
}

TEST_CASE("larger error envelopes only shrink the feasible set") {
  ScalarStage st;
  st.c_f = 0.4;
  st.c_g = 1.5;
  st.w_v = 1.2;
  st.w_h = -0.8;
  st.v0 = 2.0;
  st.h0 = 3.0;
  ControlAffineModel model = st.model();
  CLFSpec clf = st.clf();
  CBFSpec cbf = st.cbf();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  const double g1 = 0.3, g2 = 1.1;
  for (int k = 0; k < 200; ++k) {
    const Vector u = Vector::Constant(1, 10.0 * un(rng));
    const Vector x = Vector::Zero(1);
    const Vector sig = Vector::Constant(1, un(rng));
    const double d = 5.0 * std::abs(un(rng));
    const bool feas2 =
        psi_v(clf, model, x, u, sig, g2) + clf.c1 * clf.v_eval(x) <= d &&
        psi_h(cbf, model, x, u, sig, g2) >= -cbf.alpha_of(cbf.h_eval(x));
    if (feas2) {
      CHECK(psi_v(clf, model, x, u, sig, g1) + clf.c1 * clf.v_eval(x) <= d);
      CHECK(psi_h(cbf, model, x, u, sig, g1) >=
            -cbf.alpha_of(cbf.h_eval(x)));
    }
  }
  QPResult r1 = solve_ad_clbf_qp(clf, cbf, unit_weights(), model,
                                 Vector::Zero(1), Vector::Zero(1), g1,
                                 model.input_lower, model.input_upper);
  QPResult r2 = solve_ad_clbf_qp(clf, cbf, unit_weights(), model,
                                 Vector::Zero(1), Vector::Zero(1), g2,
                                 model.input_lower, model.input_upper);
  CHECK(r2.objective >= r1.objective - 1e-12);
}

TEST_CASE("cruise-control uncertainty constants") {
  ACCParams p;
  UncertaintyBounds b = acc_build_constants(p);
  CHECK(b.l_t == doctest::Approx(2.4655219145).epsilon(1e-9));
  CHECK(b.l_ftil == doctest::Approx(54.4444444444).epsilon(1e-9));
  CHECK(b.b_ftil == doctest::Approx(3.924).epsilon(1e-12));
  CHECK(b.l_gtil == 0.0);
  CHECK(b.b_gtil == doctest::Approx(1.0 / 1650.0).epsilon(1e-12));
  CHECK(b.l_u == doctest::Approx(129492.0).epsilon(1e-12));
  CHECK(p.u_max() == doctest::Approx(6474.6).epsilon(1e-12));
  CHECK_THROWS_AS(acc_build_constants(p, 0.5), ConfigError);

  SUBCASE("error bound scales by decades for small sampling times") {
    const double g[] = {acc_gamma(p, 1.0, 1e-2), acc_gamma(p, 1.0, 1e-3),
                        acc_gamma(p, 1.0, 1e-4), acc_gamma(p, 1.0, 1e-5)};
    for (int i = 0; i + 1 < 4; ++i) {
      CHECK(g[i] / g[i + 1] == doctest::Approx(10.0).epsilon(0.01));
      CHECK(g[i] > g[i + 1]);
    }
  }
}

TEST_CASE("cruise-control scenario separates the three filters") {
  ACCScenarioConfig cfg;
  ACCScenarioResult adaptive =
      run_acc_scenario(ACCVariant::kAdaptive, cfg);
  ACCScenarioResult ignored =
      run_acc_scenario(ACCVariant::kIgnoreUncertainty, cfg);
  ACCScenarioResult oracle =
      run_acc_scenario(ACCVariant::kTrueUncertainty, cfg);

  // Safe start: the scenario begins well inside the safe set.
  CHECK(adaptive.h.front() == doctest::Approx(58.4));

  // Ignoring the uncertainty loses safety; the robust filter keeps it with
  // a margin under the envelope |h_x| gamma = 0.354.
  CHECK(ignored.min_h < -1.0);
  CHECK(adaptive.min_h > 0.25);
  CHECK(adaptive.min_h < 0.40);

  // The estimate tracks the true model error far inside the envelope.
  CHECK(adaptive.max_estimate_error <= adaptive.gamma_used);
  CHECK(adaptive.max_estimate_error < 0.01);
  CHECK(adaptive.gamma_used == doctest::Approx(0.172));
  CHECK(oracle.gamma_used == 0.0);

  // Mid-run, before the headway binds, the desired speed is reached; late
  // in the run the barrier forces the follower down to the lead speed.
  auto min_speed_error_mid = [](const ACCScenarioResult& r) {
    double best = 1e9;
    for (std::size_t i = 0; i < r.trajectory.rows(); ++i) {
      const double t = r.trajectory.times[i];
      if (t >= 8.0 && t <= 10.0)
        best = std::min(best, std::abs(r.trajectory.states[i](1) - 22.0));
    }
    return best;
  };
  CHECK(min_speed_error_mid(adaptive) < 0.1);
  CHECK(min_speed_error_mid(oracle) < 0.1);
  CHECK(std::abs(adaptive.trajectory.states.back()(1) - 18.0) < 0.2);

  // The barrier becomes active during the run and the filter never needs
  // the infeasibility fallback.
  double active_rows = 0.0, infeasible_rows = 0.0;
  for (std::size_t i = 0; i < adaptive.h.size(); ++i) {
    active_rows += adaptive.psi_h_active[i];
    infeasible_rows += adaptive.qp_status[i];
  }
  CHECK(active_rows > 0.0);
  CHECK(infeasible_rows == 0.0);

  SUBCASE("trajectory export carries the filter columns and is stable") {
    const std::string path1 = "acc_run_a.csv";
    const std::string path2 = "acc_run_b.csv";
    adaptive.write_csv(path1);
    adaptive.write_csv(path2);
    std::ifstream f1(path1), f2(path2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    REQUIRE(!s1.str().empty());
    CHECK(s1.str() == s2.str());
    std::string header = s1.str().substr(0, s1.str().find('\n'));
    CHECK(header.find("h,V,psi_h_active,qp_status") != std::string::npos);
    std::remove(path1.c_str());
    std::remove(path2.c_str());
  }
}

TEST_CASE("scenario configuration guards") {
  CHECK(acc_variant_from_name("adaptive") == ACCVariant::kAdaptive);
  CHECK(acc_variant_from_name("true-uncertainty") ==
        ACCVariant::kTrueUncertainty);
  CHECK(acc_variant_name(ACCVariant::kIgnoreUncertainty) ==
        "ignore-uncertainty");
  CHECK_THROWS_AS(acc_variant_from_name("oracle"), ConfigError);

  ACCScenarioConfig bad;
  bad.t_qp = 0.0333;  // not a multiple of t_s
  CHECK_THROWS_AS(run_acc_scenario(ACCVariant::kAdaptive, bad), ConfigError);
  ACCScenarioConfig neg;
  neg.gamma = -0.1;
  CHECK_THROWS_AS(run_acc_scenario(ACCVariant::kAdaptive, neg), ConfigError);
}
