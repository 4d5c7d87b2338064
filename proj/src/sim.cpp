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

#include "l1aug/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace l1aug {

namespace {

// period / base must be a whole number of base steps.
long long rate_ratio(double period, double base, const char* what) {
  const double ratio = period / base;
  const long long k = std::llround(ratio);
  if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-6 * ratio) {
    throw ConfigError(std::string(what) +
                      " is not an integer multiple of the faster rate");
  }
  return k;
}

bool state_ok(const Vector& x, double bound) {
  return x.allFinite() && x.lpNorm<Eigen::Infinity>() < bound;
}

}  // namespace

void SimConfig::finalize() {
  if (!(t_ctrl > 0.0)) throw ConfigError("t_ctrl must be positive");
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");
  if (t_adapt == 0.0) t_adapt = t_ctrl;
  if (!(t_adapt > 0.0)) throw ConfigError("t_adapt must be positive");
  if (t_adapt > t_ctrl * (1.0 + 1e-9)) {
    throw ConfigError("t_adapt must not exceed t_ctrl");
  }
  if (dt_int == 0.0) dt_int = std::min(t_adapt, 1e-3) / 5.0;
  if (!(dt_int > 0.0)) throw ConfigError("dt_int must be positive");
  rate_ratio(t_adapt, dt_int, "t_adapt");
  rate_ratio(t_ctrl, dt_int, "t_ctrl");
  rate_ratio(t_ctrl, t_adapt, "t_ctrl");
  rate_ratio(duration, dt_int, "duration");
}

Trajectory run_episode(const EpisodeSetup& setup) {
  if (setup.nominal == nullptr) throw ConfigError("episode needs a model");
  const ControlAffineModel& model = *setup.nominal;
  model.validate();
  if (!setup.true_derivative) throw ConfigError("episode needs true dynamics");
  if (!setup.policy.eval) throw ConfigError("episode needs a policy");
  if (setup.x0.size() != model.n) throw ConfigError("x0 dimension mismatch");

  SimConfig cfg = setup.sim;
  cfg.finalize();
  if (setup.l1) setup.l1->validate(model.m);

  const long long steps_total = std::llround(cfg.duration / cfg.dt_int);
  const long long adapt_every = std::llround(cfg.t_adapt / cfg.dt_int);
  const long long ctrl_every = std::llround(cfg.t_ctrl / cfg.dt_int);

  Trajectory traj;
  traj.n = model.n;
  traj.m = model.m;
  traj.seed = cfg.seed;
  traj.scenario_id = setup.scenario_id;
  traj.perturbation = setup.perturbation;
  const std::size_t expected_rows =
      static_cast<std::size_t>(steps_total / adapt_every) + 1;
  traj.times.reserve(expected_rows);
  traj.states.reserve(expected_rows);

  Vector x = setup.x0;
  L1ControllerState ctl = L1ControllerState::init(model.n, model.m, setup.x0);
  Vector u_rl = Vector::Zero(model.m);
  Vector u_l1 = Vector::Zero(model.m);
  Vector u = Vector::Zero(model.m);

  for (long long step = 0;; ++step) {
    const double t = static_cast<double>(step) * cfg.dt_int;
    if (!state_ok(x, setup.state_fail_bound) ||
        (setup.l1 && !state_ok(ctl.x_hat, setup.state_fail_bound))) {
      traj.failed = true;
      traj.divergence_time = t;
      break;
    }
    const bool adapt_tick = (step % adapt_every == 0);
    const bool ctrl_tick = (step % ctrl_every == 0);

    if (adapt_tick && setup.l1) {
      adaptive_update(ctl, x, setup.l1->a, setup.l1->t_s);
      Matrix g = model.g_eval(x);
      decompose_sigma(ctl, g, g_perp(g));
      filter_step(ctl, setup.l1->k_filter, cfg.t_adapt);
      u_l1 = ctl.u_filter;
    }
    if (ctrl_tick) {
      u_rl = setup.policy.eval(t, x);
      if (u_rl.size() != model.m) {
        throw ConfigError("policy returned wrong input dimension");
      }
    }
    // The compensation refreshes at the adaptation rate while the policy
    // holds between control ticks, so the applied input changes on both.
    if (adapt_tick) {
      u = u_rl + u_l1;
      if (cfg.clamp_inputs) u = model.clamp_input(u);
    }
    if (adapt_tick) {
      traj.times.push_back(t);
      traj.states.push_back(x);
      traj.u_rl.push_back(u_rl);
      traj.u_l1.push_back(u_l1);
      traj.u_total.push_back(u);
      traj.sigma_hat.push_back(ctl.sigma_hat);
      traj.sigma_matched.push_back(ctl.sigma_matched);
      traj.sigma_unmatched.push_back(ctl.sigma_unmatched);
      if (setup.sigma_true) {
        traj.sigma_true.push_back(setup.sigma_true(t, x, u));
      } else {
        traj.sigma_true.push_back(setup.true_derivative(t, x, u) -
                                  nominal_derivative(model, x, u));
      }
      traj.reward.push_back(setup.reward ? setup.reward(x) : 0.0);
    }
    if (step == steps_total) break;

    // Plant and predictor advance as one system so the predictor sees the
    // measured state at every integrator stage, not a stale sample.
    if (setup.l1) {
      Vector kx1 = setup.true_derivative(t, x, u);
      Vector kh1 = predictor_derivative(model, ctl.x_hat, x, u,
                                        ctl.sigma_hat, setup.l1->a);
      const double h = cfg.dt_int;
      Vector x2 = x + 0.5 * h * kx1, h2 = ctl.x_hat + 0.5 * h * kh1;
      Vector kx2 = setup.true_derivative(t + 0.5 * h, x2, u);
      Vector kh2 =
          predictor_derivative(model, h2, x2, u, ctl.sigma_hat, setup.l1->a);
      Vector x3 = x + 0.5 * h * kx2, h3 = ctl.x_hat + 0.5 * h * kh2;
      Vector kx3 = setup.true_derivative(t + 0.5 * h, x3, u);
      Vector kh3 =
          predictor_derivative(model, h3, x3, u, ctl.sigma_hat, setup.l1->a);
      Vector x4 = x + h * kx3, h4 = ctl.x_hat + h * kh3;
      Vector kx4 = setup.true_derivative(t + h, x4, u);
      Vector kh4 =
          predictor_derivative(model, h4, x4, u, ctl.sigma_hat, setup.l1->a);
      x += h / 6.0 * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4);
      ctl.x_hat += h / 6.0 * (kh1 + 2.0 * kh2 + 2.0 * kh3 + kh4);
    } else {
      Vector k1 = setup.true_derivative(t, x, u);
      Vector k2 =
          setup.true_derivative(t + 0.5 * cfg.dt_int, x + 0.5 * cfg.dt_int * k1, u);
      Vector k3 =
          setup.true_derivative(t + 0.5 * cfg.dt_int, x + 0.5 * cfg.dt_int * k2, u);
      Vector k4 = setup.true_derivative(t + cfg.dt_int, x + cfg.dt_int * k3, u);
      x += cfg.dt_int / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return traj;
}

EpisodeMetrics episode_metrics(const Trajectory& traj,
                               double reward_min_per_step,
                               double nominal_accumulated_reward,
                               double success_threshold) {
  EpisodeMetrics m;
  if (traj.rows() == 0 || traj.failed) return m;
  for (double r : traj.reward) m.accumulated_reward += r;
  const double r_min = reward_min_per_step * static_cast<double>(traj.rows());
  const double denom = nominal_accumulated_reward - r_min;
  if (std::abs(denom) < 1e-300) {
    m.normalized_reward =
        std::abs(m.accumulated_reward - nominal_accumulated_reward) < 1e-12
            ? 1.0
            : 0.0;
  } else {
    m.normalized_reward = (m.accumulated_reward - r_min) / denom;
  }
  const std::size_t window =
      std::max<std::size_t>(1, traj.rows() - traj.rows() * 4 / 5);
  double tail = 0.0;
  for (std::size_t i = traj.rows() - window; i < traj.rows(); ++i) {
    tail += traj.reward[i];
  }
  m.mean_final_window_reward = tail / static_cast<double>(window);
  m.success = m.mean_final_window_reward >= success_threshold;
  return m;
}

namespace {

void append_value(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  write_trajectory_csv(traj, path, {}, {});
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path,
                          const std::vector<std::string>& extra_names,
                          const std::vector<std::vector<double>>& extra_cols) {
  if (extra_names.size() != extra_cols.size()) {
    throw ConfigError("extra column names/values mismatch");
  }
  std::string out;
  out += "t";
  for (int i = 0; i < traj.n; ++i) out += ",x" + std::to_string(i);
  for (int i = 0; i < traj.m; ++i) out += ",u_rl" + std::to_string(i);
  for (int i = 0; i < traj.m; ++i) out += ",u_l1" + std::to_string(i);
  for (int i = 0; i < traj.m; ++i) out += ",u" + std::to_string(i);
  for (int i = 0; i < traj.n; ++i) out += ",sighat" + std::to_string(i);
  for (int i = 0; i < traj.n; ++i) out += ",sigtrue" + std::to_string(i);
  out += ",reward";
  for (const auto& name : extra_names) out += "," + name;
  out += "\n";

  for (std::size_t r = 0; r < traj.rows(); ++r) {
    append_value(out, traj.times[r]);
    auto emit = [&](const Vector& v) {
      for (int i = 0; i < v.size(); ++i) {
        out += ',';
        append_value(out, v(i));
      }
    };
    emit(traj.states[r]);
    emit(traj.u_rl[r]);
    emit(traj.u_l1[r]);
    emit(traj.u_total[r]);
    emit(traj.sigma_hat[r]);
    emit(traj.sigma_true[r]);
    out += ',';
    append_value(out, traj.reward[r]);
    for (const auto& col : extra_cols) {
      out += ',';
      append_value(out, r < col.size() ? col[r] : 0.0);
    }
    out += "\n";
  }

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw ConfigError("cannot open " + path + " for writing");
  std::fwrite(out.data(), 1, out.size(), f);
  std::fclose(f);
}

}  // namespace l1aug
