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

#ifndef L1AUG_SIM_HPP
#define L1AUG_SIM_HPP

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "l1aug/dynamics.hpp"
#include "l1aug/l1_controller.hpp"
#include "l1aug/types.hpp"

namespace l1aug {

// Episode timing. The three rates are nested: dt_int divides t_adapt which
// divides t_ctrl. Leaving t_adapt at 0 locks it to t_ctrl; leaving dt_int at
// 0 picks min(t_adapt, 1 ms) / 5.
struct SimConfig {
  double dt_int = 0.0;
  double t_ctrl = 0.0;
  double t_adapt = 0.0;
  double duration = 0.0;
  std::uint64_t seed = 0;
  bool clamp_inputs = true;

  // Fills the defaulted fields and checks the divisibility contract.
  void finalize();
};

// Time series sampled at adaptation boundaries. Inputs hold the value being
// applied from that instant; estimates hold the freshly updated values.
struct Trajectory {
  int n = 0;
  int m = 0;
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> u_rl;
  std::vector<Vector> u_l1;
  std::vector<Vector> u_total;
  std::vector<Vector> sigma_hat;
  std::vector<Vector> sigma_matched;
  std::vector<Vector> sigma_unmatched;
  std::vector<Vector> sigma_true;
  std::vector<double> reward;
  bool failed = false;
  double divergence_time = std::numeric_limits<double>::quiet_NaN();
  std::string scenario_id;
  std::string perturbation;
  std::uint64_t seed = 0;

  std::size_t rows() const { return times.size(); }
};

// Everything one episode needs. The nominal model is what the controller
// believes; true_derivative is what the world integrates.
struct EpisodeSetup {
  const ControlAffineModel* nominal = nullptr;
  DerivativeFn true_derivative;
  Policy policy;
  std::optional<L1Params> l1;
  RewardFn reward;
  // Diagnostic override for the recorded model error; defaults to
  // true_derivative - nominal_derivative at the applied input.
  DerivativeFn sigma_true;
  Vector x0;
  SimConfig sim;
  // Infinity-norm threshold beyond which the episode counts as diverged.
  // Tasks on unbounded coordinates (joint angles) tighten this so that
  // circulation registers as failure rather than as a live trajectory.
  double state_fail_bound = 1e12;
  std::string scenario_id;
  std::string perturbation;
};

// Runs the multirate closed loop: policy at t_ctrl; adaptive update,
// decomposition and compensation filter at t_adapt; plant and predictor
// integrated jointly with RK4 at dt_int under zero-order-hold inputs. A
// non-finite or out-of-bound state marks the episode failed with its
// divergence time instead of throwing.
Trajectory run_episode(const EpisodeSetup& setup);

struct EpisodeMetrics {
  double accumulated_reward = 0.0;
  double normalized_reward = 0.0;
  bool success = false;
  double mean_final_window_reward = 0.0;
};

// normalized = (R - R_min) / (R_nominal - R_min) with R_min the everywhere-
// worst bound reward_min_per_step * rows. success = mean reward over the
// final 20% of rows >= success_threshold. Failed episodes score 0.
EpisodeMetrics episode_metrics(const Trajectory& traj,
                               double reward_min_per_step,
                               double nominal_accumulated_reward,
                               double success_threshold);

// One row per adaptation boundary:
// t,x0..,u_rl0..,u_l10..,u0..,sighat0..,sigtrue0..,reward
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

// Extra per-row columns appended after the standard schema (used by the
// safety-filter scenarios for h, V and solver status).
void write_trajectory_csv(const Trajectory& traj, const std::string& path,
                          const std::vector<std::string>& extra_names,
                          const std::vector<std::vector<double>>& extra_cols);

}  // namespace l1aug

#endif  // L1AUG_SIM_HPP
