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

#ifndef L1AUG_EXPERIMENTS_HPP
#define L1AUG_EXPERIMENTS_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "l1aug/ddp.hpp"
#include "l1aug/dynamics.hpp"
#include "l1aug/l1_controller.hpp"
#include "l1aug/plants.hpp"
#include "l1aug/sim.hpp"
#include "l1aug/types.hpp"

namespace l1aug {

// ---------------------------------------------------------------------------
// Seeded sampling. std::uniform_real_distribution is not bit-specified across
// standard-library implementations, so experiment sampling consumes raw
// mt19937_64 draws directly; identical seeds then give identical scenario
// lists on every platform.
// ---------------------------------------------------------------------------

// Uniform double in [0, 1) with 53 random mantissa bits.
double uniform_unit(std::mt19937_64& rng);

// Uniform double in [lo, hi]; lo == hi returns lo without consuming a draw.
double uniform_in(std::mt19937_64& rng, double lo, double hi);

// Uniform integer in {0, ..., count - 1} by rejection, so every index has
// exactly equal probability.
int uniform_index(std::mt19937_64& rng, int count);

// ---------------------------------------------------------------------------
// Scenario configuration. One scenario per file, TOML-style sections of
// key = value pairs; the full schema is documented in the README.
// ---------------------------------------------------------------------------

// Closed interval; degenerate (lo == hi) means the value is fixed.
struct Range {
  double lo = 1.0;
  double hi = 1.0;

  bool fixed_at(double v) const { return lo == v && hi == v; }
};

struct ScenarioConfig {
  std::string name;          // output file stem
  std::string plant;         // scalar | cartpole | pendubot | quadrotor
  std::string policy = "lqr";  // lqr | ddp:<path> | mlp:<path> | zero
  Vector x0;                 // empty = plant default start state

  bool l1_enabled = true;
  double l1_a = 10.0;
  double l1_t_s = 0.0;  // 0 = sim t_adapt
  double l1_k = 40.0;

  // Random-sampling ranges consumed by sample_scenarios.
  Range lambda_range{1.0, 1.0};
  std::map<std::string, Range> parameter_scales;  // override name -> range
  Range prop_coeff_range{1.0, 1.0};  // quadrotor: two random propellers
  Range wind_mean_range{0.0, 0.0};   // quadrotor: horizontal force mean, N

  // Explicit grid consumed by run_sweep; empty lists collapse to {identity}.
  std::vector<double> sweep_lambda;
  std::map<std::string, std::vector<double>> sweep_scales;

  int episodes = 10;
  std::uint64_t seed = 0;
  // NaN selects the plant default (the shaped-reward floor for the pendubot,
  // -50 per step elsewhere).
  double reward_min_per_step = std::numeric_limits<double>::quiet_NaN();
  double success_threshold = -0.5;

  // LQR weights for the plant's equilibrium point; empty = plant defaults.
  Vector lqr_q;
  Vector lqr_r;

  SimConfig sim;

  void validate() const;  // ConfigError on ill-ordered ranges or bad fields
};

// Parses the file and validates the result. Throws LoadError with
// "<path>:<line>:" prefixes for syntax problems and unknown keys, and
// ConfigError for semantically invalid values.
ScenarioConfig load_scenario_config(const std::string& path);

// ---------------------------------------------------------------------------
// Plant bundle: everything an episode needs that depends only on the plant
// name and the scenario config (nominal model, baseline policy, reward,
// default start state).
// ---------------------------------------------------------------------------
struct PlantBundle {
  ControlAffineModel nominal;
  Policy policy;
  RewardFn reward;          // may be empty
  Vector x0;
  double reward_min_per_step = -50.0;  // resolved from the config sentinel
  // Divergence threshold handed to the episode engine. Balance tasks on
  // unbounded joint angles tighten it so circulation counts as failure.
  double state_fail_bound = 1e12;
  // Rebuilds the true model with parameter overrides baked in.
  std::function<ControlAffineModel(const std::map<std::string, double>&)>
      true_model;
};

// Resolves config.plant / config.policy / config.x0. ddp:<path> and
// mlp:<path> load from disk (LoadError on failure); "lqr" synthesizes about
// the plant's torque-free equilibrium.
PlantBundle make_plant_bundle(const ScenarioConfig& config);

// ---------------------------------------------------------------------------
// Scenario sampling.
// ---------------------------------------------------------------------------

// Draws config.episodes perturbations, deterministic per seed. Each draw
// takes, in order: lambda, parameter scales (sorted by name), two propeller
// coefficients (when the range is active), wind means and fluctuation phases
// (when the range is active). Wind closes over the perturbed mass so the
// recorded disturbance is a true acceleration.
std::vector<PerturbationSpec> sample_scenarios(const ScenarioConfig& config,
                                               std::uint64_t seed);

// Builds the horizontal wind disturbance used by the quadrotor suites: the
// per-axis force is mean * (1 + 0.05 * sum_{k=1..3} sin(w_k t + p_k)) with
// the frequencies and phases drawn once from rng, then fixed for the whole
// episode. Only the velocity rows of the 12-state quadrotor are driven.
DisturbanceFn make_wind_disturbance(std::mt19937_64& rng, double mean_x,
                                    double mean_y, double mass);

// ---------------------------------------------------------------------------
// Grid sweep: cartesian product of the configured lambda and scale lists,
// each cell run with the baseline policy alone and with L1 augmentation.
// ---------------------------------------------------------------------------

struct SweepRow {
  std::string scenario_id;   // grid-cell label, e.g. "lam0.5_m1s3.5"
  std::string variant;       // "baseline" | "l1"
  std::string perturbation;  // human-readable spec description
  double accumulated_reward = 0.0;
  double normalized_reward = 0.0;
  bool success = false;
  bool failed = false;
  double divergence_time = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by (scenario_id order, variant)
  int failed_episodes = 0;
  std::string summary_path;    // written CSV, empty when out_dir was empty
};

// Runs the grid; episode exceptions and divergences mark the row failed and
// never abort the sweep. Rewards are normalized against the baseline run on
// the identity cell. jobs <= 0 picks the hardware concurrency. out_dir
// receives summary.csv plus one trajectory CSV per episode; pass "" to skip
// writing.
SweepResult run_sweep(const ScenarioConfig& config, const std::string& out_dir,
                      int jobs = 0);

// Serializes rows in order with header
// scenario,variant,perturbation,accumulated_reward,normalized_reward,
// success,failed,divergence_time. Fixed "%.12g" formatting keeps reruns
// byte-identical.
std::string sweep_summary_csv(const std::vector<SweepRow>& rows);

// ---------------------------------------------------------------------------
// Quadrotor robustness suites: propeller-efficiency loss, mass and inertia
// scaling, horizontal wind, and the joint propeller + mass case. Each suite
// draws scenarios_per_suite perturbations and flies the reach mission with
// the DDP policy alone and with L1 augmentation, reporting position error
// against the unperturbed rollout.
// ---------------------------------------------------------------------------

struct QuadEpisodeReport {
  std::string suite;   // propeller | mass-inertia | wind | joint
  int scenario = 0;
  std::string variant;  // "baseline" | "l1"
  std::string perturbation;
  bool failed = false;
  double final_position_error = 0.0;  // vs ideal rollout, m
  double rms_deviation = 0.0;         // whole-trajectory position RMS, m
};

struct QuadSuiteOptions {
  std::uint64_t seed = 2024;
  int scenarios_per_suite = 10;
  int jobs = 0;
  std::string out_dir;  // "" = no files
  // Reuse a solved mission instead of solving on entry.
  const DDPSolution* solution = nullptr;
};

struct QuadSuiteSummary {
  std::vector<QuadEpisodeReport> episodes;  // sorted (suite, scenario, variant)
  // Max row-wise state distance between a fresh unperturbed rollout and the
  // stored reference trajectory; 0 up to floating-point identity.
  double ideal_rerun_deviation = 0.0;
  std::string summary_path;
};

QuadSuiteSummary run_quadrotor_suite(const QuadSuiteOptions& opts);

// Median of the final-position errors of one (suite, variant) slice; failed
// episodes count as +infinity.
double suite_median_error(const QuadSuiteSummary& summary,
                          const std::string& suite, const std::string& variant);

// Median of a sample; throws ConfigError when empty.
double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// Sampling-period table for the estimation error bound.
// ---------------------------------------------------------------------------

struct GammaRow {
  double t_s = 0.0;
  double gamma = 0.0;
};

// One row per requested period, using the supplied bound constants.
std::vector<GammaRow> gamma_table(const UncertaintyBounds& bounds, double a,
                                  const std::vector<double>& t_s_list);

// ---------------------------------------------------------------------------
// CSV reading and SVG line plots. CSVs written by the simulator are the
// authoritative outputs; the plots exist so runs can be inspected without an
// external renderer.
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // one inner vector per line

  int column(const std::string& name) const;  // ConfigError when absent
};

// Strict numeric CSV: a header line then uniform-width double rows. Throws
// LoadError with "<path>:<line>:" on malformed cells or ragged rows.
CsvTable read_csv(const std::string& path);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 900;
  int height = 560;
  std::vector<Series> series;
};

// Renders axes, ticks, one polyline per series, and a legend. Non-finite
// points are dropped. An empty spec still yields a valid SVG with axes.
std::string render_svg_plot(const PlotSpec& spec);
void write_svg_plot(const PlotSpec& spec, const std::string& path);

// Pixel position of a data point under the spec's axis scaling; exposed so
// rendered coordinates can be checked exactly.
void plot_data_to_pixel(const PlotSpec& spec, double x_min, double x_max,
                        double y_min, double y_max, double x, double y,
                        double& px, double& py);

// Estimate-vs-truth overlay for one state coordinate: sigma_true, sigma_hat
// and the sigma_hat +/- gamma envelope as four series over time.
PlotSpec make_estimate_overlay(const Trajectory& traj, int state_index,
                               double gamma);

}  // namespace l1aug

#endif  // L1AUG_EXPERIMENTS_HPP
