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

#include "l1aug/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "l1aug/policies.hpp"

namespace l1aug {

namespace {

std::string fmt_double(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return std::string(buf);
}

std::string g12(double v) { return fmt_double("%.12g", v); }
std::string g6(double v) { return fmt_double("%.6g", v); }
std::string g4(double v) { return fmt_double("%.4g", v); }

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

bool valid_identifier(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') {
      return false;
    }
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Seeded sampling
// ---------------------------------------------------------------------------

double uniform_unit(std::mt19937_64& rng) {
  // 53 random mantissa bits; the result is exactly representable and lies in
  // [0, 1).
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform_in(std::mt19937_64& rng, double lo, double hi) {
  if (!(lo <= hi)) throw ConfigError("uniform_in needs lo <= hi");
  if (lo == hi) return lo;
  return lo + (hi - lo) * uniform_unit(rng);
}

int uniform_index(std::mt19937_64& rng, int count) {
  if (count <= 0) throw ConfigError("uniform_index needs a positive count");
  const std::uint64_t c = static_cast<std::uint64_t>(count);
  // Values at or above the largest multiple of count are rejected so every
  // residue is hit by the same number of raw draws.
  const std::uint64_t cutoff =
      (std::numeric_limits<std::uint64_t>::max() / c) * c;
  for (;;) {
    const std::uint64_t v = rng();
    if (v < cutoff) return static_cast<int>(v % c);
  }
}

// ---------------------------------------------------------------------------
// Config file parsing
// ---------------------------------------------------------------------------

namespace {

struct ConfigEntry {
  enum Kind { kNumber, kString, kBool, kArray };
  Kind kind = kNumber;
  int line = 0;
  double number = 0.0;
  bool flag = false;
  std::string text;
  std::vector<double> array;
  mutable bool used = false;
};

struct ConfigDoc {
  std::string path;
  std::map<std::string, ConfigEntry> entries;

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw LoadError(path + ":" + std::to_string(line) + ": " + msg);
  }

  const ConfigEntry* find(const std::string& key) const {
    auto it = entries.find(key);
    if (it == entries.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  double number(const std::string& key, double fallback) const {
    const ConfigEntry* e = find(key);
    if (e == nullptr) return fallback;
    if (e->kind != ConfigEntry::kNumber) fail(e->line, key + " must be a number");
    return e->number;
  }

  long long integer(const std::string& key, long long fallback) const {
    const ConfigEntry* e = find(key);
    if (e == nullptr) return fallback;
    if (e->kind != ConfigEntry::kNumber ||
        e->number != std::floor(e->number)) {
      fail(e->line, key + " must be an integer");
    }
    return static_cast<long long>(e->number);
  }

  bool boolean(const std::string& key, bool fallback) const {
    const ConfigEntry* e = find(key);
    if (e == nullptr) return fallback;
    if (e->kind != ConfigEntry::kBool) fail(e->line, key + " must be true or false");
    return e->flag;
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    const ConfigEntry* e = find(key);
    if (e == nullptr) return fallback;
    if (e->kind != ConfigEntry::kString) fail(e->line, key + " must be a quoted string");
    return e->text;
  }

  std::vector<double> array(const std::string& key) const {
    const ConfigEntry* e = find(key);
    if (e == nullptr) return {};
    if (e->kind != ConfigEntry::kArray) fail(e->line, key + " must be an array");
    return e->array;
  }

  // A bare number fixes the value; a two-element array is [lo, hi].
  Range range(const std::string& key, Range fallback) const {
    const ConfigEntry* e = find(key);
    if (e == nullptr) return fallback;
    if (e->kind == ConfigEntry::kNumber) return Range{e->number, e->number};
    if (e->kind == ConfigEntry::kArray && e->array.size() == 2) {
      return Range{e->array[0], e->array[1]};
    }
    fail(e->line, key + " must be a number or a [lo, hi] pair");
  }

  Vector vector_value(const std::string& key) const {
    const ConfigEntry* e = find(key);
    if (e == nullptr) return Vector();
    if (e->kind != ConfigEntry::kArray) fail(e->line, key + " must be an array");
    Vector v(static_cast<int>(e->array.size()));
    for (int i = 0; i < v.size(); ++i) v(i) = e->array[static_cast<std::size_t>(i)];
    return v;
  }

  // Keys inside a section that were not consumed by name, e.g. the free-form
  // parameter-scale entries of [perturbation].
  std::vector<std::string> remaining_in_section(const std::string& section) const {
    std::vector<std::string> keys;
    const std::string prefix = section + ".";
    for (const auto& [key, entry] : entries) {
      if (!entry.used && key.rfind(prefix, 0) == 0) keys.push_back(key);
    }
    return keys;
  }

  void finish() const {
    for (const auto& [key, entry] : entries) {
      if (!entry.used) fail(entry.line, "unknown key '" + key + "'");
    }
  }
};

// Strips a trailing comment, honoring double quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

ConfigEntry parse_value(const ConfigDoc& doc, int line, const std::string& raw) {
  ConfigEntry e;
  e.line = line;
  if (raw.empty()) doc.fail(line, "missing value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') doc.fail(line, "unterminated string");
    e.kind = ConfigEntry::kString;
    e.text = raw.substr(1, raw.size() - 2);
    return e;
  }
  if (raw == "true" || raw == "false") {
    e.kind = ConfigEntry::kBool;
    e.flag = (raw == "true");
    return e;
  }
  if (raw.front() == '[') {
    if (raw.back() != ']') doc.fail(line, "unterminated array");
    e.kind = ConfigEntry::kArray;
    const std::string inner = trim(raw.substr(1, raw.size() - 2));
    if (inner.empty()) return e;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = inner.find(',', start);
      const std::string cell = inner.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start);
      double v = 0.0;
      if (!parse_double(cell, v)) {
        doc.fail(line, "array entry '" + trim(cell) + "' is not a number");
      }
      e.array.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return e;
  }
  double v = 0.0;
  if (!parse_double(raw, v)) doc.fail(line, "invalid value '" + raw + "'");
  e.kind = ConfigEntry::kNumber;
  e.number = v;
  return e;
}

ConfigDoc parse_config(const std::string& path, std::istream& in) {
  ConfigDoc doc;
  doc.path = path;
  std::string section;
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') doc.fail(ln, "unterminated section header");
      section = trim(body.substr(1, body.size() - 2));
      if (!valid_identifier(section)) doc.fail(ln, "invalid section name");
      continue;
    }
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      doc.fail(ln, "expected 'key = value' or '[section]'");
    }
    const std::string key = trim(body.substr(0, eq));
    if (!valid_identifier(key)) doc.fail(ln, "invalid key '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (doc.entries.count(full) != 0) doc.fail(ln, "duplicate key '" + full + "'");
    doc.entries[full] = parse_value(doc, ln, trim(body.substr(eq + 1)));
  }
  return doc;
}

struct PlantDims {
  int n = 0;
  int m = 0;
};

PlantDims plant_dims(const std::string& plant) {
  if (plant == "scalar") return {1, 1};
  if (plant == "cartpole") return {4, 1};
  if (plant == "pendubot") return {4, 1};
  if (plant == "quadrotor") return {12, 4};
  throw ConfigError("unknown plant '" + plant + "'");
}

void check_range(const Range& r, const std::string& what, double min_lo) {
  if (!(r.lo <= r.hi)) throw ConfigError(what + " range needs lo <= hi");
  if (!(r.lo >= min_lo)) {
    throw ConfigError(what + " range lower bound must be at least " + g6(min_lo));
  }
}

}  // namespace

void ScenarioConfig::validate() const {
  if (name.empty()) throw ConfigError("scenario name must not be empty");
  const PlantDims dims = plant_dims(plant);
  if (episodes < 1) throw ConfigError("episodes must be at least 1");
  if (!(l1_a > 0.0)) throw ConfigError("l1 a must be positive");
  if (!(l1_k > 0.0)) throw ConfigError("l1 k must be positive");
  if (l1_t_s < 0.0) throw ConfigError("l1 t_s must not be negative");
  check_range(lambda_range, "lambda", 0.0);
  for (const auto& [key, r] : parameter_scales) check_range(r, key, 1e-9);
  check_range(prop_coeff_range, "prop_coeff", 1e-9);
  check_range(wind_mean_range, "wind_mean", 0.0);
  const bool wind_active = !wind_mean_range.fixed_at(0.0);
  const bool prop_active = !prop_coeff_range.fixed_at(1.0);
  if ((wind_active || prop_active) && plant != "quadrotor") {
    throw ConfigError("wind and propeller perturbations need the quadrotor");
  }
  for (double v : sweep_lambda) {
    if (!(v >= 0.0)) throw ConfigError("sweep lambda values must not be negative");
  }
  for (const auto& [key, values] : sweep_scales) {
    if (values.empty()) throw ConfigError("sweep list for " + key + " is empty");
    for (double v : values) {
      if (!(v > 0.0)) throw ConfigError("sweep values for " + key + " must be positive");
    }
  }
  if (x0.size() != 0 && x0.size() != dims.n) {
    throw ConfigError("x0 must have " + std::to_string(dims.n) + " entries");
  }
  const bool path_policy =
      policy.rfind("ddp:", 0) == 0 || policy.rfind("mlp:", 0) == 0;
  if (policy != "lqr" && policy != "zero" && !path_policy) {
    throw ConfigError("policy must be lqr, zero, ddp:<path> or mlp:<path>");
  }
  if (path_policy) {
    const std::string file = policy.substr(4);
    if (file.empty()) throw ConfigError("policy file path is empty");
    if (!std::filesystem::exists(file)) {
      throw ConfigError("policy file '" + file + "' does not exist");
    }
  }
  if (!std::isnan(reward_min_per_step) && !(reward_min_per_step < 0.0)) {
    throw ConfigError("reward_min must be negative");
  }
  if (!std::isfinite(success_threshold)) {
    throw ConfigError("success_threshold must be finite");
  }
}

ScenarioConfig load_scenario_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path + ": cannot open");
  ConfigDoc doc = parse_config(path, in);

  ScenarioConfig cfg;
  cfg.name = doc.text("scenario.name", std::filesystem::path(path).stem().string());
  cfg.plant = doc.text("scenario.plant", "");
  cfg.policy = doc.text("scenario.policy", "lqr");
  cfg.episodes = static_cast<int>(doc.integer("scenario.episodes", 10));
  cfg.seed = static_cast<std::uint64_t>(doc.integer("scenario.seed", 0));
  cfg.x0 = doc.vector_value("scenario.x0");
  cfg.reward_min_per_step =
      doc.number("scenario.reward_min", cfg.reward_min_per_step);
  cfg.success_threshold =
      doc.number("scenario.success_threshold", cfg.success_threshold);

  cfg.l1_enabled = doc.boolean("l1.enabled", true);
  cfg.l1_a = doc.number("l1.a", cfg.l1_a);
  cfg.l1_t_s = doc.number("l1.t_s", cfg.l1_t_s);
  cfg.l1_k = doc.number("l1.k", cfg.l1_k);

  cfg.lambda_range = doc.range("perturbation.lambda", cfg.lambda_range);
  cfg.prop_coeff_range = doc.range("perturbation.prop_coeff", cfg.prop_coeff_range);
  cfg.wind_mean_range = doc.range("perturbation.wind_mean", cfg.wind_mean_range);
  for (const std::string& key : doc.remaining_in_section("perturbation")) {
    cfg.parameter_scales[key.substr(std::string("perturbation.").size())] =
        doc.range(key, Range{});
  }

  cfg.sweep_lambda = doc.array("sweep.lambda");
  for (const std::string& key : doc.remaining_in_section("sweep")) {
    cfg.sweep_scales[key.substr(std::string("sweep.").size())] = doc.array(key);
  }

  cfg.lqr_q = doc.vector_value("lqr.q");
  cfg.lqr_r = doc.vector_value("lqr.r");

  cfg.sim.dt_int = doc.number("sim.dt_int", 0.0);
  cfg.sim.t_ctrl = doc.number("sim.t_ctrl", 0.0);
  cfg.sim.t_adapt = doc.number("sim.t_adapt", 0.0);
  cfg.sim.duration = doc.number("sim.duration", 0.0);
  cfg.sim.clamp_inputs = doc.boolean("sim.clamp_inputs", true);
  cfg.sim.seed = cfg.seed;

  doc.finish();
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Plant bundles
// ---------------------------------------------------------------------------

namespace {

// Quadratic shaping about a reference point, floored so accumulated rewards
// stay normalizable.
RewardFn quadratic_reward(const Vector& x_ref, double floor_value) {
  return [x_ref, floor_value](const Vector& x) {
    return std::max(floor_value, -(x - x_ref).squaredNorm());
  };
}

}  // namespace

PlantBundle make_plant_bundle(const ScenarioConfig& config) {
  PlantBundle b;
  Vector x_eq, u_eq, q_default, r_default;

  if (config.plant == "scalar") {
    b.nominal = make_scalar_integrator_model();
    x_eq = Vector::Zero(1);
    u_eq = Vector::Zero(1);
    q_default = Vector::Constant(1, 1.0);
    r_default = Vector::Constant(1, 1.0);
    b.true_model = [](const std::map<std::string, double>& overrides) {
      if (!overrides.empty()) {
        throw ConfigError("unknown parameter override '" +
                          overrides.begin()->first + "' for scalar");
      }
      return make_scalar_integrator_model();
    };
  } else if (config.plant == "cartpole") {
    CartPoleParams params;
    b.nominal = make_cartpole_model(params);
    x_eq = Vector::Zero(4);
    x_eq(3) = M_PI;
    u_eq = Vector::Zero(1);
    q_default = Vector(4);
    q_default << 5.0, 1.0, 1.0, 10.0;
    r_default = Vector::Constant(1, 1.0);
    b.true_model = [params](const std::map<std::string, double>& overrides) {
      return make_cartpole_model(cartpole_apply_overrides(params, overrides));
    };
  } else if (config.plant == "pendubot") {
    PendubotParams params;
    b.nominal = make_pendubot_model(params);
    x_eq = pendubot_upright_state();
    u_eq = Vector::Zero(1);
    q_default = Vector(4);
    q_default << 20.0, 20.0, 1.0, 1.0;
    r_default = Vector::Constant(1, 2.0);
    b.true_model = [params](const std::map<std::string, double>& overrides) {
      return make_pendubot_model(pendubot_apply_overrides(params, overrides));
    };
  } else if (config.plant == "quadrotor") {
    QuadrotorParams params;
    b.nominal = make_quadrotor_model(params);
    x_eq = Vector::Zero(12);
    u_eq = Vector::Zero(4);
    u_eq(0) = quadrotor_hover_thrust(params);
    q_default = Vector(12);
    q_default << 8.0, 8.0, 8.0, 2.0, 2.0, 2.0, 10.0, 10.0, 10.0, 1.0, 1.0, 1.0;
    r_default = Vector(4);
    r_default << 0.02, 4.0, 4.0, 4.0;
    b.true_model = [params](const std::map<std::string, double>& overrides) {
      return make_quadrotor_model(quadrotor_apply_overrides(params, overrides));
    };
  } else {
    throw ConfigError("unknown plant '" + config.plant + "'");
  }

  double plant_reward_min = -50.0;
  if (config.plant == "pendubot") {
    b.reward = [](const Vector& x) { return pendubot_reward(x); };
    plant_reward_min = pendubot_reward_min();
    // Exactly upright is an equilibrium of every mass-scaled variant, so the
    // standard start carries a 0.1 rad joint-angle offset the controller has
    // to pull back.  The offset is split as (-0.1, +0.1)/sqrt(2) across the
    // two joints: opposite-sign displacements keep the centre of mass near
    // the vertical, which is the only direction the 4 Nm actuator can recover
    // from under large mass perturbations.  A same-sign or single-joint
    // offset of this size leaves the torque-limited basin of attraction.
    b.x0 = pendubot_upright_state();
    b.x0(0) -= 0.1 / std::sqrt(2.0);
    b.x0(1) += 0.1 / std::sqrt(2.0);
    // Joint angles are unbounded coordinates and the bounded shape reward
    // scores fast circulation above holding the equilibrium, so a run that
    // leaves the balance neighbourhood this far is a failure, not a score.
    // Balanced episodes stay under 3 in the infinity norm.
    b.state_fail_bound = 50.0;
  } else {
    b.reward = quadratic_reward(x_eq, plant_reward_min);
    b.x0 = x_eq;
  }
  b.reward_min_per_step = std::isnan(config.reward_min_per_step)
                              ? plant_reward_min
                              : config.reward_min_per_step;

  if (config.policy == "lqr") {
    const Vector q = config.lqr_q.size() > 0 ? config.lqr_q : q_default;
    const Vector r = config.lqr_r.size() > 0 ? config.lqr_r : r_default;
    b.policy = lqr_policy(b.nominal, x_eq, u_eq, q, r);
  } else if (config.policy == "zero") {
    b.policy = constant_policy(Vector::Zero(b.nominal.m));
  } else if (config.policy.rfind("ddp:", 0) == 0) {
    const DDPSolution sol = load_ddp_solution(config.policy.substr(4));
    if (sol.n != b.nominal.n || sol.m != b.nominal.m) {
      throw ConfigError("loaded trajectory dimensions do not match the plant");
    }
    b.policy = ddp_policy(sol);
  } else if (config.policy.rfind("mlp:", 0) == 0) {
    const MLPPolicy mlp = mlp_load(config.policy.substr(4));
    if (mlp.layer_sizes.front() != b.nominal.n ||
        mlp.layer_sizes.back() != b.nominal.m) {
      throw ConfigError("network layer sizes do not match the plant");
    }
    b.policy = mlp_policy(mlp);
  } else {
    throw ConfigError("unknown policy spec '" + config.policy + "'");
  }

  if (config.x0.size() > 0) b.x0 = config.x0;
  return b;
}

// ---------------------------------------------------------------------------
// Scenario sampling
// ---------------------------------------------------------------------------

namespace {

std::string describe_perturbation(
    const std::optional<double>& lambda,
    const std::map<std::string, double>& overrides,
    const std::optional<std::array<double, 2>>& wind) {
  std::vector<std::string> parts;
  if (lambda.has_value()) parts.push_back("lambda=" + g6(*lambda));
  for (const auto& [key, value] : overrides) {
    parts.push_back(key + "=" + g6(value));
  }
  if (wind.has_value()) {
    parts.push_back("wind_x=" + g6((*wind)[0]));
    parts.push_back("wind_y=" + g6((*wind)[1]));
  }
  if (parts.empty()) return "nominal";
  std::string out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out += " " + parts[i];
  return out;
}

// Two distinct propellers chosen uniformly over the six unordered pairs, each
// with its own coefficient draw; the lower index draws first.
void draw_two_propellers(std::mt19937_64& rng, const Range& range,
                         std::map<std::string, double>& overrides) {
  const int first = uniform_index(rng, 4);
  int second = uniform_index(rng, 3);
  if (second >= first) ++second;
  const int lo = std::min(first, second);
  const int hi = std::max(first, second);
  overrides["c_p" + std::to_string(lo + 1)] = uniform_in(rng, range.lo, range.hi);
  overrides["c_p" + std::to_string(hi + 1)] = uniform_in(rng, range.lo, range.hi);
}

}  // namespace

DisturbanceFn make_wind_disturbance(std::mt19937_64& rng, double mean_x,
                                    double mean_y, double mass) {
  if (!(mass > 0.0)) throw ConfigError("wind needs a positive mass");
  struct Axis {
    double mean;
    std::array<double, 3> omega;
    std::array<double, 3> phase;
  };
  std::array<Axis, 2> axes{Axis{mean_x, {}, {}}, Axis{mean_y, {}, {}}};
  for (Axis& axis : axes) {
    for (int k = 0; k < 3; ++k) {
      axis.omega[static_cast<std::size_t>(k)] = uniform_in(rng, 0.5, 3.0);
      axis.phase[static_cast<std::size_t>(k)] = uniform_in(rng, 0.0, 2.0 * M_PI);
    }
  }
  return [axes, mass](double t, const Vector& x) {
    Vector d = Vector::Zero(x.size());
    for (int a = 0; a < 2; ++a) {
      const Axis& axis = axes[static_cast<std::size_t>(a)];
      double ripple = 0.0;
      for (int k = 0; k < 3; ++k) {
        ripple += std::sin(axis.omega[static_cast<std::size_t>(k)] * t +
                           axis.phase[static_cast<std::size_t>(k)]);
      }
      // Force in newtons on the true airframe mass; rows 3 and 4 are the
      // horizontal velocity derivatives.
      d(3 + a) = axis.mean * (1.0 + 0.05 * ripple) / mass;
    }
    return d;
  };
}

std::vector<PerturbationSpec> sample_scenarios(const ScenarioConfig& config,
                                               std::uint64_t seed) {
  config.validate();
  const PlantDims dims = plant_dims(config.plant);
  const double base_mass = QuadrotorParams{}.mass;
  std::mt19937_64 rng(seed);

  std::vector<PerturbationSpec> specs;
  specs.reserve(static_cast<std::size_t>(config.episodes));
  for (int e = 0; e < config.episodes; ++e) {
    PerturbationSpec spec = PerturbationSpec::identity(dims.m);
    std::optional<double> lambda;
    if (!config.lambda_range.fixed_at(1.0)) {
      lambda = uniform_in(rng, config.lambda_range.lo, config.lambda_range.hi);
      spec.lambda = *lambda * Matrix::Identity(dims.m, dims.m);
    }
    for (const auto& [key, range] : config.parameter_scales) {
      spec.parameter_overrides[key] = uniform_in(rng, range.lo, range.hi);
    }
    if (!config.prop_coeff_range.fixed_at(1.0)) {
      draw_two_propellers(rng, config.prop_coeff_range, spec.parameter_overrides);
    }
    std::optional<std::array<double, 2>> wind;
    if (!config.wind_mean_range.fixed_at(0.0)) {
      const double mx =
          uniform_in(rng, config.wind_mean_range.lo, config.wind_mean_range.hi);
      const double my =
          uniform_in(rng, config.wind_mean_range.lo, config.wind_mean_range.hi);
      wind = std::array<double, 2>{mx, my};
      auto it = spec.parameter_overrides.find("mass_scale");
      const double true_mass =
          base_mass * (it != spec.parameter_overrides.end() ? it->second : 1.0);
      spec.d_eval = make_wind_disturbance(rng, mx, my, true_mass);
    }
    spec.description = describe_perturbation(lambda, spec.parameter_overrides, wind);
    specs.push_back(std::move(spec));
  }
  return specs;
}

// ---------------------------------------------------------------------------
// Parallel episode execution
// ---------------------------------------------------------------------------

namespace {

// Fixed-size task pool; work(i) must capture its own failures because worker
// exceptions would otherwise terminate the process.
void run_parallel(int jobs, int count, const std::function<void(int)>& work) {
  if (count <= 0) return;
  int threads = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      work(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads - 1));
  for (int t = 0; t + 1 < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
}

std::string join_path(const std::string& dir, const std::string& file) {
  if (dir.empty()) return file;
  return (std::filesystem::path(dir) / file).string();
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw LoadError("cannot create directory '" + dir + "': " + ec.message());
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid sweep
// ---------------------------------------------------------------------------

namespace {

struct GridCell {
  std::string id;
  double lambda = 1.0;
  std::map<std::string, double> scales;
};

std::vector<GridCell> build_grid(const ScenarioConfig& cfg) {
  const std::vector<double> lambdas =
      cfg.sweep_lambda.empty() ? std::vector<double>{1.0} : cfg.sweep_lambda;
  const std::vector<std::pair<std::string, std::vector<double>>> axes(
      cfg.sweep_scales.begin(), cfg.sweep_scales.end());

  std::size_t combos = 1;
  for (const auto& [name, values] : axes) combos *= values.size();

  std::vector<GridCell> cells;
  cells.reserve(lambdas.size() * combos);
  for (double lam : lambdas) {
    for (std::size_t c = 0; c < combos; ++c) {
      // Decode the combination index with the last axis fastest.
      std::vector<std::size_t> idx(axes.size(), 0);
      std::size_t rem = c;
      for (std::size_t a = axes.size(); a-- > 0;) {
        idx[a] = rem % axes[a].second.size();
        rem /= axes[a].second.size();
      }
      GridCell cell;
      cell.lambda = lam;
      cell.id = "lam" + g4(lam);
      for (std::size_t a = 0; a < axes.size(); ++a) {
        const double v = axes[a].second[idx[a]];
        cell.scales[axes[a].first] = v;
        cell.id += "_" + axes[a].first + g4(v);
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace

std::string sweep_summary_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "scenario,variant,perturbation,accumulated_reward,normalized_reward,"
      "success,failed,divergence_time\n";
  for (const SweepRow& r : rows) {
    out += r.scenario_id + "," + r.variant + "," + r.perturbation + "," +
           g12(r.accumulated_reward) + "," + g12(r.normalized_reward) + "," +
           (r.success ? "1" : "0") + "," + (r.failed ? "1" : "0") + "," +
           g12(r.divergence_time) + "\n";
  }
  return out;
}

SweepResult run_sweep(const ScenarioConfig& config, const std::string& out_dir,
                      int jobs) {
  ScenarioConfig cfg = config;
  cfg.validate();
  if (cfg.sim.t_adapt == 0.0 && cfg.l1_t_s > 0.0) cfg.sim.t_adapt = cfg.l1_t_s;
  cfg.sim.finalize();
  if (cfg.l1_t_s > 0.0 &&
      std::abs(cfg.l1_t_s - cfg.sim.t_adapt) > 1e-12 * cfg.sim.t_adapt) {
    throw ConfigError("l1 t_s must equal the sim adaptation period");
  }

  const PlantBundle bundle = make_plant_bundle(cfg);
  const int m = bundle.nominal.m;
  const L1Params l1p = make_l1_params(cfg.l1_a, cfg.sim.t_adapt, cfg.l1_k, m);
  ensure_dir(out_dir);

  auto run_one = [&](const PerturbationSpec& pert, bool with_l1,
                     const std::string& scenario_id) {
    ControlAffineModel true_model = bundle.true_model(pert.parameter_overrides);
    EpisodeSetup setup;
    setup.nominal = &bundle.nominal;
    setup.policy = bundle.policy;
    setup.reward = bundle.reward;
    setup.x0 = bundle.x0;
    setup.sim = cfg.sim;
    setup.state_fail_bound = bundle.state_fail_bound;
    if (with_l1) setup.l1 = l1p;
    setup.scenario_id = scenario_id;
    setup.perturbation = pert.description;
    setup.true_derivative = [true_model, pert](double t, const Vector& x,
                                               const Vector& u) {
      return perturbed_derivative(true_model, pert, t, x, u);
    };
    return run_episode(setup);
  };

  // Normalization reference: the baseline policy on the unperturbed plant.
  PerturbationSpec ident = PerturbationSpec::identity(m);
  ident.description = "nominal";
  const Trajectory nominal_traj = run_one(ident, false, "reference");
  if (nominal_traj.failed) {
    throw SolverError("the baseline policy diverges on the unperturbed plant");
  }
  double nominal_reward = 0.0;
  for (double r : nominal_traj.reward) nominal_reward += r;

  const std::vector<GridCell> cells = build_grid(cfg);
  std::vector<std::string> variants;
  variants.push_back("baseline");
  if (cfg.l1_enabled) variants.push_back("l1");

  const int total = static_cast<int>(cells.size() * variants.size());
  SweepResult result;
  result.rows.resize(static_cast<std::size_t>(total));

  run_parallel(jobs, total, [&](int i) {
    const GridCell& cell = cells[static_cast<std::size_t>(i) / variants.size()];
    const std::string& variant = variants[static_cast<std::size_t>(i) % variants.size()];
    SweepRow& row = result.rows[static_cast<std::size_t>(i)];
    row.scenario_id = cell.id;
    row.variant = variant;

    PerturbationSpec pert = PerturbationSpec::identity(m);
    pert.lambda = cell.lambda * Matrix::Identity(m, m);
    pert.parameter_overrides = cell.scales;
    pert.description = describe_perturbation(cell.lambda, cell.scales, std::nullopt);
    row.perturbation = pert.description;
    try {
      const Trajectory traj = run_one(pert, variant == "l1", cell.id);
      const EpisodeMetrics met =
          episode_metrics(traj, bundle.reward_min_per_step, nominal_reward,
                          cfg.success_threshold);
      row.accumulated_reward = met.accumulated_reward;
      row.normalized_reward = met.normalized_reward;
      row.success = met.success;
      row.failed = traj.failed;
      row.divergence_time = traj.divergence_time;
      if (!out_dir.empty()) {
        write_trajectory_csv(
            traj, join_path(out_dir, cfg.name + "_" + cell.id + "_" + variant +
                                         ".csv"));
      }
    } catch (const std::exception&) {
      row.failed = true;
      row.normalized_reward = 0.0;
      row.success = false;
    }
  });

  for (const SweepRow& r : result.rows) {
    if (r.failed) ++result.failed_episodes;
  }
  if (!out_dir.empty()) {
    result.summary_path = join_path(out_dir, cfg.name + "_summary.csv");
    std::ofstream out(result.summary_path, std::ios::binary);
    if (!out) throw LoadError("cannot open '" + result.summary_path + "'");
    out << sweep_summary_csv(result.rows);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Quadrotor robustness suites
// ---------------------------------------------------------------------------

double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double suite_median_error(const QuadSuiteSummary& summary,
                          const std::string& suite,
                          const std::string& variant) {
  std::vector<double> errors;
  for (const QuadEpisodeReport& e : summary.episodes) {
    if (e.suite == suite && e.variant == variant) {
      errors.push_back(e.final_position_error);
    }
  }
  return median(std::move(errors));
}

QuadSuiteSummary run_quadrotor_suite(const QuadSuiteOptions& opts) {
  if (opts.scenarios_per_suite < 1) {
    throw ConfigError("scenarios_per_suite must be at least 1");
  }
  const QuadrotorParams params;
  const OCProblem prob = make_quadrotor_reach_problem(params);

  DDPSolution solved;
  const DDPSolution* sol = opts.solution;
  if (sol == nullptr) {
    Vector hover = Vector::Zero(4);
    hover(0) = quadrotor_hover_thrust(params);
    solved = solve_ddp(prob, std::vector<Vector>(
                                 static_cast<std::size_t>(prob.horizon_n), hover));
    sol = &solved;
  }

  const ControlAffineModel nominal = make_quadrotor_model(params);
  const Policy policy = ddp_policy(*sol);
  SimConfig sim;
  sim.dt_int = 1e-3;
  sim.t_ctrl = prob.dt;
  sim.t_adapt = 5e-3;
  sim.duration = prob.dt * prob.horizon_n;
  sim.finalize();
  const L1Params l1p = make_l1_params(10.0, sim.t_adapt, 200.0, 4);
  ensure_dir(opts.out_dir);

  auto fly = [&](const PerturbationSpec& pert, bool with_l1,
                 const std::string& scenario_id) {
    ControlAffineModel true_model =
        make_quadrotor_model(quadrotor_apply_overrides(params, pert.parameter_overrides));
    EpisodeSetup setup;
    setup.nominal = &nominal;
    setup.policy = policy;
    setup.x0 = prob.x_start;
    setup.sim = sim;
    if (with_l1) setup.l1 = l1p;
    setup.scenario_id = scenario_id;
    setup.perturbation = pert.description;
    setup.true_derivative = [true_model, pert](double t, const Vector& x,
                                               const Vector& u) {
      return perturbed_derivative(true_model, pert, t, x, u);
    };
    return run_episode(setup);
  };

  PerturbationSpec ident = PerturbationSpec::identity(4);
  ident.description = "nominal";
  const Trajectory ideal = fly(ident, false, "ideal");
  if (ideal.failed) throw SolverError("ideal quadrotor rollout diverged");

  QuadSuiteSummary summary;
  {
    const Trajectory rerun = fly(ident, false, "ideal");
    if (rerun.rows() != ideal.rows()) {
      summary.ideal_rerun_deviation = std::numeric_limits<double>::infinity();
    } else {
      double dev = 0.0;
      for (std::size_t i = 0; i < ideal.rows(); ++i) {
        dev = std::max(dev, (rerun.states[i] - ideal.states[i]).norm());
      }
      summary.ideal_rerun_deviation = dev;
    }
  }

  struct Scenario {
    std::string suite;
    int index = 0;
    PerturbationSpec pert;
  };
  std::vector<Scenario> scenarios;
  std::mt19937_64 rng(opts.seed);
  const Range prop_range{0.5, 1.0};
  const Range scale_range{2.0, 5.0};
  const Range wind_range{10.0, 25.0};

  auto add = [&](const std::string& suite, int index, PerturbationSpec pert,
                 const std::optional<double>& lambda,
                 const std::optional<std::array<double, 2>>& wind) {
    pert.description =
        describe_perturbation(lambda, pert.parameter_overrides, wind);
    scenarios.push_back(Scenario{suite, index, std::move(pert)});
  };

  for (int i = 0; i < opts.scenarios_per_suite; ++i) {
    PerturbationSpec pert = PerturbationSpec::identity(4);
    draw_two_propellers(rng, prop_range, pert.parameter_overrides);
    add("propeller", i, std::move(pert), std::nullopt, std::nullopt);
  }
  for (int i = 0; i < opts.scenarios_per_suite; ++i) {
    PerturbationSpec pert = PerturbationSpec::identity(4);
    const double s = uniform_in(rng, scale_range.lo, scale_range.hi);
    pert.parameter_overrides["mass_scale"] = s;
    pert.parameter_overrides["inertia_scale"] = s;
    add("mass-inertia", i, std::move(pert), std::nullopt, std::nullopt);
  }
  for (int i = 0; i < opts.scenarios_per_suite; ++i) {
    PerturbationSpec pert = PerturbationSpec::identity(4);
    const double mx = uniform_in(rng, wind_range.lo, wind_range.hi);
    const double my = uniform_in(rng, wind_range.lo, wind_range.hi);
    pert.d_eval = make_wind_disturbance(rng, mx, my, params.mass);
    add("wind", i, std::move(pert), std::nullopt,
        std::array<double, 2>{mx, my});
  }
  for (int i = 0; i < opts.scenarios_per_suite; ++i) {
    PerturbationSpec pert = PerturbationSpec::identity(4);
    draw_two_propellers(rng, prop_range, pert.parameter_overrides);
    const double s = uniform_in(rng, scale_range.lo, scale_range.hi);
    pert.parameter_overrides["mass_scale"] = s;
    pert.parameter_overrides["inertia_scale"] = s;
    add("joint", i, std::move(pert), std::nullopt, std::nullopt);
  }

  const std::vector<std::string> variants{"baseline", "l1"};
  const int total = static_cast<int>(scenarios.size() * variants.size());
  summary.episodes.resize(static_cast<std::size_t>(total));

  run_parallel(opts.jobs, total, [&](int i) {
    const Scenario& scen = scenarios[static_cast<std::size_t>(i) / variants.size()];
    const std::string& variant = variants[static_cast<std::size_t>(i) % variants.size()];
    QuadEpisodeReport& rep = summary.episodes[static_cast<std::size_t>(i)];
    rep.suite = scen.suite;
    rep.scenario = scen.index;
    rep.variant = variant;
    rep.perturbation = scen.pert.description;
    const std::string id =
        scen.suite + std::to_string(scen.index) + "_" + variant;
    try {
      const Trajectory traj = fly(scen.pert, variant == "l1", id);
      if (traj.failed || traj.rows() != ideal.rows()) {
        rep.failed = true;
        rep.final_position_error = std::numeric_limits<double>::infinity();
        rep.rms_deviation = std::numeric_limits<double>::infinity();
      } else {
        rep.final_position_error =
            (traj.states.back().head(3) - ideal.states.back().head(3)).norm();
        double acc = 0.0;
        for (std::size_t r = 0; r < traj.rows(); ++r) {
          acc += (traj.states[r].head(3) - ideal.states[r].head(3)).squaredNorm();
        }
        rep.rms_deviation = std::sqrt(acc / static_cast<double>(traj.rows()));
      }
      if (!opts.out_dir.empty()) {
        write_trajectory_csv(traj, join_path(opts.out_dir, "quad_" + id + ".csv"));
      }
    } catch (const std::exception&) {
      rep.failed = true;
      rep.final_position_error = std::numeric_limits<double>::infinity();
      rep.rms_deviation = std::numeric_limits<double>::infinity();
    }
  });

  if (!opts.out_dir.empty()) {
    summary.summary_path = join_path(opts.out_dir, "quad_summary.csv");
    std::ofstream out(summary.summary_path, std::ios::binary);
    if (!out) throw LoadError("cannot open '" + summary.summary_path + "'");
    out << "suite,scenario,variant,perturbation,failed,final_position_error,"
           "rms_deviation\n";
    for (const QuadEpisodeReport& e : summary.episodes) {
      out << e.suite << "," << e.scenario << "," << e.variant << ","
          << e.perturbation << "," << (e.failed ? "1" : "0") << ","
          << g12(e.final_position_error) << "," << g12(e.rms_deviation) << "\n";
    }
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Sampling-period table
// ---------------------------------------------------------------------------

std::vector<GammaRow> gamma_table(const UncertaintyBounds& bounds, double a,
                                  const std::vector<double>& t_s_list) {
  std::vector<GammaRow> rows;
  rows.reserve(t_s_list.size());
  for (double t_s : t_s_list) {
    if (t_s < 0.0) throw ConfigError("sampling periods must not be negative");
    rows.push_back(GammaRow{t_s, compute_gamma(bounds, a, t_s)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV reading
// ---------------------------------------------------------------------------

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("no column named '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path + ": cannot open");
  CsvTable table;
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (ln == 1) {
      table.columns = cells;
      continue;
    }
    if (cells.size() != table.columns.size()) {
      throw LoadError(path + ":" + std::to_string(ln) + ": expected " +
                      std::to_string(table.columns.size()) + " fields, got " +
                      std::to_string(cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (!parse_double(cells[i], row[i])) {
        throw LoadError(path + ":" + std::to_string(ln) + ": '" + cells[i] +
                        "' is not a number");
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty()) throw LoadError(path + ": empty file");
  return table;
}

// ---------------------------------------------------------------------------
// SVG line plots
// ---------------------------------------------------------------------------

namespace {

constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 160.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                "#ff7f0e", "#9467bd", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

}  // namespace

void plot_data_to_pixel(const PlotSpec& spec, double x_min, double x_max,
                        double y_min, double y_max, double x, double y,
                        double& px, double& py) {
  const double pw = spec.width - kMarginLeft - kMarginRight;
  const double ph = spec.height - kMarginTop - kMarginBottom;
  px = kMarginLeft + (x - x_min) / (x_max - x_min) * pw;
  py = kMarginTop + (y_max - y) / (y_max - y_min) * ph;
}

std::string render_svg_plot(const PlotSpec& spec) {
  if (spec.width < 300 || spec.height < 200) {
    throw ConfigError("plot canvas must be at least 300 x 200");
  }
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
  bool any = false;
  for (const Series& s : spec.series) {
    const std::size_t count = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!any) {
        x_min = x_max = s.x[i];
        y_min = y_max = s.y[i];
        any = true;
      } else {
        x_min = std::min(x_min, s.x[i]);
        x_max = std::max(x_max, s.x[i]);
        y_min = std::min(y_min, s.y[i]);
        y_max = std::max(y_max, s.y[i]);
      }
    }
  }
  if (!any) {
    x_min = y_min = 0.0;
    x_max = y_max = 1.0;
  }
  if (!(x_max > x_min)) {
    x_min -= 0.5;
    x_max += 0.5;
  }
  if (!(y_max > y_min)) {
    y_min -= 0.5;
    y_max += 0.5;
  }

  const double pw = spec.width - kMarginLeft - kMarginRight;
  const double ph = spec.height - kMarginTop - kMarginBottom;
  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(spec.width) + "\" height=\"" +
         std::to_string(spec.height) + "\" viewBox=\"0 0 " +
         std::to_string(spec.width) + " " + std::to_string(spec.height) +
         "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<rect x=\"" + g6(kMarginLeft) + "\" y=\"" + g6(kMarginTop) +
         "\" width=\"" + g6(pw) + "\" height=\"" + g6(ph) +
         "\" fill=\"none\" stroke=\"#333333\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double fx = x_min + (x_max - x_min) * i / 5.0;
    const double fy = y_min + (y_max - y_min) * i / 5.0;
    double px, py;
    plot_data_to_pixel(spec, x_min, x_max, y_min, y_max, fx, fy, px, py);
    svg += "<line x1=\"" + fmt_double("%.2f", px) + "\" y1=\"" +
           g6(kMarginTop + ph) + "\" x2=\"" + fmt_double("%.2f", px) +
           "\" y2=\"" + g6(kMarginTop + ph + 5.0) + "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + fmt_double("%.2f", px) + "\" y=\"" +
           g6(kMarginTop + ph + 20.0) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + g4(fx) + "</text>\n";
    svg += "<line x1=\"" + g6(kMarginLeft - 5.0) + "\" y1=\"" +
           fmt_double("%.2f", py) + "\" x2=\"" + g6(kMarginLeft) + "\" y2=\"" +
           fmt_double("%.2f", py) + "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + g6(kMarginLeft - 8.0) + "\" y=\"" +
           fmt_double("%.2f", py + 4.0) +
           "\" font-size=\"11\" text-anchor=\"end\">" + g4(fy) + "</text>\n";
  }

  if (!spec.title.empty()) {
    svg += "<text x=\"" + g6(kMarginLeft + pw / 2.0) +
           "\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">" +
           xml_escape(spec.title) + "</text>\n";
  }
  if (!spec.x_label.empty()) {
    svg += "<text x=\"" + g6(kMarginLeft + pw / 2.0) + "\" y=\"" +
           g6(spec.height - 12.0) +
           "\" font-size=\"13\" text-anchor=\"middle\">" +
           xml_escape(spec.x_label) + "</text>\n";
  }
  if (!spec.y_label.empty()) {
    svg += "<text x=\"18\" y=\"" + g6(kMarginTop + ph / 2.0) +
           "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 "
           "18 " +
           g6(kMarginTop + ph / 2.0) + ")\">" + xml_escape(spec.y_label) +
           "</text>\n";
  }

  for (std::size_t s = 0; s < spec.series.size(); ++s) {
    const Series& series = spec.series[s];
    const char* color = kPalette[s % kPaletteSize];
    std::string points;
    const std::size_t count = std::min(series.x.size(), series.y.size());
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::isfinite(series.x[i]) || !std::isfinite(series.y[i])) continue;
      double px, py;
      plot_data_to_pixel(spec, x_min, x_max, y_min, y_max, series.x[i],
                         series.y[i], px, py);
      if (!points.empty()) points += " ";
      points += fmt_double("%.2f", px) + "," + fmt_double("%.2f", py);
    }
    if (!points.empty()) {
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    }
    const double ly = kMarginTop + 14.0 + 18.0 * static_cast<double>(s);
    const double lx = kMarginLeft + pw + 14.0;
    svg += "<line x1=\"" + g6(lx) + "\" y1=\"" + g6(ly - 4.0) + "\" x2=\"" +
           g6(lx + 24.0) + "\" y2=\"" + g6(ly - 4.0) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + g6(lx + 30.0) + "\" y=\"" + g6(ly) +
           "\" font-size=\"12\">" + xml_escape(series.label) + "</text>\n";
  }

  svg += "</svg>\n";
  return svg;
}

void write_svg_plot(const PlotSpec& spec, const std::string& path) {
  const std::string svg = render_svg_plot(spec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open '" + path + "' for writing");
  out << svg;
}

PlotSpec make_estimate_overlay(const Trajectory& traj, int state_index,
                               double gamma) {
  if (state_index < 0 || state_index >= traj.n) {
    throw ConfigError("state index out of range");
  }
  if (traj.sigma_hat.size() != traj.rows() ||
      traj.sigma_true.size() != traj.rows()) {
    throw ConfigError("trajectory lacks estimate columns");
  }
  if (gamma < 0.0) throw ConfigError("gamma must not be negative");

  PlotSpec spec;
  spec.title = "disturbance estimate vs truth";
  spec.x_label = "t [s]";
  spec.y_label = "sigma[" + std::to_string(state_index) + "]";
  Series truth{"sigma_true", {}, {}};
  Series estimate{"sigma_hat", {}, {}};
  Series upper{"bound_upper", {}, {}};
  Series lower{"bound_lower", {}, {}};
  for (std::size_t i = 0; i < traj.rows(); ++i) {
    const double t = traj.times[i];
    const double sh = traj.sigma_hat[i](state_index);
    truth.x.push_back(t);
    truth.y.push_back(traj.sigma_true[i](state_index));
    estimate.x.push_back(t);
    estimate.y.push_back(sh);
    upper.x.push_back(t);
    upper.y.push_back(sh + gamma);
    lower.x.push_back(t);
    lower.y.push_back(sh - gamma);
  }
  spec.series = {truth, estimate, upper, lower};
  return spec;
}

}  // namespace l1aug
