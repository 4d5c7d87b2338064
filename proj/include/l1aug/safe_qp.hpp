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

#ifndef L1AUG_SAFE_QP_HPP
#define L1AUG_SAFE_QP_HPP

#include <functional>
#include <string>

#include "l1aug/dynamics.hpp"
#include "l1aug/l1_controller.hpp"
#include "l1aug/plants.hpp"
#include "l1aug/sim.hpp"
#include "l1aug/types.hpp"

namespace l1aug {

// Exponentially stabilizing Lyapunov certificate: the controller targets
// Vdot <= -c1 V + slack. c2/c3 record the quadratic envelope
// c2 |x|^2 <= V <= c3 |x|^2 when known; they are informational only.
struct CLFSpec {
  std::function<double(const Vector&)> v_eval;
  std::function<Vector(const Vector&)> v_grad;
  double c1 = 1.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

// Barrier certificate for the safe set {x : h(x) >= 0}. alpha is the
// extended class-K margin function; identity when left empty.
struct CBFSpec {
  std::function<double(const Vector&)> h_eval;
  std::function<Vector(const Vector&)> h_grad;
  std::function<double(double)> alpha;

  double alpha_of(double h) const { return alpha ? alpha(h) : h; }
};

// Objective weights of the safety filter: half u'Hu + p_slack d^2 where d
// relaxes only the Lyapunov constraint.
struct QPWeights {
  Matrix h_weight;
  double p_slack = 100.0;

  void validate(int m) const;
};

enum class QPStatus { kOptimal, kInfeasible };

struct QPResult {
  Vector u;
  double slack = 0.0;      // Lyapunov relaxation d at the returned input
  double objective = 0.0;  // half u'Hu + p_slack d^2
  QPStatus status = QPStatus::kOptimal;
  // psi_h + alpha(h) at the returned input. Negative only when infeasible,
  // in which case it is the least possible violation within the input box.
  double cbf_margin = 0.0;
  // True when the barrier constraint is tight (or violated) at the optimum.
  bool cbf_active = false;
};

// Robust Lyapunov decrease certificate evaluated at one (x, u):
// L_fV + L_gV u + V_x sigma_hat + |V_x| gamma. gamma inflates the estimate
// sigma_hat by the worst-case estimation error, so the returned value upper
// bounds the true Vdot whenever |sigma_hat - Delta| <= gamma.
double psi_v(const CLFSpec& clf, const ControlAffineModel& model,
             const Vector& x, const Vector& u, const Vector& sigma_hat,
             double gamma);

// Robust barrier rate: L_fh + L_gh u + h_x sigma_hat - |h_x| gamma, a lower
// bound on the true hdot under the same estimation error envelope.
double psi_h(const CBFSpec& cbf, const ControlAffineModel& model,
             const Vector& x, const Vector& u, const Vector& sigma_hat,
             double gamma);

// Safety-filter QP over z = (u, d):
//   minimize  half u'Hu + p_slack d^2
//   s.t.      psi_v(x, u) + c1 V(x) <= d,   d >= 0,
//             psi_h(x, u) >= -alpha(h(x)),
//             u_lower <= u <= u_upper.
// Solved exactly by enumerating candidate active sets of the linear
// constraints and picking the feasible minimizer (the objective is strictly
// convex, so the optimum lies on one such candidate). If the barrier
// constraint cannot be met anywhere in the box, the returned input is the
// one maximizing psi_h (least violating), slack reflects the Lyapunov
// relaxation at that input, and status is kInfeasible.
QPResult solve_ad_clbf_qp(const CLFSpec& clf, const CBFSpec& cbf,
                          const QPWeights& weights,
                          const ControlAffineModel& model, const Vector& x,
                          const Vector& sigma_hat, double gamma,
                          const Vector& u_lower, const Vector& u_upper);

// Growth/size constants of the cruise-control uncertainty class:
//   l_t    = (0.2 g 2 pi / 10) margin      (disturbance time slope)
//   l_ftil = (f1 + 2 f2 v_max) margin      (drag state slope)
//   b_ftil = 0.2 g margin                  (disturbance magnitude)
//   l_gtil = 0, b_gtil = 1/m               (known input direction, 1/m gain)
//   l_u    = 2 u_max / 0.1                 (full swing in no less than 0.1 s)
// margin >= 1 widens the slopes; pass the result through compute_theta_phi
// and compute_beta before compute_gamma.
UncertaintyBounds acc_build_constants(const ACCParams& p,
                                      double beta_margin = 2.0,
                                      double v_max = 160.0 / 3.6);

// Convenience wrapper running the full bound chain on the nominal
// cruise-control model: theta/phi/beta from the constants, then gamma(t_s).
double acc_gamma(const ACCParams& p, double a, double t_s,
                 double beta_margin = 2.0, double v_max = 160.0 / 3.6);

// V = (v_f - v_d)^2 drives the follower to the desired speed.
CLFSpec make_acc_clf(const ACCParams& p, double c1);
// h = D - tau_d v_f keeps the gap above the time-headway line.
CBFSpec make_acc_cbf(const ACCParams& p);

// Constraint construction used by the scenario runner:
//   kTrueUncertainty   exact model error in the constraints, gamma = 0
//   kIgnoreUncertainty zero uncertainty term, gamma = 0
//   kAdaptive          sampled estimate sigma_hat with the gamma envelope
enum class ACCVariant { kTrueUncertainty, kIgnoreUncertainty, kAdaptive };

// Accepts "true-uncertainty", "ignore-uncertainty", "adaptive".
ACCVariant acc_variant_from_name(const std::string& name);
std::string acc_variant_name(ACCVariant variant);

struct ACCScenarioConfig {
  ACCParams plant;
  double duration = 30.0;
  double t_qp = 0.05;   // filter period
  double t_s = 1e-3;    // adaptation and logging period
  double a = 1.0;       // predictor gain
  // Estimation-error envelope used by the robust constraints. The default
  // matches the tabulated bound for t_s = 1 ms; rescale when changing t_s.
  double gamma = 0.172;
  double c1 = 5.0;
  double p_slack = 100.0;
  Vector x0;  // empty = [18, 12, 80]

  void finalize();
};

struct ACCScenarioResult {
  Trajectory trajectory;  // rows at every adaptation boundary
  std::vector<double> h;
  std::vector<double> v;
  std::vector<double> psi_h_active;  // 1.0 when the barrier was tight
  std::vector<double> qp_status;     // 0 optimal, 1 infeasible fallback
  double min_h = 0.0;
  double max_tracking_error = 0.0;  // max |v_f - v_d| over the final 5 s
  // max |sigma_hat - Delta| over rows with t >= t_s (adaptive variant only).
  double max_estimate_error = 0.0;
  double gamma_used = 0.0;

  void write_csv(const std::string& path) const;
};

ACCScenarioResult run_acc_scenario(ACCVariant variant,
                                   const ACCScenarioConfig& cfg);

}  // namespace l1aug

#endif  // L1AUG_SAFE_QP_HPP
