#pragma once

#include <optional>
#include <string>

#include "rcbc/synth.hpp"

namespace rcbc {

// Safety geometry: state box, initial boxes, unsafe boxes.
struct SafetySets {
  Box X;
  std::vector<Box> X_i;
  std::vector<Box> X_u;
};

// Recovered barrier certificate B(x) = x'Px with safety controller
// u = K(x) x and level parameters gamma_i < gamma_u.
struct Certificate {
  TimeKind time_kind = TimeKind::discrete;
  Eigen::MatrixXd P;
  PolyMatrix K;
  double gamma_i = 0.0, gamma_u = 0.0, delta = 0.0;
  double lambda = 0.0;  // dt only
  double mu = 0.0;      // dt only, provenance for the disturbance bound audit
  std::string mode;     // "pi" or "dd"
  int T_data = 0;
  uint64_t seed = 0;

  // Pre-inversion values kept for the recovery-identity audit.
  Eigen::MatrixXd Pbar;
  double gamma_i_bar = 0.0, gamma_u_bar = 0.0, delta_bar = 0.0;

  double barrier(const Eigen::VectorXd& x) const {
    return x.dot(P * x);
  }
  Controller controller() const { return Controller{K}; }

  // Largest relative error across P Pbar = I, K = Kbar Pbar^-1 (by
  // construction), gamma = 1/gamma_bar and delta = 1/delta_bar.
  double recovery_error() const;
};

// Inverts the solver variables into a certificate.  Throws on infeasible
// outcomes or when Pbar is too ill-conditioned to invert (cond > 1e12).
Certificate recover(const SolverOutcome& outcome, const SynthesisProblem& prob,
                    uint64_t seed);

struct HorizonVerdict {
  enum class Kind { infinite, finite, invalid };
  Kind kind = Kind::invalid;
  double horizon = 0.0;  // steps (dt) or time units (ct) when finite
  std::string witness;   // the inequality instance that decided the verdict
};

// Infinite when delta <= gamma_u (1 - lambda); otherwise the largest integer
// horizon passing the geometric recursion test, found by bisection.
HorizonVerdict horizon_dt(const Certificate& cert);

// Finite horizon (gamma_u - gamma_i) / delta.
HorizonVerdict horizon_ct(const Certificate& cert);

struct ConditionReport {
  // Signed worst margins; >= -tol passes.
  double margin_initial = 0.0;   // gamma_i - max B over X_i
  double margin_unsafe = 0.0;    // min B over X_u - gamma_u
  double margin_decrease = 0.0;  // dt: lambda B + delta - B(next); ct: delta - LB
  int samples = 0;
  int admissible_models = 0;  // accepted Omega draws (incl. fallback)
  bool used_truth_fallback = false;
  bool pass = false;
  Eigen::VectorXd worst_initial_x, worst_unsafe_x, worst_decrease_x;
};

struct MonteCarloReport {
  int runs = 0;
  int safe = 0;
  int diverged = 0;
  double horizon = 0.0;  // steps or time units actually simulated
  struct Violation {
    int run = -1;
    int step = -1;
    Eigen::VectorXd state;
  };
  std::optional<Violation> first_violation;
};

struct SafetyReport {
  ConditionReport conditions;
  MonteCarloReport monte_carlo;
  uint64_t seed = 0;
  double tol = 0.0;
  bool pass() const {
    return conditions.pass && monte_carlo.safe == monte_carlo.runs &&
           monte_carlo.diverged == 0;
  }
};

struct CheckOptions {
  int samples = 10000;
  int omega_draws = 32;        // admissible-model rejection draws
  int disturbance_draws = 16;  // per sampled state, boundary + interior mix
  double tol_scale = 1e-6;     // tol = tol_scale * gamma_u
};

// Samples conditions (4a)/(4b)/(4c) or their continuous-time analogues.
// Admissible models are drawn by rejection around the nominal matrix; the
// true matrix is used as fallback (and always included when provided).
ConditionReport check_conditions(const Certificate& cert, const SafetySets& sets,
                                 const NoiseSpec& noise, const Dictionaries& dicts,
                                 const ConformitySet* dc, const PhysicsSet* pi,
                                 const LiftedSystem* truth, Rng rng,
                                 const CheckOptions& opts = {});

struct MonteCarloOptions {
  int runs = 200;
  double infinite_cap = 1000.0;  // steps (dt) or time units (ct)
  double ct_sample_time = 0.01;
  int ct_substeps = 10;
};

MonteCarloReport monte_carlo_safety(const Certificate& cert,
                                    const LiftedSystem& truth,
                                    const SafetySets& sets,
                                    const HorizonVerdict& verdict,
                                    const PerturbSpec& perturb,
                                    const NoiseSpec& noise, Rng rng,
                                    const MonteCarloOptions& opts = {});

// JSON serialization with fixed formatting so identical runs produce
// byte-identical files.
std::string certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const std::string& text);
std::string safety_report_to_json(const SafetyReport& report,
                                  const HorizonVerdict& verdict);

std::string horizon_to_string(const HorizonVerdict& v);

}  // namespace rcbc
