#pragma once

#include <functional>
#include <optional>

#include "rcbc/builder.hpp"
#include "rcbc/data.hpp"

namespace rcbc {

enum class SynthMode { physics_informed, data_driven };
enum class DomainRelaxation { global, state_ball };

struct SynthesisConfig {
  double lambda = 0.99;  // dt contraction factor, fixed scalar per solve
  double mu = 0.002;     // dt Young's-inequality balance
  int deg_Kbar = 1;
  int deg_kappa = 2;  // even
  double r_i = 0.0, r_u = 0.0;
  bool require_infinite_horizon = false;  // dt only
  SynthMode mode = SynthMode::physics_informed;
  DomainRelaxation domain = DomainRelaxation::global;
  double r_X = 0.0;  // enforcement ball radius for state_ball
  double psd_margin = 1e-6;
  double gamma_gap = 1e-3;
  // Upper bound on delta_bar.  Discrete time is already capped through the
  // disturbance-margin LMI; continuous time admits arbitrarily large
  // delta_bar via unbounded feedback gain, so the cap keeps the maximization
  // bounded and the recovered gains finite.
  double delta_bar_cap = 1e4;
  SdpOptions solver;
};

struct Dictionaries {
  MonomialDict M;
  PolyMatrix Q;  // q x l
  PolyMatrix C;  // m x n with C(x) x = M(x)
};

// Assembled conic program plus the handles needed to read a solution back.
struct SynthesisProblem {
  SdpProblem sdp;
  TimeKind time_kind = TimeKind::discrete;
  int n = 0, l = 0, m = 0, q = 0;

  int pbar_block = -1;
  double pbar_margin = 0.0;
  VarRef gamma_i_bar, gamma_u_bar, delta_bar;
  std::optional<VarRef> sigma;  // state-ball multiplier
  std::vector<Expo> kbar_monos;
  std::vector<std::vector<std::vector<VarRef>>> kbar;  // [l][n][mono]
  std::vector<LinPoly> kappas;  // kappa_0 (PI, when present) then the T DC multipliers
  bool has_pi = false;
  std::vector<double> block_scales;  // applied to N^PI / N^DC_j before assembly
  LinPolyMat master;
  int master_gram_block = -1;
  int master_half_degree = 0;

  double lambda = 0.0, mu = 0.0;
  SynthesisConfig cfg;
};

// Theorem-2 style program for discrete time.  pi may be null (purely
// data-driven ablation, the kappa_0 term is omitted).
SynthesisProblem assemble_dt(const ConformitySet& dc, const PhysicsSet* pi,
                             const Dictionaries& dicts, const NoiseSpec& noise,
                             const SynthesisConfig& cfg);

// Theorem-4 style program for continuous time.
SynthesisProblem assemble_ct(const ConformitySet& dc, const PhysicsSet* pi,
                             const Dictionaries& dicts, const NoiseSpec& noise,
                             const SynthesisConfig& cfg);

struct SolverOutcome {
  enum class Status { feasible, infeasible, numerical_failure };
  Status status = Status::numerical_failure;
  SdpSolution sol;

  Eigen::MatrixXd Pbar;
  double gamma_i_bar = 0.0, gamma_u_bar = 0.0, delta_bar = 0.0;
  double sigma = 0.0;
  PolyMatrix Kbar;
  std::vector<Polynomial> kappas;
  std::string message;
};

// Pluggable PSD-cone backend; "native" is the shipped interior-point method.
using SdpBackend = std::function<SdpSolution(const SdpProblem&, const SdpOptions&)>;
SdpBackend get_backend(const std::string& name);

// Solves and audits; feasible outcomes carry the recovered variable values.
SolverOutcome solve(const SynthesisProblem& prob,
                    const SdpBackend& backend = get_backend("native"));

// Reconstructs y' M(x) y from the solved Gram matrix and reports the largest
// relative coefficient mismatch against the assembled master matrix.
double sos_roundtrip_error(const SynthesisProblem& prob, const SdpSolution& sol);

struct LambdaSearchResult {
  std::optional<double> lambda;
  SolverOutcome outcome;
  std::vector<std::pair<double, SolverOutcome::Status>> log;
};

enum class LambdaStop { first_feasible, best_delta };

LambdaSearchResult lambda_search(
    const std::function<SynthesisProblem(double)>& assemble,
    const std::vector<double>& grid, LambdaStop stop,
    const SdpBackend& backend = get_backend("native"));

enum class SweepStrategy { linear, gallop };

struct MinFeasibleResult {
  std::optional<int> min_T;
  SolverOutcome outcome;  // at min_T when found
  std::vector<std::pair<int, SolverOutcome::Status>> log;
};

// Smallest prefix length T of the given trajectory for which the synthesis
// program is feasible.  Feasibility is monotone in T (extra S-procedure
// blocks never hurt), which the gallop strategy exploits.
MinFeasibleResult min_feasible_T(
    const TrajectoryData& full, const Dictionaries& dicts,
    const NoiseSpec& noise, const PhysicsSet* pi, const SynthesisConfig& cfg,
    int T_max, SweepStrategy strategy = SweepStrategy::gallop,
    const SdpBackend& backend = get_backend("native"));

// Prefix view of a trajectory (first T columns).
TrajectoryData prefix(const TrajectoryData& data, int T);

}  // namespace rcbc
