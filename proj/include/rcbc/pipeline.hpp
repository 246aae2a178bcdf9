#pragma once

#include "rcbc/config.hpp"

namespace rcbc {

// Outcome of one synthesis pipeline run (collect, lift, assemble, solve,
// recover, classify).
struct SynthRun {
  SolverOutcome::Status status = SolverOutcome::Status::numerical_failure;
  std::optional<Certificate> cert;
  std::optional<HorizonVerdict> verdict;
  double lambda_used = 0.0;
  double runtime_sec = 0.0;
  int iterations = 0;
  std::string message;
  TrajectoryData data;
  LiftedSystem truth;
};

SynthRun synthesize(const RunConfig& cfg);

// Condition sampling plus closed-loop Monte Carlo against the ground truth.
SafetyReport verify_certificate(const RunConfig& cfg, const Certificate& cert,
                                const HorizonVerdict& verdict);

struct SweepRow {
  std::string benchmark;
  std::string mode;
  std::optional<int> min_T;
  double lambda = 0.0;
  double gamma_i = 0.0, gamma_u = 0.0, delta = 0.0;
  std::string horizon;
  double runtime_sec = 0.0;
};

// Minimal feasible sample size for both modes on one shared trajectory.
std::vector<SweepRow> sweep(const RunConfig& cfg,
                            SweepStrategy strategy = SweepStrategy::gallop,
                            int jobs = 1);
std::string sweep_csv(const std::vector<SweepRow>& rows);

// CLI entry points; exit codes: 0 feasible/pass, 2 infeasible/fail,
// 1 operational error.
int cmd_synth(const std::string& config_path, const std::string& mode_override,
              int T_override, int64_t seed_override,
              const std::string& out_override);
int cmd_sweep(const std::string& config_path, int T_max_override, int jobs,
              int64_t seed_override, const std::string& out_override,
              const std::string& strategy);
int cmd_verify(const std::string& cert_path, const std::string& config_path,
               int64_t seed_override, const std::string& out_override);
int cmd_simulate(const std::string& cert_path, const std::string& config_path,
                 int runs_override, int64_t seed_override,
                 const std::string& out_override);

// Atomic file write (temp + rename).
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace rcbc
