// Command-line front end: synthesis, sample-complexity sweeps, certificate
// verification and closed-loop simulation export.

#include <CLI11.hpp>
#include <cstdlib>

#include "rcbc/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"robust control barrier certificate synthesis from data"};
  app.require_subcommand(1);

  std::string config, cert, mode, out, strategy;
  int T = 0, T_max = 0, jobs = 1, runs = 0;
  int64_t seed = -1;

  auto* synth = app.add_subcommand("synth", "synthesize a certificate");
  synth->add_option("config", config, "run config (JSON)")->required();
  synth->add_option("--mode", mode, "pi or dd");
  synth->add_option("--T", T, "trajectory length override");
  synth->add_option("--seed", seed, "seed override");
  synth->add_option("--out", out, "output directory override");

  auto* sweep = app.add_subcommand("sweep", "minimal sample size, pi vs dd");
  sweep->add_option("config", config, "run config (JSON)")->required();
  sweep->add_option("--T-max", T_max, "largest trajectory length");
  sweep->add_option("--jobs", jobs, "parallel solves");
  sweep->add_option("--seed", seed, "seed override");
  sweep->add_option("--out", out, "output directory override");
  sweep->add_option("--strategy", strategy, "gallop (default) or linear");

  auto* verify = app.add_subcommand("verify", "check a certificate");
  verify->add_option("certificate", cert, "certificate JSON")->required();
  verify->add_option("config", config, "run config (JSON)")->required();
  verify->add_option("--seed", seed, "seed override");
  verify->add_option("--out", out, "output directory override");

  auto* simulate = app.add_subcommand("simulate", "export closed-loop runs");
  simulate->add_option("certificate", cert, "certificate JSON")->required();
  simulate->add_option("config", config, "run config (JSON)")->required();
  simulate->add_option("--runs", runs, "number of trajectories");
  simulate->add_option("--seed", seed, "seed override");
  simulate->add_option("--out", out, "output directory override");

  CLI11_PARSE(app, argc, argv);

  // Backend selection is environment driven; only the native interior-point
  // method ships, but the hook keeps external backends pluggable.
  if (const char* backend = std::getenv("RCBC_SDP_BACKEND")) {
    try {
      rcbc::get_backend(backend);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }

  if (synth->parsed()) return rcbc::cmd_synth(config, mode, T, seed, out);
  if (sweep->parsed())
    return rcbc::cmd_sweep(config, T_max, jobs, seed, out, strategy);
  if (verify->parsed()) return rcbc::cmd_verify(cert, config, seed, out);
  if (simulate->parsed())
    return rcbc::cmd_simulate(cert, config, runs, seed, out);
  return 1;
}
