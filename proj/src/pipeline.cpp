#include "rcbc/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace rcbc {

namespace {

namespace fs = std::filesystem;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

TrajectoryData collect(const RunConfig& cfg, const LiftedSystem& truth, int T) {
  DisturbanceSampler dist(cfg.perturb, cfg.noise, truth.n);
  InputPolicy policy = cfg.collection.policy();
  Rng rng(cfg.seed, Rng::stream_id("collect"));
  if (truth.time_kind == TimeKind::discrete)
    return collect_dt(truth, cfg.collection.x0, policy, T, dist, rng);
  return collect_ct(truth, cfg.collection.x0, policy, T, cfg.collection.tau,
                    dist, cfg.noise, rng, cfg.collection.substeps);
}

SolverOutcome solve_for_data(const RunConfig& cfg, const TrajectoryData& data,
                             double* lambda_used) {
  Dictionaries dicts = cfg.dictionaries();
  LiftedData lifted = lift(data, dicts.M, dicts.Q);
  ConformitySet dc = dc_blocks(data, lifted, cfg.noise);
  PhysicsSet pi = pi_block(cfg.nominal.Omega, cfg.eps_Omega, cfg.noise);
  const PhysicsSet* pi_ptr =
      cfg.mode == SynthMode::physics_informed ? &pi : nullptr;

  if (data.time_kind == TimeKind::continuous) {
    *lambda_used = 0.0;
    return solve(assemble_ct(dc, pi_ptr, dicts, cfg.noise, cfg.synth));
  }
  if (cfg.lambda_grid.empty()) {
    *lambda_used = cfg.synth.lambda;
    return solve(assemble_dt(dc, pi_ptr, dicts, cfg.noise, cfg.synth));
  }
  auto assemble = [&](double lam) {
    SynthesisConfig s = cfg.synth;
    s.lambda = lam;
    return assemble_dt(dc, pi_ptr, dicts, cfg.noise, s);
  };
  LambdaSearchResult res =
      lambda_search(assemble, cfg.lambda_grid, LambdaStop::first_feasible);
  if (res.lambda) {
    *lambda_used = *res.lambda;
    return std::move(res.outcome);
  }
  *lambda_used = cfg.lambda_grid.back();
  SolverOutcome none;
  none.status = SolverOutcome::Status::infeasible;
  std::ostringstream msg;
  msg << "no feasible lambda in the grid;";
  for (const auto& [lam, st] : res.log)
    msg << " " << lam << ":"
        << (st == SolverOutcome::Status::infeasible ? "infeasible" : "failure");
  none.message = msg.str();
  return none;
}

SynthesisProblem reassemble(const RunConfig& cfg, const TrajectoryData& data,
                            double lambda_used) {
  Dictionaries dicts = cfg.dictionaries();
  LiftedData lifted = lift(data, dicts.M, dicts.Q);
  ConformitySet dc = dc_blocks(data, lifted, cfg.noise);
  PhysicsSet pi = pi_block(cfg.nominal.Omega, cfg.eps_Omega, cfg.noise);
  const PhysicsSet* pi_ptr =
      cfg.mode == SynthMode::physics_informed ? &pi : nullptr;
  SynthesisConfig s = cfg.synth;
  if (data.time_kind == TimeKind::discrete) s.lambda = lambda_used;
  return data.time_kind == TimeKind::discrete
             ? assemble_dt(dc, pi_ptr, dicts, cfg.noise, s)
             : assemble_ct(dc, pi_ptr, dicts, cfg.noise, s);
}

}  // namespace

SynthRun synthesize(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  SynthRun run;
  run.truth = perturb_truth(cfg.nominal, cfg.perturb);
  run.data = collect(cfg, run.truth, cfg.T);

  double lambda_used = cfg.synth.lambda;
  SolverOutcome outcome = solve_for_data(cfg, run.data, &lambda_used);
  run.status = outcome.status;
  run.lambda_used = lambda_used;
  run.iterations = outcome.sol.iterations;
  run.message = outcome.message.empty() ? outcome.sol.message : outcome.message;
  if (outcome.status == SolverOutcome::Status::feasible) {
    SynthesisProblem prob = reassemble(cfg, run.data, lambda_used);
    run.cert = recover(outcome, prob, cfg.seed);
    run.verdict = run.cert->time_kind == TimeKind::discrete
                      ? horizon_dt(*run.cert)
                      : horizon_ct(*run.cert);
  }
  run.runtime_sec = seconds_since(t0);
  return run;
}

SafetyReport verify_certificate(const RunConfig& cfg, const Certificate& cert,
                                const HorizonVerdict& verdict) {
  SafetyReport report;
  report.seed = cfg.seed;
  report.tol = 1e-6 * cert.gamma_u;

  LiftedSystem truth = perturb_truth(cfg.nominal, cfg.perturb);
  Dictionaries dicts = cfg.dictionaries();
  TrajectoryData data = collect(cfg, truth, std::max(cert.T_data, 1));
  LiftedData lifted = lift(data, dicts.M, dicts.Q);
  ConformitySet dc = dc_blocks(data, lifted, cfg.noise);
  PhysicsSet pi = pi_block(cfg.nominal.Omega, cfg.eps_Omega, cfg.noise);

  CheckOptions copts;
  copts.samples = cfg.verification.samples;
  copts.omega_draws = cfg.verification.omega_draws;
  copts.disturbance_draws = cfg.verification.disturbance_draws;
  report.conditions = check_conditions(
      cert, cfg.sets, cfg.noise, dicts, &dc, &pi, &truth,
      Rng(cfg.seed, Rng::stream_id("check")), copts);

  MonteCarloOptions mopts;
  mopts.runs = cfg.verification.runs;
  mopts.infinite_cap = cfg.verification.infinite_cap;
  mopts.ct_sample_time = cfg.verification.ct_sample_time;
  report.monte_carlo =
      monte_carlo_safety(cert, truth, cfg.sets, verdict, cfg.perturb, cfg.noise,
                         Rng(cfg.seed, Rng::stream_id("mc")), mopts);
  return report;
}

std::vector<SweepRow> sweep(const RunConfig& cfg, SweepStrategy strategy,
                            int jobs) {
  LiftedSystem truth = perturb_truth(cfg.nominal, cfg.perturb);
  TrajectoryData data = collect(cfg, truth, cfg.T_max);
  Dictionaries dicts = cfg.dictionaries();
  PhysicsSet pi = pi_block(cfg.nominal.Omega, cfg.eps_Omega, cfg.noise);

  auto run_mode = [&](SynthMode mode) {
    const auto t0 = std::chrono::steady_clock::now();
    SynthesisConfig s = cfg.synth;
    s.mode = mode;
    MinFeasibleResult res = min_feasible_T(
        data, dicts, cfg.noise,
        mode == SynthMode::physics_informed ? &pi : nullptr, s, cfg.T_max,
        strategy);
    SweepRow row;
    row.benchmark = cfg.name;
    row.mode = mode == SynthMode::physics_informed ? "pi" : "dd";
    row.min_T = res.min_T;
    row.lambda = cfg.nominal.time_kind == TimeKind::discrete ? s.lambda : 0.0;
    row.runtime_sec = seconds_since(t0);
    if (res.min_T) {
      TrajectoryData pre = prefix(data, *res.min_T);
      RunConfig sub = cfg;
      sub.mode = mode;
      SynthesisProblem prob = reassemble(sub, pre, s.lambda);
      Certificate cert = recover(res.outcome, prob, cfg.seed);
      row.gamma_i = cert.gamma_i;
      row.gamma_u = cert.gamma_u;
      row.delta = cert.delta;
      HorizonVerdict v = cert.time_kind == TimeKind::discrete ? horizon_dt(cert)
                                                              : horizon_ct(cert);
      row.horizon = horizon_to_string(v);
    } else {
      row.horizon = "none";
    }
    return row;
  };

  std::vector<SweepRow> rows;
  if (jobs >= 2) {
    auto fut = std::async(std::launch::async, run_mode,
                          SynthMode::physics_informed);
    SweepRow dd = run_mode(SynthMode::data_driven);
    rows.push_back(fut.get());
    rows.push_back(dd);
  } else {
    rows.push_back(run_mode(SynthMode::physics_informed));
    rows.push_back(run_mode(SynthMode::data_driven));
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "benchmark,mode,min_T,lambda,gamma_i,gamma_u,delta,horizon,runtime_sec\n";
  for (const auto& r : rows) {
    os << r.benchmark << "," << r.mode << ",";
    if (r.min_T) os << *r.min_T;
    else os << "none";
    os << "," << r.lambda << "," << r.gamma_i << "," << r.gamma_u << ","
       << r.delta << "," << r.horizon << "," << r.runtime_sec << "\n";
  }
  return os.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + tmp);
    f << content;
  }
  fs::rename(tmp, path);
}

namespace {

RunConfig load_with_overrides(const std::string& config_path,
                              const std::string& mode_override, int T_override,
                              int64_t seed_override,
                              const std::string& out_override) {
  RunConfig cfg = load_config(config_path);
  if (!mode_override.empty()) {
    if (mode_override == "pi") cfg.mode = SynthMode::physics_informed;
    else if (mode_override == "dd") cfg.mode = SynthMode::data_driven;
    else throw std::runtime_error("unknown mode: " + mode_override);
    cfg.synth.mode = cfg.mode;
  }
  if (T_override > 0) cfg.T = T_override;
  if (seed_override >= 0) {
    cfg.seed = static_cast<uint64_t>(seed_override);
    cfg.perturb.seed = cfg.seed;
  }
  if (!out_override.empty()) cfg.out_dir = out_override;
  return cfg;
}

std::string result_json(const RunConfig& cfg, const SynthRun& run) {
  nlohmann::json j;
  j["status"] = run.status == SolverOutcome::Status::feasible      ? "feasible"
                : run.status == SolverOutcome::Status::infeasible ? "infeasible"
                                                                   : "numerical_failure";
  j["lambda"] = run.lambda_used;
  j["runtime_sec"] = run.runtime_sec;
  j["iterations"] = run.iterations;
  if (!run.message.empty()) j["message"] = run.message;
  if (run.cert) {
    j["gamma_i"] = run.cert->gamma_i;
    j["gamma_u"] = run.cert->gamma_u;
    j["delta"] = run.cert->delta;
    j["horizon"] = horizon_to_string(*run.verdict);
    j["horizon_witness"] = run.verdict->witness;
  }
  j["config"] = nlohmann::json::parse(config_to_json(cfg));
  return j.dump(1);
}

}  // namespace

int cmd_synth(const std::string& config_path, const std::string& mode_override,
              int T_override, int64_t seed_override,
              const std::string& out_override) {
  try {
    RunConfig cfg = load_with_overrides(config_path, mode_override, T_override,
                                        seed_override, out_override);
    SynthRun run = synthesize(cfg);
    const std::string base = cfg.out_dir + "/" + cfg.name;
    write_file_atomic(base + "_result.json", result_json(cfg, run));
    if (run.status == SolverOutcome::Status::feasible) {
      write_file_atomic(base + "_certificate.json",
                        certificate_to_json(*run.cert));
      std::cout << cfg.name << ": feasible, horizon "
                << horizon_to_string(*run.verdict) << ", lambda "
                << run.lambda_used << ", " << run.runtime_sec << " s\n";
      if (run.runtime_sec > 600.0)
        std::cerr << "warning: solve exceeded the 10 minute budget\n";
      return 0;
    }
    if (run.status == SolverOutcome::Status::infeasible) {
      std::cout << cfg.name << ": infeasible (" << run.message << ")\n";
      return 2;
    }
    std::cerr << cfg.name << ": numerical failure (" << run.message << ")\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_sweep(const std::string& config_path, int T_max_override, int jobs,
              int64_t seed_override, const std::string& out_override,
              const std::string& strategy_name) {
  try {
    RunConfig cfg = load_with_overrides(config_path, "", 0, seed_override,
                                        out_override);
    if (T_max_override > 0) cfg.T_max = T_max_override;
    SweepStrategy strategy = SweepStrategy::gallop;
    if (strategy_name == "linear") strategy = SweepStrategy::linear;
    else if (!strategy_name.empty() && strategy_name != "gallop")
      throw std::runtime_error("unknown sweep strategy: " + strategy_name);
    std::vector<SweepRow> rows = sweep(cfg, strategy, jobs);
    const std::string path = cfg.out_dir + "/" + cfg.name + "_sweep.csv";
    write_file_atomic(path, sweep_csv(rows));
    std::cout << sweep_csv(rows);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_verify(const std::string& cert_path, const std::string& config_path,
               int64_t seed_override, const std::string& out_override) {
  try {
    RunConfig cfg = load_with_overrides(config_path, "", 0, seed_override,
                                        out_override);
    std::ifstream f(cert_path);
    if (!f) throw std::runtime_error("cannot open certificate " + cert_path);
    std::stringstream ss;
    ss << f.rdbuf();
    Certificate cert = certificate_from_json(ss.str());
    HorizonVerdict verdict = cert.time_kind == TimeKind::discrete
                                 ? horizon_dt(cert)
                                 : horizon_ct(cert);
    SafetyReport report = verify_certificate(cfg, cert, verdict);
    const std::string path = cfg.out_dir + "/" + cfg.name + "_safety.json";
    write_file_atomic(path, safety_report_to_json(report, verdict));
    std::cout << cfg.name << ": conditions "
              << (report.conditions.pass ? "pass" : "FAIL") << ", monte carlo "
              << report.monte_carlo.safe << "/" << report.monte_carlo.runs
              << " safe\n";
    return report.pass() ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_simulate(const std::string& cert_path, const std::string& config_path,
                 int runs_override, int64_t seed_override,
                 const std::string& out_override) {
  try {
    RunConfig cfg = load_with_overrides(config_path, "", 0, seed_override,
                                        out_override);
    if (runs_override > 0) cfg.verification.runs = runs_override;
    std::ifstream f(cert_path);
    if (!f) throw std::runtime_error("cannot open certificate " + cert_path);
    std::stringstream ss;
    ss << f.rdbuf();
    Certificate cert = certificate_from_json(ss.str());
    HorizonVerdict verdict = cert.time_kind == TimeKind::discrete
                                 ? horizon_dt(cert)
                                 : horizon_ct(cert);

    LiftedSystem truth = perturb_truth(cfg.nominal, cfg.perturb);
    DisturbanceSampler dist(cfg.perturb, cfg.noise, truth.n);
    Controller ctrl = cert.controller();
    double horizon = cfg.verification.infinite_cap;
    if (verdict.kind == HorizonVerdict::Kind::finite)
      horizon = std::min(verdict.horizon, cfg.verification.infinite_cap);

    Rng rng(cfg.seed, Rng::stream_id("simulate"));
    const std::string dir = cfg.out_dir + "/" + cfg.name + "_trajectories";
    fs::create_directories(dir);
    for (int run = 0; run < cfg.verification.runs; ++run) {
      Rng run_rng = rng.substream(run + 1);
      Eigen::VectorXd x0 = cfg.sets.X_i[run % cfg.sets.X_i.size()].sample(run_rng);
      SimResult sim;
      if (truth.time_kind == TimeKind::discrete) {
        sim = simulate_closed_loop(truth, ctrl, x0, static_cast<int>(horizon),
                                   dist, run_rng.substream(7));
      } else {
        IntegrationConfig integ;
        integ.sample_time = cfg.verification.ct_sample_time;
        const int steps =
            static_cast<int>(std::ceil(horizon / integ.sample_time));
        sim = simulate_closed_loop(truth, ctrl, x0, steps, dist,
                                   run_rng.substream(7), integ);
      }
      write_trajectory_csv(dir + "/run_" + std::to_string(run) + ".csv", sim,
                           truth.time_kind);
    }

    // Plot data: level-set ellipsoids from the eigendecomposition of P plus
    // the box geometry; rendering happens elsewhere.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cert.P);
    nlohmann::json j;
    j["levels"] = {{"gamma_i", cert.gamma_i}, {"gamma_u", cert.gamma_u}};
    j["eigenvalues"] = std::vector<double>(
        eig.eigenvalues().data(),
        eig.eigenvalues().data() + eig.eigenvalues().size());
    nlohmann::json axes = nlohmann::json::array();
    for (int c = 0; c < eig.eigenvectors().cols(); ++c) {
      std::vector<double> v(eig.eigenvectors().col(c).data(),
                            eig.eigenvectors().col(c).data() + truth.n);
      axes.push_back(v);
    }
    j["axes"] = axes;
    nlohmann::json semi = nlohmann::json::array();
    for (int c = 0; c < truth.n; ++c)
      semi.push_back({{"gamma_i", std::sqrt(cert.gamma_i / eig.eigenvalues()(c))},
                      {"gamma_u", std::sqrt(cert.gamma_u / eig.eigenvalues()(c))}});
    j["semi_axes"] = semi;
    j["config"] = nlohmann::json::parse(config_to_json(cfg));
    write_file_atomic(cfg.out_dir + "/" + cfg.name + "_plot_data.json",
                      j.dump(1));
    std::cout << cfg.name << ": wrote " << cfg.verification.runs
              << " trajectories to " << dir << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace rcbc
