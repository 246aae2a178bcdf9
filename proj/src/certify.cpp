#include "rcbc/certify.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace rcbc {

double Certificate::recovery_error() const {
  const int n = static_cast<int>(P.rows());
  double worst = (P * Pbar - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  worst = std::max(worst, std::abs(gamma_i * gamma_i_bar - 1.0));
  worst = std::max(worst, std::abs(gamma_u * gamma_u_bar - 1.0));
  worst = std::max(worst, std::abs(delta * delta_bar - 1.0));
  return worst;
}

Certificate recover(const SolverOutcome& outcome, const SynthesisProblem& prob,
                    uint64_t seed) {
  if (outcome.status != SolverOutcome::Status::feasible)
    throw std::invalid_argument("recover: outcome is not feasible");
  Certificate cert;
  cert.time_kind = prob.time_kind;
  cert.Pbar = 0.5 * (outcome.Pbar + outcome.Pbar.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cert.Pbar);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (lmin <= 0 || lmax / lmin > 1e12)
    throw std::runtime_error("recover: Pbar is numerically singular (cond " +
                             std::to_string(lmax / std::max(lmin, 1e-300)) + ")");
  Eigen::MatrixXd P = eig.eigenvectors() *
                      eig.eigenvalues().cwiseInverse().asDiagonal() *
                      eig.eigenvectors().transpose();
  cert.P = 0.5 * (P + P.transpose());
  cert.K = outcome.Kbar * cert.P;
  if (outcome.gamma_i_bar <= 0 || outcome.gamma_u_bar <= 0 || outcome.delta_bar <= 0)
    throw std::runtime_error("recover: nonpositive level variables");
  cert.gamma_i_bar = outcome.gamma_i_bar;
  cert.gamma_u_bar = outcome.gamma_u_bar;
  cert.delta_bar = outcome.delta_bar;
  cert.gamma_i = 1.0 / outcome.gamma_i_bar;
  cert.gamma_u = 1.0 / outcome.gamma_u_bar;
  cert.delta = 1.0 / outcome.delta_bar;
  cert.lambda = prob.time_kind == TimeKind::discrete ? prob.lambda : 0.0;
  cert.mu = prob.time_kind == TimeKind::discrete ? prob.mu : 0.0;
  cert.mode = prob.has_pi ? "pi" : "dd";
  cert.T_data = static_cast<int>(prob.kappas.size()) - (prob.has_pi ? 1 : 0);
  cert.seed = seed;
  if (!(cert.gamma_i < cert.gamma_u))
    throw std::runtime_error("recover: gamma_i >= gamma_u after inversion");
  return cert;
}

HorizonVerdict horizon_dt(const Certificate& cert) {
  if (cert.time_kind != TimeKind::discrete)
    throw std::invalid_argument("horizon_dt: certificate is continuous-time");
  HorizonVerdict v;
  const double gu = cert.gamma_u, gi = cert.gamma_i, lam = cert.lambda,
               del = cert.delta;
  std::ostringstream w;
  if (del <= gu * (1.0 - lam)) {
    v.kind = HorizonVerdict::Kind::infinite;
    w << "delta " << del << " <= gamma_u (1 - lambda) " << gu * (1.0 - lam);
    v.witness = w.str();
    return v;
  }
  // Largest integer horizon with delta <= (gamma_u - lambda^T gamma_i)
  // (1 - lambda) / (1 - lambda^T); the bound decreases monotonically in T.
  auto bound = [&](double T) {
    const double lT = std::pow(lam, T);
    return (gu - lT * gi) * (1.0 - lam) / (1.0 - lT);
  };
  if (del > bound(1.0)) {
    v.kind = HorizonVerdict::Kind::invalid;
    w << "delta " << del << " > one-step bound " << bound(1.0);
    v.witness = w.str();
    return v;
  }
  double lo = 1.0, hi = 2.0;
  while (del <= bound(hi) && hi < 1e12) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1.0) {
    const double mid = std::floor((lo + hi) / 2.0);
    if (del <= bound(mid)) lo = mid;
    else hi = mid;
  }
  v.kind = HorizonVerdict::Kind::finite;
  v.horizon = lo;
  w << "delta " << del << " <= bound(" << lo << ") " << bound(lo)
    << " and > bound(" << lo + 1 << ") " << bound(lo + 1);
  v.witness = w.str();
  return v;
}

HorizonVerdict horizon_ct(const Certificate& cert) {
  if (cert.time_kind != TimeKind::continuous)
    throw std::invalid_argument("horizon_ct: certificate is discrete-time");
  if (cert.delta <= 0) throw std::invalid_argument("horizon_ct: delta <= 0");
  HorizonVerdict v;
  v.kind = HorizonVerdict::Kind::finite;
  v.horizon = (cert.gamma_u - cert.gamma_i) / cert.delta;
  std::ostringstream w;
  w << "(gamma_u - gamma_i) / delta = (" << cert.gamma_u << " - " << cert.gamma_i
    << ") / " << cert.delta;
  v.witness = w.str();
  return v;
}

namespace {

// Draw from the boundary (or interior) of the weighted ball |Y w| = eps.
Eigen::VectorXd ball_draw(const NoiseSpec& noise, Rng& rng, bool boundary) {
  const int n = static_cast<int>(noise.Upsilon.cols());
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) {
    // Box-Muller
    const double u1 = std::max(rng.next_double(), 1e-300);
    const double u2 = rng.next_double();
    g(i) = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  Eigen::VectorXd dir = noise.Upsilon.colPivHouseholderQr().solve(g.normalized());
  const double y_norm = (noise.Upsilon * dir).norm();
  if (y_norm <= 0) return Eigen::VectorXd::Zero(n);
  double r = noise.eps_omega / y_norm;
  if (!boundary) r *= std::pow(rng.next_double(), 1.0 / n);
  return r * dir;
}

bool admissible(const Eigen::MatrixXd& Omega, const ConformitySet* dc,
                const PhysicsSet* pi, double tol) {
  auto check = [&](const Eigen::MatrixXd& block) {
    Eigen::MatrixXd H = membership_form(block, Omega);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, block.cwiseAbs().maxCoeff());
    return eig.eigenvalues().maxCoeff() <= tol * scale;
  };
  if (pi && !check(pi->block)) return false;
  if (dc)
    for (const auto& b : dc->blocks)
      if (!check(b)) return false;
  return true;
}

}  // namespace

ConditionReport check_conditions(const Certificate& cert, const SafetySets& sets,
                                 const NoiseSpec& noise, const Dictionaries& dicts,
                                 const ConformitySet* dc, const PhysicsSet* pi,
                                 const LiftedSystem* truth, Rng rng,
                                 const CheckOptions& opts) {
  ConditionReport rep;
  rep.samples = opts.samples;
  const double tol = opts.tol_scale * cert.gamma_u;
  const int n = static_cast<int>(cert.P.rows());

  // (4a): B <= gamma_i on the initial set.  B is convex, so the exact
  // maximum over a box sits at a corner; samples are kept for the record.
  double worst_a = std::numeric_limits<double>::infinity();
  for (const auto& box : sets.X_i) {
    for (long pattern = 0; pattern < (1L << n); ++pattern) {
      Eigen::VectorXd corner(n);
      for (int i = 0; i < n; ++i)
        corner(i) = (pattern >> i) & 1 ? box.hi(i) : box.lo(i);
      const double margin = cert.gamma_i - cert.barrier(corner);
      if (margin < worst_a) {
        worst_a = margin;
        rep.worst_initial_x = corner;
      }
    }
    for (int s = 0; s < opts.samples / std::max<size_t>(1, sets.X_i.size()); ++s) {
      Eigen::VectorXd x = box.sample(rng);
      const double margin = cert.gamma_i - cert.barrier(x);
      if (margin < worst_a) {
        worst_a = margin;
        rep.worst_initial_x = x;
      }
    }
  }
  rep.margin_initial = worst_a;

  // (4b): B >= gamma_u on every unsafe region; projected gradient descent
  // refines the sampled minimum of the convex quadratic over each box.
  double worst_b = std::numeric_limits<double>::infinity();
  for (const auto& box : sets.X_u) {
    Eigen::VectorXd best = box.center();
    double bestv = cert.barrier(best);
    for (int s = 0; s < opts.samples / std::max<size_t>(1, sets.X_u.size()); ++s) {
      Eigen::VectorXd x = box.sample(rng);
      const double v = cert.barrier(x);
      if (v < bestv) {
        bestv = v;
        best = x;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cert.P, Eigen::EigenvaluesOnly);
    const double step = 1.0 / (2.0 * eig.eigenvalues().maxCoeff());
    Eigen::VectorXd x = best;
    for (int it = 0; it < 200; ++it) {
      x -= step * 2.0 * (cert.P * x);
      x = x.cwiseMax(box.lo).cwiseMin(box.hi);
    }
    if (cert.barrier(x) < bestv) {
      bestv = cert.barrier(x);
      best = x;
    }
    const double margin = bestv - cert.gamma_u;
    if (margin < worst_b) {
      worst_b = margin;
      rep.worst_unsafe_x = best;
    }
  }
  rep.margin_unsafe = worst_b;

  // Admissible system matrices: rejection sampling around the nominal matrix,
  // with the true matrix as a guaranteed member when available.
  std::vector<Eigen::MatrixXd> models;
  if (truth) {
    models.push_back(truth->Omega);
  }
  if (pi) {
    Rng mrng = rng.substream(Rng::stream_id("model-draws"));
    const int rows = static_cast<int>(pi->Omega_tilde.rows());
    const int cols = static_cast<int>(pi->Omega_tilde.cols());
    // Radius heuristic keeps acceptance reasonable under the spectral bound.
    const double radius = pi->eps_Omega / std::sqrt(static_cast<double>(rows * cols));
    for (int d = 0; d < opts.omega_draws; ++d) {
      Eigen::MatrixXd cand = pi->Omega_tilde;
      const double shrink = mrng.next_double();
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
          cand(i, j) += shrink * mrng.uniform(-radius, radius);
      if (admissible(cand, dc, pi, 1e-12)) models.push_back(cand);
    }
  }
  rep.admissible_models = static_cast<int>(models.size());
  rep.used_truth_fallback = models.size() == (truth ? 1u : 0u);

  // (4c)/(39c): decrease condition over sampled states below the unsafe
  // level, admissible models, and boundary + interior disturbances.
  double worst_c = std::numeric_limits<double>::infinity();
  if (!models.empty()) {
    Controller ctrl = cert.controller();
    const int per_state = std::max(1, opts.disturbance_draws);
    int tested = 0;
    for (int s = 0; s < opts.samples && tested < opts.samples; ++s) {
      Eigen::VectorXd x = sets.X.sample(rng);
      const double bx = cert.barrier(x);
      if (bx >= cert.gamma_u) continue;
      ++tested;
      const Eigen::MatrixXd& Om = models[tested % models.size()];
      Eigen::VectorXd u = ctrl.input(x);
      for (int dw = 0; dw < per_state; ++dw) {
        Eigen::VectorXd w = ball_draw(noise, rng, dw % 2 == 0);
        double margin;
        if (cert.time_kind == TimeKind::discrete) {
          Eigen::VectorXd lifted(Om.cols());
          std::vector<double> xv(x.data(), x.data() + n);
          std::vector<double> mv = dicts.M.eval(xv);
          for (int i = 0; i < dicts.M.size(); ++i) lifted(i) = mv[i];
          lifted.tail(Om.cols() - dicts.M.size()) = dicts.Q.eval(x) * u;
          Eigen::VectorXd xn = Om * lifted + w;
          margin = cert.lambda * bx + cert.delta - cert.barrier(xn);
        } else {
          Eigen::VectorXd lifted(Om.cols());
          std::vector<double> xv(x.data(), x.data() + n);
          std::vector<double> mv = dicts.M.eval(xv);
          for (int i = 0; i < dicts.M.size(); ++i) lifted(i) = mv[i];
          lifted.tail(Om.cols() - dicts.M.size()) = dicts.Q.eval(x) * u;
          Eigen::VectorXd xdot = Om * lifted + w;
          const double lie = 2.0 * x.dot(cert.P * xdot);
          margin = cert.delta - lie;
        }
        if (margin < worst_c) {
          worst_c = margin;
          rep.worst_decrease_x = x;
        }
      }
    }
  }
  rep.margin_decrease = worst_c;

  // A certificate whose recovery identities fail is rejected outright.
  const bool recovery_ok = cert.recovery_error() <= 1e-8;
  rep.pass = recovery_ok && rep.margin_initial >= -tol &&
             rep.margin_unsafe >= -tol && rep.margin_decrease >= -tol;
  return rep;
}

MonteCarloReport monte_carlo_safety(const Certificate& cert,
                                    const LiftedSystem& truth,
                                    const SafetySets& sets,
                                    const HorizonVerdict& verdict,
                                    const PerturbSpec& perturb,
                                    const NoiseSpec& noise, Rng rng,
                                    const MonteCarloOptions& opts) {
  MonteCarloReport rep;
  rep.runs = opts.runs;
  double horizon = opts.infinite_cap;
  if (verdict.kind == HorizonVerdict::Kind::finite)
    horizon = std::min(verdict.horizon, opts.infinite_cap);
  rep.horizon = horizon;

  DisturbanceSampler dist(perturb, noise, truth.n);
  Controller ctrl = cert.controller();
  for (int run = 0; run < opts.runs; ++run) {
    Rng run_rng = rng.substream(run + 1);
    const Box& box = sets.X_i[run % sets.X_i.size()];
    Eigen::VectorXd x0 = box.sample(run_rng);
    SimResult sim;
    if (truth.time_kind == TimeKind::discrete) {
      sim = simulate_closed_loop(truth, ctrl, x0, static_cast<int>(horizon),
                                 dist, run_rng.substream(7));
    } else {
      IntegrationConfig integ;
      integ.sample_time = opts.ct_sample_time;
      integ.substeps = opts.ct_substeps;
      const int steps = static_cast<int>(std::ceil(horizon / opts.ct_sample_time));
      sim = simulate_closed_loop(truth, ctrl, x0, steps, dist,
                                 run_rng.substream(7), integ);
    }
    if (sim.diverged) {
      ++rep.diverged;
      continue;
    }
    bool safe = true;
    for (int k = 0; k < sim.states.cols() && safe; ++k)
      for (const auto& ub : sets.X_u)
        if (ub.contains(sim.states.col(k))) {
          safe = false;
          if (!rep.first_violation) {
            MonteCarloReport::Violation v;
            v.run = run;
            v.step = k;
            v.state = sim.states.col(k);
            rep.first_violation = v;
          }
          break;
        }
    if (safe) ++rep.safe;
  }
  return rep;
}

namespace {

nlohmann::json mat_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

Eigen::MatrixXd mat_from(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

nlohmann::json poly_matrix_json(const PolyMatrix& pm) {
  nlohmann::json entries = nlohmann::json::array();
  for (int r = 0; r < pm.rows(); ++r)
    for (int c = 0; c < pm.cols(); ++c)
      for (const auto& [e, coeff] : pm.at(r, c).terms()) {
        nlohmann::json t;
        t["row"] = r;
        t["col"] = c;
        t["expo"] = e;
        t["coeff"] = coeff;
        entries.push_back(t);
      }
  nlohmann::json out;
  out["rows"] = pm.rows();
  out["cols"] = pm.cols();
  out["n_vars"] = pm.n_vars();
  out["terms"] = entries;
  return out;
}

PolyMatrix poly_matrix_from(const nlohmann::json& j) {
  PolyMatrix pm(j.at("rows").get<int>(), j.at("cols").get<int>(),
                j.at("n_vars").get<int>());
  for (const auto& t : j.at("terms"))
    pm.at(t.at("row").get<int>(), t.at("col").get<int>())
        .add_term(t.at("expo").get<Expo>(), t.at("coeff").get<double>());
  return pm;
}

}  // namespace

std::string certificate_to_json(const Certificate& cert) {
  nlohmann::json j;
  j["time_kind"] = cert.time_kind == TimeKind::discrete ? "discrete" : "continuous";
  j["P"] = mat_json(cert.P);
  j["Pbar"] = mat_json(cert.Pbar);
  j["K"] = poly_matrix_json(cert.K);
  j["gamma_i"] = cert.gamma_i;
  j["gamma_u"] = cert.gamma_u;
  j["delta"] = cert.delta;
  j["gamma_i_bar"] = cert.gamma_i_bar;
  j["gamma_u_bar"] = cert.gamma_u_bar;
  j["delta_bar"] = cert.delta_bar;
  j["lambda"] = cert.lambda;
  j["mu"] = cert.mu;
  j["mode"] = cert.mode;
  j["T_data"] = cert.T_data;
  j["seed"] = cert.seed;
  return j.dump(1);
}

Certificate certificate_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Certificate cert;
  cert.time_kind =
      j.at("time_kind") == "discrete" ? TimeKind::discrete : TimeKind::continuous;
  cert.P = mat_from(j.at("P"));
  cert.Pbar = mat_from(j.at("Pbar"));
  cert.K = poly_matrix_from(j.at("K"));
  cert.gamma_i = j.at("gamma_i").get<double>();
  cert.gamma_u = j.at("gamma_u").get<double>();
  cert.delta = j.at("delta").get<double>();
  cert.gamma_i_bar = j.at("gamma_i_bar").get<double>();
  cert.gamma_u_bar = j.at("gamma_u_bar").get<double>();
  cert.delta_bar = j.at("delta_bar").get<double>();
  cert.lambda = j.at("lambda").get<double>();
  cert.mu = j.at("mu").get<double>();
  cert.mode = j.at("mode").get<std::string>();
  cert.T_data = j.at("T_data").get<int>();
  cert.seed = j.at("seed").get<uint64_t>();
  return cert;
}

std::string horizon_to_string(const HorizonVerdict& v) {
  switch (v.kind) {
    case HorizonVerdict::Kind::infinite:
      return "infinite";
    case HorizonVerdict::Kind::finite:
      return "finite(" + std::to_string(static_cast<long long>(v.horizon)) + ")";
    default:
      return "invalid";
  }
}

std::string safety_report_to_json(const SafetyReport& report,
                                  const HorizonVerdict& verdict) {
  nlohmann::json j;
  j["horizon"] = horizon_to_string(verdict);
  j["horizon_value"] = verdict.horizon;
  j["horizon_witness"] = verdict.witness;
  j["seed"] = report.seed;
  j["tol"] = report.tol;
  j["conditions"] = {
      {"margin_initial", report.conditions.margin_initial},
      {"margin_unsafe", report.conditions.margin_unsafe},
      {"margin_decrease", report.conditions.margin_decrease},
      {"samples", report.conditions.samples},
      {"admissible_models", report.conditions.admissible_models},
      {"used_truth_fallback", report.conditions.used_truth_fallback},
      {"pass", report.conditions.pass},
  };
  j["monte_carlo"] = {
      {"runs", report.monte_carlo.runs},
      {"safe", report.monte_carlo.safe},
      {"diverged", report.monte_carlo.diverged},
      {"horizon", report.monte_carlo.horizon},
  };
  if (report.monte_carlo.first_violation) {
    const auto& v = *report.monte_carlo.first_violation;
    nlohmann::json vj;
    vj["run"] = v.run;
    vj["step"] = v.step;
    vj["state"] = std::vector<double>(v.state.data(), v.state.data() + v.state.size());
    j["monte_carlo"]["first_violation"] = vj;
  }
  j["pass"] = report.pass();
  return j.dump(1);
}

}  // namespace rcbc
