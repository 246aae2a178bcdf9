#include "rcbc/synth.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rcbc {

namespace {

// Shared scaffolding for both time settings: P-bar parameterization, level
// scalars with their margins, controller coefficients and multipliers.
struct Scaffold {
  SdpBuilder builder;
  std::vector<std::vector<LinExpr>> Pbar;  // n x n symmetric expressions
  VarRef gamma_i, gamma_u, delta;
  std::optional<VarRef> sigma;
  std::vector<Expo> kbar_monos;
  std::vector<std::vector<std::vector<VarRef>>> kbar;
  std::vector<LinPoly> kappas;
  std::vector<double> block_scales;
  int pbar_block = -1;
};

double block_scale(const Eigen::MatrixXd& N) {
  const double s = N.cwiseAbs().maxCoeff();
  return s > 0 ? s : 1.0;
}

Scaffold make_scaffold(int n, const SynthesisConfig& cfg) {
  Scaffold sc;
  auto& b = sc.builder;
  sc.pbar_block = b.add_psd_block(n, "Pbar");
  sc.Pbar.assign(n, std::vector<LinExpr>(n));
  for (int p = 0; p < n; ++p)
    for (int q = 0; q <= p; ++q) {
      LinExpr e = LinExpr::variable(b.psd_entry(sc.pbar_block, p, q));
      if (p == q) e.add_constant(cfg.psd_margin);
      sc.Pbar[p][q] = e;
      sc.Pbar[q][p] = e;
    }

  sc.gamma_i = b.add_nonneg("gamma_i_bar");
  sc.gamma_u = b.add_nonneg("gamma_u_bar");
  sc.delta = b.add_nonneg("delta_bar");

  // gamma_i_bar >= (1 + gap) gamma_u_bar
  {
    VarRef t = b.add_nonneg("gamma_gap_slack");
    LinExpr e = LinExpr::variable(sc.gamma_i);
    e -= LinExpr::variable(sc.gamma_u, 1.0 + cfg.gamma_gap);
    e -= LinExpr::variable(t);
    b.add_equality(e);
  }

  // delta_bar <= cap, written with unit coefficients: delta_bar/cap + t = 1.
  if (cfg.delta_bar_cap > 0) {
    VarRef t = b.add_nonneg("delta_cap_slack");
    LinExpr e = LinExpr::variable(sc.delta, 1.0 / cfg.delta_bar_cap);
    e += LinExpr::variable(t);
    e.add_constant(-1.0);
    b.add_equality(e);
  }

  // Scale normalization: trace(Pbar) = n pins the cone ray so that
  // maximizing delta_bar is bounded.
  {
    LinExpr e;
    for (int p = 0; p < n; ++p) e += sc.Pbar[p][p];
    e.add_constant(-static_cast<double>(n));
    b.add_equality(e);
  }

  if (cfg.domain == DomainRelaxation::state_ball) {
    if (!(cfg.r_X > 0))
      throw std::invalid_argument("state_ball relaxation needs r_X > 0");
    sc.sigma = b.add_nonneg("sigma_ball");
  }
  return sc;
}

// kappa_j(x) * N padded into the master matrix at the leading block.
void add_kappa_times_block(LinPolyMat& master, const LinPoly& kappa,
                           const Eigen::MatrixXd& N) {
  const int d = static_cast<int>(N.rows());
  for (int r = 0; r < d; ++r)
    for (int c = 0; c <= r; ++c) {
      if (N(r, c) == 0.0) continue;
      for (const auto& [mono, coeff] : kappa.terms())
        master.at(r, c).add_term(mono, coeff * N(r, c));
    }
}

// -sigma * (r_X^2 - |x|^2) / r_X^2 on every diagonal entry.
void add_ball_term(LinPolyMat& master, const Scaffold& sc, int n_vars,
                   double r_X) {
  if (!sc.sigma) return;
  const double r2 = r_X * r_X;
  for (int d = 0; d < master.dim(); ++d) {
    master.at(d, d).add_term(zero_expo(n_vars),
                             LinExpr::variable(*sc.sigma, -1.0));
    for (int v = 0; v < n_vars; ++v) {
      Expo e = zero_expo(n_vars);
      e[v] = 2;
      master.at(d, d).add_term(e, LinExpr::variable(*sc.sigma, 1.0 / r2));
    }
  }
}

void finish_common(Scaffold& sc, const Eigen::MatrixXd& Phi_inv, int n,
                   const SynthesisConfig& cfg) {
  auto& b = sc.builder;
  (void)Phi_inv;
  // Level-set conditions against the concentric norm bounds:
  //   Pbar - gamma_i_bar r_i^2 I >= 0,   gamma_u_bar r_u^2 I - Pbar >= 0.
  std::vector<std::vector<LinExpr>> lmi(n, std::vector<LinExpr>(n));
  for (int p = 0; p < n; ++p)
    for (int q = 0; q <= p; ++q) {
      LinExpr e = sc.Pbar[p][q];
      if (p == q) e.add(sc.gamma_i, -cfg.r_i * cfg.r_i);
      lmi[p][q] = e;
      lmi[q][p] = e;
    }
  b.add_lmi(lmi, "level_initial");
  for (int p = 0; p < n; ++p)
    for (int q = 0; q <= p; ++q) {
      LinExpr e = -sc.Pbar[p][q];
      if (p == q) e.add(sc.gamma_u, cfg.r_u * cfg.r_u);
      lmi[p][q] = e;
      lmi[q][p] = e;
    }
  b.add_lmi(lmi, "level_unsafe");
  b.maximize(sc.delta);
}

SynthesisProblem package(Scaffold&& sc, LinPolyMat&& master, TimeKind kind,
                         int n, int l, int m, int q, bool has_pi,
                         const SynthesisConfig& cfg) {
  SynthesisProblem out;
  const int half = (master.max_degree() + 1) / 2;
  out.master_gram_block = sc.builder.add_matrix_sos(master, half, "master_sos");
  out.master_half_degree = half;
  out.sdp = sc.builder.problem();
  out.time_kind = kind;
  out.n = n;
  out.l = l;
  out.m = m;
  out.q = q;
  out.pbar_block = sc.pbar_block;
  out.pbar_margin = cfg.psd_margin;
  out.gamma_i_bar = sc.gamma_i;
  out.gamma_u_bar = sc.gamma_u;
  out.delta_bar = sc.delta;
  out.sigma = sc.sigma;
  out.kbar_monos = sc.kbar_monos;
  out.kbar = sc.kbar;
  out.kappas = sc.kappas;
  out.has_pi = has_pi;
  out.block_scales = sc.block_scales;
  out.master = std::move(master);
  out.lambda = cfg.lambda;
  out.mu = cfg.mu;
  out.cfg = cfg;
  return out;
}

}  // namespace

SynthesisProblem assemble_dt(const ConformitySet& dc, const PhysicsSet* pi,
                             const Dictionaries& dicts, const NoiseSpec& noise,
                             const SynthesisConfig& cfg) {
  if (!(cfg.lambda > 0 && cfg.lambda < 1))
    throw std::invalid_argument("assemble_dt: lambda must lie in (0,1)");
  if (!(cfg.mu > 0)) throw std::invalid_argument("assemble_dt: mu must be > 0");
  if (cfg.deg_kappa % 2 != 0)
    throw std::invalid_argument("assemble_dt: deg_kappa must be even");
  if (!(cfg.r_i < cfg.r_u))
    throw std::invalid_argument("assemble_dt: requires r_i < r_u");

  const int n = dicts.C.cols();
  const int m = dicts.M.size();
  const int q = dicts.Q.rows();
  const int l = dicts.Q.cols();
  const int T = static_cast<int>(dc.blocks.size());
  const bool with_pi = pi != nullptr && cfg.mode == SynthMode::physics_informed;
  const Eigen::MatrixXd Phi_inv = noise.Phi_inv();

  Scaffold sc = make_scaffold(n, cfg);
  auto& b = sc.builder;

  // Controller coefficient variables.
  sc.kbar_monos = enumerate_monomials(n, 0, cfg.deg_Kbar);
  sc.kbar.assign(l, std::vector<std::vector<VarRef>>(n));
  for (int r = 0; r < l; ++r)
    for (int c = 0; c < n; ++c)
      for (size_t k = 0; k < sc.kbar_monos.size(); ++k)
        sc.kbar[r][c].push_back(b.add_free("Kbar"));

  // Disturbance margin (26a):
  //   Pbar - delta_bar (1 + 1/mu) eps_w^2 Phi^-1 >= 0.
  {
    const double coeff = (1.0 + 1.0 / cfg.mu) * noise.eps_omega * noise.eps_omega;
    std::vector<std::vector<LinExpr>> lmi(n, std::vector<LinExpr>(n));
    for (int p = 0; p < n; ++p)
      for (int qq = 0; qq <= p; ++qq) {
        LinExpr e = sc.Pbar[p][qq];
        e.add(sc.delta, -coeff * Phi_inv(p, qq));
        lmi[p][qq] = e;
        lmi[qq][p] = e;
      }
    b.add_lmi(lmi, "noise_margin");
  }

  if (cfg.require_infinite_horizon) {
    // delta_bar (1 - lambda) >= gamma_u_bar, the inverse form of the
    // infinite-horizon test.
    VarRef t = b.add_nonneg("horizon_slack");
    LinExpr e = LinExpr::variable(sc.delta, 1.0 - cfg.lambda);
    e -= LinExpr::variable(sc.gamma_u);
    e -= LinExpr::variable(t);
    b.add_equality(e);
  }

  // Multipliers.
  if (with_pi) {
    LinPoly kp;
    b.add_sos_poly(n, cfg.deg_kappa, kp, "kappa_pi");
    sc.kappas.push_back(kp);
  }
  for (int j = 0; j < T; ++j) {
    LinPoly kj;
    b.add_sos_poly(n, cfg.deg_kappa, kj, "kappa_dc");
    sc.kappas.push_back(kj);
  }

  // Master polynomial matrix of dimension 2n + m + q: leading block n, data
  // block m + q, trailing block n.
  const int D = 2 * n + m + q;
  LinPolyMat master(D, n);

  for (int p = 0; p < n; ++p)
    for (int qq = 0; qq <= p; ++qq)
      master.at(p, qq).add_term(zero_expo(n), sc.Pbar[p][qq] * cfg.lambda);

  size_t kappa_idx = 0;
  if (with_pi) {
    const double s = block_scale(pi->block);
    sc.block_scales.push_back(s);
    add_kappa_times_block(master, sc.kappas[kappa_idx++], pi->block / s);
  }
  for (int j = 0; j < T; ++j) {
    const double s = block_scale(dc.blocks[j]);
    sc.block_scales.push_back(s);
    add_kappa_times_block(master, sc.kappas[kappa_idx++], dc.blocks[j] / s);
  }

  // Coupling block rows n..n+m+q-1 against columns n+m+q..D-1:
  //   [-C(x) Pbar; -Q(x) Kbar(x)].
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) {
      LinPoly acc(n);
      for (int k = 0; k < n; ++k) {
        const Polynomial& crk = dicts.C.at(r, k);
        if (crk.is_zero()) continue;
        acc += LinPoly::scaled(crk * -1.0, sc.Pbar[k][c]);
      }
      master.at(n + r, n + m + q + c) += acc;
    }
  for (int r = 0; r < q; ++r)
    for (int c = 0; c < n; ++c) {
      LinPoly acc(n);
      for (int k = 0; k < l; ++k) {
        const Polynomial& qrk = dicts.Q.at(r, k);
        if (qrk.is_zero()) continue;
        for (size_t km = 0; km < sc.kbar_monos.size(); ++km) {
          Polynomial shifted = qrk * Polynomial::monomial(sc.kbar_monos[km], -1.0);
          acc += LinPoly::scaled(shifted, LinExpr::variable(sc.kbar[k][c][km]));
        }
      }
      master.at(n + m + r, n + m + q + c) += acc;
    }

  const double trail = 1.0 / (1.0 + cfg.mu);
  for (int p = 0; p < n; ++p)
    for (int qq = 0; qq <= p; ++qq)
      master.at(n + m + q + p, n + m + q + qq)
          .add_term(zero_expo(n), sc.Pbar[p][qq] * trail);

  add_ball_term(master, sc, n, cfg.r_X);
  finish_common(sc, Phi_inv, n, cfg);
  return package(std::move(sc), std::move(master), TimeKind::discrete, n, l, m,
                 q, with_pi, cfg);
}

SynthesisProblem assemble_ct(const ConformitySet& dc, const PhysicsSet* pi,
                             const Dictionaries& dicts, const NoiseSpec& noise,
                             const SynthesisConfig& cfg) {
  if (cfg.deg_kappa % 2 != 0)
    throw std::invalid_argument("assemble_ct: deg_kappa must be even");
  if (!(cfg.r_i < cfg.r_u))
    throw std::invalid_argument("assemble_ct: requires r_i < r_u");

  const int n = dicts.C.cols();
  const int m = dicts.M.size();
  const int q = dicts.Q.rows();
  const int l = dicts.Q.cols();
  const int T = static_cast<int>(dc.blocks.size());
  const bool with_pi = pi != nullptr && cfg.mode == SynthMode::physics_informed;
  const Eigen::MatrixXd Phi_inv = noise.Phi_inv();

  Scaffold sc = make_scaffold(n, cfg);
  auto& b = sc.builder;

  sc.kbar_monos = enumerate_monomials(n, 0, cfg.deg_Kbar);
  sc.kbar.assign(l, std::vector<std::vector<VarRef>>(n));
  for (int r = 0; r < l; ++r)
    for (int c = 0; c < n; ++c)
      for (size_t k = 0; k < sc.kbar_monos.size(); ++k)
        sc.kbar[r][c].push_back(b.add_free("Kbar"));

  if (with_pi) {
    LinPoly kp;
    b.add_sos_poly(n, cfg.deg_kappa, kp, "kappa_pi");
    sc.kappas.push_back(kp);
  }
  for (int j = 0; j < T; ++j) {
    LinPoly kj;
    b.add_sos_poly(n, cfg.deg_kappa, kj, "kappa_dc");
    sc.kappas.push_back(kj);
  }

  // Master matrix of dimension n + m + q:
  //   -N_cbc + kappa_0 N_pi + sum_j kappa_j N_dc  >= 0, with
  //   N_cbc = [[delta_bar eps_w^2 Phi^-1, [C Pbar; Q Kbar]'], [*, 0]].
  const int D = n + m + q;
  LinPolyMat master(D, n);

  const double eps2 = noise.eps_omega * noise.eps_omega;
  for (int p = 0; p < n; ++p)
    for (int qq = 0; qq <= p; ++qq)
      master.at(p, qq).add_term(zero_expo(n),
                                LinExpr::variable(sc.delta, -eps2 * Phi_inv(p, qq)));

  // -(C Pbar)' on rows 0..n-1 x cols n..n+m-1 and -(Q Kbar)' on cols n+m..D-1.
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) {
      LinPoly acc(n);
      for (int k = 0; k < n; ++k) {
        const Polynomial& crk = dicts.C.at(r, k);
        if (crk.is_zero()) continue;
        acc += LinPoly::scaled(crk * -1.0, sc.Pbar[k][c]);
      }
      master.at(n + r, c) += acc;
    }
  for (int r = 0; r < q; ++r)
    for (int c = 0; c < n; ++c) {
      LinPoly acc(n);
      for (int k = 0; k < l; ++k) {
        const Polynomial& qrk = dicts.Q.at(r, k);
        if (qrk.is_zero()) continue;
        for (size_t km = 0; km < sc.kbar_monos.size(); ++km) {
          Polynomial shifted = qrk * Polynomial::monomial(sc.kbar_monos[km], -1.0);
          acc += LinPoly::scaled(shifted, LinExpr::variable(sc.kbar[k][c][km]));
        }
      }
      master.at(n + m + r, c) += acc;
    }

  size_t kappa_idx = 0;
  if (with_pi) {
    const double s = block_scale(pi->block);
    sc.block_scales.push_back(s);
    add_kappa_times_block(master, sc.kappas[kappa_idx++], pi->block / s);
  }
  for (int j = 0; j < T; ++j) {
    const double s = block_scale(dc.blocks[j]);
    sc.block_scales.push_back(s);
    add_kappa_times_block(master, sc.kappas[kappa_idx++], dc.blocks[j] / s);
  }

  add_ball_term(master, sc, n, cfg.r_X);
  finish_common(sc, Phi_inv, n, cfg);
  return package(std::move(sc), std::move(master), TimeKind::continuous, n, l,
                 m, q, with_pi, cfg);
}

SdpBackend get_backend(const std::string& name) {
  if (name == "native" || name.empty())
    return [](const SdpProblem& p, const SdpOptions& o) { return solve_sdp(p, o); };
  throw std::invalid_argument("unknown SDP backend: " + name);
}

SolverOutcome solve(const SynthesisProblem& prob, const SdpBackend& backend) {
  SolverOutcome out;
  out.sol = backend(prob.sdp, prob.cfg.solver);
  switch (out.sol.status) {
    case SdpStatus::optimal: {
      SdpAudit audit = audit_solution(prob.sdp, out.sol);
      if (!audit.pass(1e-7)) {
        out.status = SolverOutcome::Status::numerical_failure;
        std::ostringstream msg;
        msg << "post-solve audit failed: eq residual " << audit.worst_eq_residual
            << ", min eig " << audit.worst_block_eig;
        out.message = msg.str();
        return out;
      }
      out.status = SolverOutcome::Status::feasible;
      break;
    }
    case SdpStatus::infeasible:
      out.status = SolverOutcome::Status::infeasible;
      out.message = out.sol.message;
      return out;
    case SdpStatus::unbounded:
    case SdpStatus::numerical_failure:
      out.status = SolverOutcome::Status::numerical_failure;
      out.message = out.sol.message;
      return out;
  }

  const int n = prob.n;
  out.Pbar = out.sol.X[prob.pbar_block] +
             prob.pbar_margin * Eigen::MatrixXd::Identity(n, n);
  out.gamma_i_bar = eval_linexpr(LinExpr::variable(prob.gamma_i_bar), out.sol);
  out.gamma_u_bar = eval_linexpr(LinExpr::variable(prob.gamma_u_bar), out.sol);
  out.delta_bar = eval_linexpr(LinExpr::variable(prob.delta_bar), out.sol);
  if (prob.sigma) out.sigma = eval_linexpr(LinExpr::variable(*prob.sigma), out.sol);
  out.Kbar = PolyMatrix(prob.l, n, n);
  for (int r = 0; r < prob.l; ++r)
    for (int c = 0; c < n; ++c)
      for (size_t k = 0; k < prob.kbar_monos.size(); ++k) {
        const double v =
            eval_linexpr(LinExpr::variable(prob.kbar[r][c][k]), out.sol);
        if (v != 0.0) out.Kbar.at(r, c).add_term(prob.kbar_monos[k], v);
      }
  for (const auto& kp : prob.kappas) out.kappas.push_back(eval_linpoly(kp, out.sol));
  return out;
}

double sos_roundtrip_error(const SynthesisProblem& prob, const SdpSolution& sol) {
  const int D = prob.master.dim();
  const int s_count = static_cast<int>(
      enumerate_monomials(prob.master.n_vars(), 0, prob.master_half_degree).size());
  const auto basis =
      enumerate_monomials(prob.master.n_vars(), 0, prob.master_half_degree);
  const Eigen::MatrixXd& G = sol.X[prob.master_gram_block];

  double worst = 0.0;
  for (int r = 0; r < D; ++r)
    for (int c = 0; c <= r; ++c) {
      // Reconstruct entry (r, c) from the Gram matrix.
      Polynomial rec(prob.master.n_vars());
      for (int k = 0; k < s_count; ++k)
        for (int ll = 0; ll < s_count; ++ll) {
          const double g = G(r * s_count + k, c * s_count + ll);
          if (g != 0.0) rec.add_term(add_expo(basis[k], basis[ll]), g);
        }
      Polynomial want = eval_linpoly(prob.master.at(r, c), sol);
      Polynomial diff = rec - want;
      const double scale = std::max({want.max_abs_coeff(), rec.max_abs_coeff(), 1.0});
      worst = std::max(worst, diff.max_abs_coeff() / scale);
    }
  return worst;
}

LambdaSearchResult lambda_search(
    const std::function<SynthesisProblem(double)>& assemble,
    const std::vector<double>& grid, LambdaStop stop, const SdpBackend& backend) {
  LambdaSearchResult res;
  double best_delta = -1.0;
  for (double lam : grid) {
    if (!(lam > 0 && lam < 1))
      throw std::invalid_argument("lambda_search: grid values must lie in (0,1)");
    SolverOutcome oc = solve(assemble(lam), backend);
    res.log.emplace_back(lam, oc.status);
    if (oc.status == SolverOutcome::Status::feasible) {
      if (stop == LambdaStop::first_feasible) {
        res.lambda = lam;
        res.outcome = std::move(oc);
        return res;
      }
      if (oc.delta_bar > best_delta) {
        best_delta = oc.delta_bar;
        res.lambda = lam;
        res.outcome = std::move(oc);
      }
    }
  }
  return res;
}

TrajectoryData prefix(const TrajectoryData& data, int T) {
  if (T < 1 || T > data.T())
    throw std::invalid_argument("prefix: T out of range");
  TrajectoryData out;
  out.time_kind = data.time_kind;
  out.tau = data.tau;
  out.x = data.x.leftCols(T);
  out.x_next = data.x_next.leftCols(T);
  out.u = data.u.leftCols(T);
  return out;
}

MinFeasibleResult min_feasible_T(const TrajectoryData& full,
                                 const Dictionaries& dicts,
                                 const NoiseSpec& noise, const PhysicsSet* pi,
                                 const SynthesisConfig& cfg, int T_max,
                                 SweepStrategy strategy,
                                 const SdpBackend& backend) {
  if (T_max < 1 || T_max > full.T())
    throw std::invalid_argument("min_feasible_T: T_max out of range");
  MinFeasibleResult res;

  auto attempt = [&](int T) {
    TrajectoryData pre = prefix(full, T);
    LiftedData lifted = lift(pre, dicts.M, dicts.Q);
    ConformitySet dc = dc_blocks(pre, lifted, noise);
    SynthesisProblem prob = full.time_kind == TimeKind::discrete
                                ? assemble_dt(dc, pi, dicts, noise, cfg)
                                : assemble_ct(dc, pi, dicts, noise, cfg);
    SolverOutcome oc = solve(prob, backend);
    res.log.emplace_back(T, oc.status);
    return oc;
  };

  if (strategy == SweepStrategy::linear) {
    for (int T = 1; T <= T_max; ++T) {
      SolverOutcome oc = attempt(T);
      if (oc.status == SolverOutcome::Status::feasible) {
        res.min_T = T;
        res.outcome = std::move(oc);
        return res;
      }
    }
    return res;
  }

  // Gallop to the first feasible prefix, then binary search inside the
  // bracket; sound because feasibility is monotone in T.
  int hi = 1;
  int lo_infeasible = 0;
  SolverOutcome feasible_oc;
  bool found = false;
  while (hi <= T_max) {
    SolverOutcome oc = attempt(hi);
    if (oc.status == SolverOutcome::Status::feasible) {
      feasible_oc = std::move(oc);
      found = true;
      break;
    }
    lo_infeasible = hi;
    if (hi == T_max) break;
    hi = std::min(hi * 2, T_max);
  }
  if (!found) return res;

  int feasible_T = hi;
  while (feasible_T - lo_infeasible > 1) {
    const int mid = (feasible_T + lo_infeasible) / 2;
    SolverOutcome oc = attempt(mid);
    if (oc.status == SolverOutcome::Status::feasible) {
      feasible_T = mid;
      feasible_oc = std::move(oc);
    } else {
      lo_infeasible = mid;
    }
  }
  res.min_T = feasible_T;
  res.outcome = std::move(feasible_oc);
  return res;
}

}  // namespace rcbc
