#include <doctest.h>

#include "rcbc/synth.hpp"

using namespace rcbc;

namespace {

// Scalar toy plant: x+ = a x + b u + w with dictionary M(x) = x, Q = 1.
struct Toy {
  LiftedSystem nominal;
  LiftedSystem truth;
  NoiseSpec noise;
  Dictionaries dicts;
  PhysicsSet pi;
  SynthesisConfig cfg;

  Toy(uint64_t seed = 1, double eps_Omega = 0.05) {
    nominal.time_kind = TimeKind::discrete;
    nominal.n = 1;
    nominal.l = 1;
    nominal.dict_M = build_dict(1, 1, false);
    nominal.Q = PolyMatrix::identity(1, 1);
    nominal.Omega.resize(1, 2);
    nominal.Omega << 0.9, 0.5;

    PerturbSpec spec;
    spec.omega_lo = -0.02;
    spec.omega_hi = 0.02;
    spec.seed = seed;
    truth = perturb_truth(nominal, spec);

    noise = NoiseSpec::identity(1, 0.01);
    dicts.M = nominal.dict_M;
    dicts.Q = nominal.Q;
    dicts.C = factor_C(nominal.dict_M);
    pi = pi_block(nominal.Omega, eps_Omega, noise);

    cfg.lambda = 0.9;
    cfg.mu = 0.01;
    cfg.deg_Kbar = 0;
    cfg.deg_kappa = 2;
    cfg.r_i = 0.1;
    cfg.r_u = 0.8;
    cfg.mode = SynthMode::physics_informed;
    cfg.domain = DomainRelaxation::global;
  }

  TrajectoryData collect(int T, uint64_t seed = 1) const {
    PerturbSpec spec;
    spec.dist_lo = -0.01;
    spec.dist_hi = 0.01;
    DisturbanceSampler dist(spec, noise, 1);
    InputPolicy policy{Box::cube(1, -1, 1)};
    Eigen::VectorXd x0(1);
    x0 << 0.5;
    return collect_dt(truth, x0, policy, T, dist, Rng(seed, 11));
  }

  ConformitySet conformity(const TrajectoryData& d) const {
    return dc_blocks(d, lift(d, dicts.M, dicts.Q), noise);
  }
};

}  // namespace

TEST_CASE("toy scalar synthesis is feasible in PI mode") {
  Toy toy;
  TrajectoryData d = toy.collect(4);
  ConformitySet dc = toy.conformity(d);
  SynthesisProblem prob = assemble_dt(dc, &toy.pi, toy.dicts, toy.noise, toy.cfg);
  SolverOutcome oc = solve(prob);
  REQUIRE(oc.status == SolverOutcome::Status::feasible);

  // Trace normalization and margins.
  CHECK(oc.Pbar(0, 0) == doctest::Approx(1.0));
  CHECK(oc.gamma_i_bar > oc.gamma_u_bar);
  CHECK(oc.delta_bar > 0);

  // Disturbance-margin block (26a): Pbar >= delta_bar (1 + 1/mu) eps^2.
  const double bound = oc.delta_bar * (1.0 + 1.0 / toy.cfg.mu) *
                       toy.noise.eps_omega * toy.noise.eps_omega;
  CHECK(oc.Pbar(0, 0) >= bound - 1e-7);

  // Gram round trip at the solved point.
  CHECK(sos_roundtrip_error(prob, oc.sol) <= 1e-8);

  // Multipliers are nonnegative on sample points.
  Rng rng(5, 0);
  for (const auto& kap : oc.kappas)
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd x(1);
      x << rng.uniform(-2, 2);
      CHECK(kap.eval(x) >= -1e-9);
    }

  // The closed loop contracts for the true plant: |a + b k| bounded by the
  // contraction rate.
  const double k = oc.Kbar.at(0, 0).coeff(Expo{0}) / oc.Pbar(0, 0);
  const double cl = toy.truth.Omega(0, 0) + toy.truth.Omega(0, 1) * k;
  CHECK(std::abs(cl) <= std::sqrt(toy.cfg.lambda / (1.0 + toy.cfg.mu)) + 1e-6);
}

TEST_CASE("infinite-horizon flag tightens the program") {
  Toy toy;
  TrajectoryData d = toy.collect(4);
  ConformitySet dc = toy.conformity(d);
  SynthesisConfig cfg = toy.cfg;
  cfg.require_infinite_horizon = true;
  SolverOutcome oc = solve(assemble_dt(dc, &toy.pi, toy.dicts, toy.noise, cfg));
  REQUIRE(oc.status == SolverOutcome::Status::feasible);
  // delta = 1/delta_bar <= gamma_u (1 - lambda) = (1 - lambda) / gamma_u_bar.
  CHECK(1.0 / oc.delta_bar <= (1.0 - cfg.lambda) / oc.gamma_u_bar + 1e-9);
}

TEST_CASE("purely data-driven mode with no data is infeasible") {
  // T = 0: the data block of the master matrix has a zero diagonal against a
  // nonzero coupling row, which no Gram matrix can certify.
  Toy toy;
  SynthesisConfig dd = toy.cfg;
  dd.mode = SynthMode::data_driven;
  ConformitySet empty;
  SolverOutcome oc0 = solve(assemble_dt(empty, nullptr, toy.dicts, toy.noise, dd));
  CHECK(oc0.status == SolverOutcome::Status::infeasible);
}

TEST_CASE("r_i >= r_u is rejected at assembly") {
  Toy toy;
  SynthesisConfig bad = toy.cfg;
  bad.r_i = 0.9;
  bad.r_u = 0.8;
  ConformitySet dc = toy.conformity(toy.collect(2));
  CHECK_THROWS(assemble_dt(dc, &toy.pi, toy.dicts, toy.noise, bad));
}

TEST_CASE("contradictory level bounds are infeasible") {
  Toy toy;
  SynthesisConfig cfg = toy.cfg;
  cfg.gamma_gap = 30.0;  // forces an empty sandwich between the level LMIs
  cfg.r_i = 0.75;
  cfg.r_u = 0.8;
  ConformitySet dc = toy.conformity(toy.collect(4));
  SolverOutcome oc = solve(assemble_dt(dc, &toy.pi, toy.dicts, toy.noise, cfg));
  CHECK(oc.status == SolverOutcome::Status::infeasible);
}

TEST_CASE("DD mode equals PI mode with a vacuous physics ball") {
  for (uint64_t seed : {1, 2, 3, 4, 5}) {
    Toy toy(seed);
    TrajectoryData d = toy.collect(2, seed);
    ConformitySet dc = toy.conformity(d);

    SynthesisConfig dd = toy.cfg;
    dd.mode = SynthMode::data_driven;
    SolverOutcome oc_dd = solve(assemble_dt(dc, nullptr, toy.dicts, toy.noise, dd));

    PhysicsSet vacuous = pi_block(toy.nominal.Omega, 1e6, toy.noise);
    SolverOutcome oc_pi =
        solve(assemble_dt(dc, &vacuous, toy.dicts, toy.noise, toy.cfg));
    CHECK(oc_dd.status == oc_pi.status);
  }
}

TEST_CASE("lambda search returns the first feasible grid point") {
  Toy toy;
  TrajectoryData d = toy.collect(4);
  ConformitySet dc = toy.conformity(d);
  auto assemble = [&](double lam) {
    SynthesisConfig c = toy.cfg;
    c.lambda = lam;
    return assemble_dt(dc, &toy.pi, toy.dicts, toy.noise, c);
  };

  SUBCASE("generous plant accepts a small lambda") {
    LambdaSearchResult res =
        lambda_search(assemble, {0.5, 0.7, 0.9}, LambdaStop::first_feasible);
    REQUIRE(res.lambda.has_value());
    CHECK(*res.lambda == 0.5);
  }
  SUBCASE("best delta scans the whole grid") {
    LambdaSearchResult res =
        lambda_search(assemble, {0.5, 0.9}, LambdaStop::best_delta);
    REQUIRE(res.lambda.has_value());
    CHECK(res.log.size() == 2);
  }
  SUBCASE("empty feasible set reports per-lambda statuses") {
    LambdaSearchResult res =
        lambda_search(assemble, {0.001}, LambdaStop::first_feasible);
    CHECK(!res.lambda.has_value());
    CHECK(res.log.size() == 1);
  }
  CHECK_THROWS(lambda_search(assemble, {1.5}, LambdaStop::first_feasible));
}

TEST_CASE("min_feasible_T: gallop agrees with linear and onset is monotone") {
  Toy toy;
  TrajectoryData full = toy.collect(10);
  SynthesisConfig dd = toy.cfg;
  dd.mode = SynthMode::data_driven;

  MinFeasibleResult lin = min_feasible_T(full, toy.dicts, toy.noise, nullptr,
                                         dd, 10, SweepStrategy::linear);
  MinFeasibleResult gal = min_feasible_T(full, toy.dicts, toy.noise, nullptr,
                                         dd, 10, SweepStrategy::gallop);
  REQUIRE(lin.min_T.has_value());
  REQUIRE(gal.min_T.has_value());
  CHECK(*lin.min_T == *gal.min_T);

  // Monotonicity: everything above the threshold stays feasible.
  for (int T = *lin.min_T; T <= 10; ++T) {
    TrajectoryData pre = prefix(full, T);
    ConformitySet dc = toy.conformity(pre);
    SolverOutcome oc = solve(assemble_dt(dc, nullptr, toy.dicts, toy.noise, dd));
    CHECK(oc.status == SolverOutcome::Status::feasible);
  }

  // PI needs no more data than DD on the same prefix.
  MinFeasibleResult pi_res = min_feasible_T(full, toy.dicts, toy.noise, &toy.pi,
                                            toy.cfg, 10, SweepStrategy::gallop);
  REQUIRE(pi_res.min_T.has_value());
  CHECK(*pi_res.min_T <= *lin.min_T);
}

TEST_CASE("ct assembly on a scalar plant") {
  // xdot = a x + b u + w with a = -1, b = 1.
  LiftedSystem nominal;
  nominal.time_kind = TimeKind::continuous;
  nominal.n = 1;
  nominal.l = 1;
  nominal.dict_M = build_dict(1, 1, false);
  nominal.Q = PolyMatrix::identity(1, 1);
  nominal.Omega.resize(1, 2);
  nominal.Omega << -1.0, 1.0;
  PerturbSpec spec;
  spec.omega_lo = -0.05;
  spec.omega_hi = 0.05;
  spec.seed = 3;
  LiftedSystem truth = perturb_truth(nominal, spec);

  NoiseSpec noise = NoiseSpec::identity(1, 0.05, 0.01);
  Dictionaries dicts{nominal.dict_M, nominal.Q, factor_C(nominal.dict_M)};
  PhysicsSet pi = pi_block(nominal.Omega, 0.2, noise);

  PerturbSpec dist_spec;
  dist_spec.dist_lo = -0.05;
  dist_spec.dist_hi = 0.05;
  DisturbanceSampler dist(dist_spec, noise, 1);
  InputPolicy policy{Box::cube(1, -1, 1)};
  Eigen::VectorXd x0(1);
  x0 << 0.4;
  TrajectoryData d =
      collect_ct(truth, x0, policy, 5, 0.01, dist, noise, Rng(2, 9));
  ConformitySet dc = dc_blocks(d, lift(d, dicts.M, dicts.Q), noise);

  SynthesisConfig cfg;
  cfg.deg_Kbar = 0;
  cfg.deg_kappa = 2;
  cfg.r_i = 0.1;
  cfg.r_u = 0.8;
  cfg.mode = SynthMode::physics_informed;
  cfg.domain = DomainRelaxation::global;

  SynthesisProblem prob = assemble_ct(dc, &pi, dicts, noise, cfg);
  CHECK(prob.master.dim() == 3);  // n + m + q
  SolverOutcome oc = solve(prob);
  REQUIRE(oc.status == SolverOutcome::Status::feasible);
  CHECK(sos_roundtrip_error(prob, oc.sol) <= 1e-8);
  CHECK(oc.delta_bar > 0);
}

TEST_CASE("master block dimensions match the benchmark layouts") {
  Toy toy;
  ConformitySet dc = toy.conformity(toy.collect(2));
  SynthesisProblem prob = assemble_dt(dc, &toy.pi, toy.dicts, toy.noise, toy.cfg);
  CHECK(prob.master.dim() == 2 * 1 + 1 + 1);

  LiftedSystem lorenz = nominal_benchmark("lorenz");
  Dictionaries dl{lorenz.dict_M, lorenz.Q, factor_C(lorenz.dict_M)};
  NoiseSpec noise = NoiseSpec::identity(3, 0.001);
  PhysicsSet pi = pi_block(lorenz.Omega, 0.1, noise);
  PerturbSpec spec;
  spec.dist_lo = -0.0005;
  spec.dist_hi = 0.0005;
  DisturbanceSampler dist(spec, noise, 3);
  InputPolicy policy{Box::cube(1, -1, 1)};
  Eigen::VectorXd x0(3);
  x0 << 1, 0, 0;
  TrajectoryData d = collect_dt(lorenz, x0, policy, 2, dist, Rng(1, 4));
  ConformitySet dcl = dc_blocks(d, lift(d, dl.M, dl.Q), noise);
  SynthesisConfig cfg;
  cfg.lambda = 0.99;
  cfg.mu = 0.002;
  cfg.deg_Kbar = 1;
  cfg.deg_kappa = 2;
  cfg.r_i = std::sqrt(12.0);
  cfg.r_u = 10.0;
  cfg.domain = DomainRelaxation::state_ball;
  cfg.r_X = 15.0 * std::sqrt(3.0);
  SynthesisProblem lp = assemble_dt(dcl, &pi, dl, noise, cfg);
  CHECK(lp.master.dim() == 16);  // 2*3 + 9 + 1
  // Gram block dimension 16 * |{1, x1, x2, x3}|.
  CHECK(lp.sdp.psd_dims[lp.master_gram_block] == 64);
}
