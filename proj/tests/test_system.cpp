#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "rcbc/system.hpp"

using namespace rcbc;

TEST_CASE("nominal benchmark transcriptions") {
  SUBCASE("lorenz") {
    LiftedSystem sys = nominal_benchmark("lorenz");
    CHECK(sys.m() == 9);
    CHECK(sys.q() == 1);
    CHECK(sys.l == 1);
    CHECK(sys.Omega(0, sys.dict_M.index_of(Expo{1, 0, 0})) ==
          doctest::Approx(0.8));
    CHECK(sys.Omega(0, sys.dict_M.index_of(Expo{0, 1, 0})) ==
          doctest::Approx(0.2));
  }
  SUBCASE("spacecraft") {
    LiftedSystem sys = nominal_benchmark("spacecraft");
    CHECK(sys.Omega(0, sys.dict_M.index_of(Expo{0, 1, 1})) ==
          doctest::Approx(-0.012));
    CHECK(sys.q() == 3);
  }
  SUBCASE("higher degree") {
    LiftedSystem sys = nominal_benchmark("higher_degree");
    CHECK(sys.m() == 19);
    CHECK(sys.dict_M.max_degree() == 3);
  }
  SUBCASE("chen") {
    LiftedSystem sys = nominal_benchmark("chen");
    CHECK(sys.time_kind == TimeKind::continuous);
    CHECK(sys.Omega(0, sys.dict_M.index_of(Expo{1, 0, 0})) ==
          doctest::Approx(-35.0));
    CHECK(sys.Omega(0, sys.dict_M.index_of(Expo{0, 1, 0})) ==
          doctest::Approx(35.0));
    CHECK(sys.B().isApprox(Eigen::MatrixXd::Identity(3, 3)));
  }
  CHECK_THROWS(nominal_benchmark("nonesuch"));
}

TEST_CASE("step_dt hand-checked values") {
  LiftedSystem lorenz = nominal_benchmark("lorenz");
  Eigen::VectorXd x(3), u(1), w = Eigen::VectorXd::Zero(3);
  x << 1, 0, 0;
  u << 0;
  Eigen::VectorXd xn = step_dt(lorenz, x, u, w);
  CHECK(xn(0) == doctest::Approx(0.8));
  CHECK(xn(1) == doctest::Approx(0.56));
  CHECK(xn(2) == doctest::Approx(0.0).scale(1));

  LiftedSystem craft = nominal_benchmark("spacecraft");
  Eigen::VectorXd xc(3), uc = Eigen::VectorXd::Zero(3);
  xc << 1, 1, 1;
  Eigen::VectorXd xcn = step_dt(craft, xc, uc, w);
  CHECK(xcn(0) == doctest::Approx(0.988));
  CHECK(xcn(1) == doctest::Approx(1.016));
  CHECK(xcn(2) == doctest::Approx(1.0 - 0.02 * 0.5 / 1.3));

  // Fixed point at the origin.
  Eigen::VectorXd zero3 = Eigen::VectorXd::Zero(3);
  CHECK(step_dt(lorenz, zero3, Eigen::VectorXd::Zero(1), zero3).norm() == 0.0);
}

TEST_CASE("vector_field_ct hand-checked values") {
  LiftedSystem chen = nominal_benchmark("chen");
  Eigen::VectorXd x(3), u = Eigen::VectorXd::Zero(3), w = Eigen::VectorXd::Zero(3);
  x << 1, 0, 0;
  Eigen::VectorXd f = vector_field_ct(chen, x, u, w);
  CHECK(f(0) == doctest::Approx(-35.0));
  CHECK(f(1) == doctest::Approx(-7.0));
  CHECK(f(2) == doctest::Approx(0.0).scale(1));
  CHECK(vector_field_ct(chen, w, u, w).norm() == 0.0);

  // Additive disturbance.
  Rng rng(5, 0);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd xr(3), wr(3);
    for (int i = 0; i < 3; ++i) {
      xr(i) = rng.uniform(-2, 2);
      wr(i) = rng.uniform(-1, 1);
    }
    Eigen::VectorXd diff =
        vector_field_ct(chen, xr, u, wr) - vector_field_ct(chen, xr, u, w);
    CHECK((diff - wr).norm() <= 1e-12);
  }
}

TEST_CASE("dynamics are affine in input and disturbance") {
  LiftedSystem craft = nominal_benchmark("spacecraft");
  Rng rng(11, 0);
  for (int t = 0; t < 30; ++t) {
    Eigen::VectorXd x(3), u1(3), u2(3), z3 = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < 3; ++i) {
      x(i) = rng.uniform(-2, 2);
      u1(i) = rng.uniform(-1, 1);
      u2(i) = rng.uniform(-1, 1);
    }
    Eigen::VectorXd lhs = step_dt(craft, x, u1 + u2, z3) -
                          step_dt(craft, x, u1, z3) - step_dt(craft, x, u2, z3) +
                          step_dt(craft, x, z3, z3);
    CHECK(lhs.norm() <= 1e-12);
  }
}

TEST_CASE("perturb_truth is deterministic and within spectral bounds") {
  LiftedSystem nominal = nominal_benchmark("lorenz");
  PerturbSpec spec;
  spec.omega_lo = -0.0025;
  spec.omega_hi = 0.0025;
  spec.seed = 42;
  LiftedSystem a = perturb_truth(nominal, spec);
  LiftedSystem b = perturb_truth(nominal, spec);
  CHECK(a.Omega == b.Omega);
  CHECK(a.Omega != nominal.Omega);

  // ||Y (Omega - Omega~)|| <= eps_Omega = 0.1 with Y = I.
  Eigen::MatrixXd E = a.Omega - nominal.Omega;
  CHECK(E.cwiseAbs().maxCoeff() <= 0.0025);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(E);
  CHECK(svd.singularValues()(0) <= 0.1);

  PerturbSpec zero;
  zero.seed = 1;
  CHECK(perturb_truth(nominal, zero).Omega == nominal.Omega);
}

TEST_CASE("disturbance sampler validates the weighted ball") {
  NoiseSpec noise = NoiseSpec::identity(3, 0.001);
  PerturbSpec ok;
  ok.dist_lo = -0.001 / std::sqrt(3.0);
  ok.dist_hi = 0.001 / std::sqrt(3.0);
  DisturbanceSampler sampler(ok, noise, 3);
  Rng rng(9, 0);
  for (int i = 0; i < 100000; ++i)
    CHECK(sampler.sample(rng).norm() <= 0.001 + 1e-12);

  // The paper-style box [-0.004, 0.004]^3 violates the ball for eps = 0.001.
  PerturbSpec bad;
  bad.dist_lo = -0.004;
  bad.dist_hi = 0.004;
  CHECK_THROWS(DisturbanceSampler(bad, noise, 3));

  PerturbSpec zero;
  DisturbanceSampler zs(zero, noise, 3);
  CHECK(zs.sample(rng).norm() == 0.0);
}

TEST_CASE("rk4 reproduces exp(-t) on xdot = -x") {
  LiftedSystem sys;
  sys.time_kind = TimeKind::continuous;
  sys.n = 1;
  sys.l = 1;
  sys.dict_M = build_dict(1, 1, false);
  sys.Q = PolyMatrix::identity(1, 1);
  sys.Omega.resize(1, 2);
  sys.Omega << -1.0, 0.0;
  Controller zero_ctrl = Controller::zero(1, 1, 1);
  Eigen::VectorXd x(1), w = Eigen::VectorXd::Zero(1);
  x << 1.0;
  const double dt = 1e-3;
  for (int i = 0; i < 1000; ++i) x = rk4_step(sys, zero_ctrl, x, w, dt);
  CHECK(std::abs(x(0) - std::exp(-1.0)) <= 1e-8);
}

TEST_CASE("closed-loop simulation basics") {
  LiftedSystem chen = nominal_benchmark("chen");
  PerturbSpec none;
  NoiseSpec noise = NoiseSpec::identity(3, 1.25);
  DisturbanceSampler dist(none, noise, 3);
  Controller ctrl = Controller::zero(3, 3, 3);
  IntegrationConfig integ;
  integ.sample_time = 0.01;

  SimResult sim = simulate_closed_loop(chen, ctrl, Eigen::VectorXd::Zero(3), 10,
                                       dist, Rng(1, 2), integ);
  CHECK(sim.states.cols() == 11);
  CHECK(sim.states.cwiseAbs().maxCoeff() == 0.0);

  // Determinism under a fixed seed.
  LiftedSystem lorenz = nominal_benchmark("lorenz");
  PerturbSpec boxed;
  boxed.dist_lo = -0.0005;
  boxed.dist_hi = 0.0005;
  NoiseSpec lnoise = NoiseSpec::identity(3, 0.001);
  DisturbanceSampler ldist(boxed, lnoise, 3);
  Eigen::VectorXd x0(3);
  x0 << 1, 0, 0;
  Controller zc = Controller::zero(1, 3, 3);
  SimResult a = simulate_closed_loop(lorenz, zc, x0, 50, ldist, Rng(7, 3));
  SimResult c = simulate_closed_loop(lorenz, zc, x0, 50, ldist, Rng(7, 3));
  CHECK(a.states == c.states);
}

TEST_CASE("trajectory csv has the mandated header") {
  LiftedSystem lorenz = nominal_benchmark("lorenz");
  PerturbSpec none;
  NoiseSpec noise = NoiseSpec::identity(3, 0.001);
  DisturbanceSampler dist(none, noise, 3);
  Eigen::VectorXd x0(3);
  x0 << 1, 0, 0;
  SimResult sim = simulate_closed_loop(lorenz, Controller::zero(1, 3, 3), x0, 3,
                                       dist, Rng(1, 1));
  const std::string path = "test_traj.csv";
  write_trajectory_csv(path, sim, TimeKind::discrete);
  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  CHECK(header == "k,x_1,x_2,x_3,u_1");
  std::remove(path.c_str());
}
