#include <doctest.h>

#include <cstdio>

#include "rcbc/data.hpp"

using namespace rcbc;

namespace {

// Scalar toy: n = m = q = l = 1, M(x) = x, Q = 1.
LiftedSystem toy(double a, double b) {
  LiftedSystem sys;
  sys.time_kind = TimeKind::discrete;
  sys.n = 1;
  sys.l = 1;
  sys.dict_M = build_dict(1, 1, false);
  sys.Q = PolyMatrix::identity(1, 1);
  sys.Omega.resize(1, 2);
  sys.Omega << a, b;
  return sys;
}

}  // namespace

TEST_CASE("set_radii on the benchmark geometries") {
  SUBCASE("lorenz") {
    Box xi = Box::cube(3, -2, 2);
    xi.lo(0) = 0;
    Box xu1 = Box::cube(3, -15, -6);
    xu1.lo(2) = 6;
    xu1.hi(2) = 15;
    Box xu2 = Box::cube(3, -15, 15);
    xu2.lo(1) = 10;
    xu2.hi(1) = 15;
    auto [ri, ru] = set_radii({xi}, {xu1, xu2});
    CHECK(ri == doctest::Approx(std::sqrt(12.0)));
    CHECK(ru == doctest::Approx(10.0));
  }
  SUBCASE("spacecraft") {
    Box xi = Box::cube(3, -5, 5);
    Box xu1 = Box::cube(3, -25, 25);
    xu1.hi(0) = -15;
    xu1.lo(1) = 0;
    Box xu2 = Box::cube(3, 10, 25);
    Box xu3 = Box::cube(3, -25, -10);
    xu3.lo(0) = 10;
    xu3.hi(0) = 25;
    auto [ri, ru] = set_radii({xi}, {xu1, xu2, xu3});
    CHECK(ri == doctest::Approx(5.0 * std::sqrt(3.0)));
    CHECK(ru == doctest::Approx(15.0));
  }
  SUBCASE("degenerate initial point") {
    Box origin;
    origin.lo = Eigen::VectorXd::Zero(2);
    origin.hi = Eigen::VectorXd::Zero(2);
    Box xu = Box::cube(2, 1, 2);
    auto [ri, ru] = set_radii({origin}, {xu});
    CHECK(ri == 0.0);
    CHECK(ru == doctest::Approx(std::sqrt(2.0)));
  }
  SUBCASE("unrepresentable spec is rejected") {
    Box xi = Box::cube(2, -2, 2);
    Box xu = Box::cube(2, -1, 1);
    CHECK_THROWS(set_radii({xi}, {xu}));
  }
}

TEST_CASE("collect_dt shapes and noiseless consistency") {
  LiftedSystem truth = toy(0.9, 0.5);
  NoiseSpec noise = NoiseSpec::identity(1, 0.01);
  PerturbSpec none;
  DisturbanceSampler dist(none, noise, 1);
  InputPolicy policy{Box::cube(1, -1, 1)};
  Eigen::VectorXd x0(1);
  x0 << 0.5;
  TrajectoryData d = collect_dt(truth, x0, policy, 5, dist, Rng(3, 1));
  CHECK(d.x.cols() == 5);
  CHECK(d.x_next.cols() == 5);
  CHECK(d.u.cols() == 5);
  // Zero disturbance: successors match the map exactly.
  for (int j = 0; j < 5; ++j) {
    Eigen::VectorXd pred =
        step_dt(truth, d.x.col(j), d.u.col(j), Eigen::VectorXd::Zero(1));
    CHECK((pred - d.x_next.col(j)).norm() <= 1e-14);
  }
  // Determinism.
  TrajectoryData d2 = collect_dt(truth, x0, policy, 5, dist, Rng(3, 1));
  CHECK(d.x == d2.x);
  CHECK(d.u == d2.u);
}

TEST_CASE("collect_ct records the noisy derivative channel") {
  LiftedSystem chen = nominal_benchmark("chen");
  NoiseSpec noise = NoiseSpec::identity(3, 1.25, 0.0);
  PerturbSpec box;
  box.dist_lo = 0;
  box.dist_hi = 0;
  DisturbanceSampler dist(box, noise, 3);
  InputPolicy policy{Box::cube(3, 0, 0)};
  Eigen::VectorXd x0(3);
  x0 << 1, 0, 0;
  TrajectoryData d =
      collect_ct(chen, x0, policy, 9, 0.001, dist, noise, Rng(4, 2));
  CHECK(d.x.cols() == 9);
  CHECK(d.tau == 0.001);
  // eps_varpi = 0, omega = 0, u = 0: the first derivative column is the
  // exact field at x0.
  CHECK(d.x_next(0, 0) == doctest::Approx(-35.0));
  CHECK(d.x_next(1, 0) == doctest::Approx(-7.0));
  CHECK(d.x_next(2, 0) == doctest::Approx(0.0).scale(1));
}

TEST_CASE("lift stacks monomials and inputs columnwise") {
  LiftedSystem lorenz = nominal_benchmark("lorenz");
  TrajectoryData d;
  d.time_kind = TimeKind::discrete;
  d.x.resize(3, 1);
  d.x << 1, 2, 3;
  d.x_next = d.x;
  d.u.resize(1, 1);
  d.u << 0.5;
  LiftedData lifted = lift(d, lorenz.dict_M, lorenz.Q);
  CHECK(lifted.M.rows() == 9);
  Eigen::VectorXd y = lifted.Y(0);
  CHECK(y.size() == 10);
  CHECK(y(9) == doctest::Approx(0.5));  // Q = 1 times u
  // Canonical grlex order of the lift.
  Eigen::VectorXd want(9);
  want << 1, 2, 3, 1, 2, 3, 4, 6, 9;
  CHECK(lifted.M.col(0).isApprox(want));
}

TEST_CASE("dc block on the scalar toy matches the hand computation") {
  TrajectoryData d;
  d.time_kind = TimeKind::discrete;
  d.x.resize(1, 1);
  d.x << 1.0;
  d.u.resize(1, 1);
  d.u << 0.5;
  d.x_next.resize(1, 1);
  d.x_next << 2.0;
  LiftedSystem sys = toy(0, 0);
  LiftedData lifted = lift(d, sys.dict_M, sys.Q);
  NoiseSpec noise = NoiseSpec::identity(1, 0.1);
  ConformitySet dc = dc_blocks(d, lifted, noise);
  REQUIRE(dc.blocks.size() == 1);
  Eigen::MatrixXd want(3, 3);
  want << 3.99, -2, -1, -2, 1, 0.5, -1, 0.5, 0.25;
  CHECK(dc.blocks[0].isApprox(want, 1e-12));

  // Membership form for a conforming Omega: (2 - 1.95 - 0.05 * 0.5 ... )
  Eigen::MatrixXd Om(1, 2);
  Om << 1.95, 0.1;
  Eigen::MatrixXd H = membership_form(dc.blocks[0], Om);
  const double resid = 2.0 - 1.95 * 1.0 - 0.1 * 0.5;
  CHECK(H(0, 0) == doctest::Approx(resid * resid - 0.01));
  CHECK(H(0, 0) <= 0.0);
}

TEST_CASE("dc blocks match the residual identity for random Omega") {
  LiftedSystem truth = toy(0.9, 0.5);
  NoiseSpec noise = NoiseSpec::identity(1, 0.01);
  PerturbSpec box;
  box.dist_lo = -0.01;
  box.dist_hi = 0.01;
  DisturbanceSampler dist(box, noise, 1);
  InputPolicy policy{Box::cube(1, -1, 1)};
  Eigen::VectorXd x0(1);
  x0 << 0.7;
  TrajectoryData d = collect_dt(truth, x0, policy, 6, dist, Rng(8, 1));
  LiftedData lifted = lift(d, truth.dict_M, truth.Q);
  ConformitySet dc = dc_blocks(d, lifted, noise);

  Rng rng(21, 0);
  for (int t = 0; t < 100; ++t) {
    Eigen::MatrixXd Om(1, 2);
    Om << rng.uniform(-2, 2), rng.uniform(-2, 2);
    for (int j = 0; j < d.T(); ++j) {
      Eigen::MatrixXd H = membership_form(dc.blocks[j], Om);
      Eigen::MatrixXd resid = d.x_next.col(j) - Om * lifted.Y(j);
      Eigen::MatrixXd direct =
          resid * resid.transpose() -
          noise.eps_omega * noise.eps_omega * noise.Phi_inv();
      CHECK((H - direct).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }

  // The true matrix conforms on every block.
  for (int j = 0; j < d.T(); ++j) {
    Eigen::MatrixXd H = membership_form(dc.blocks[j], truth.Omega);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
    CHECK(eig.eigenvalues().maxCoeff() <=
          1e-9 * std::max(1.0, dc.blocks[j].cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("pi block structure and membership") {
  SUBCASE("zero nominal") {
    NoiseSpec noise = NoiseSpec::identity(2, 0.1);
    PhysicsSet pi = pi_block(Eigen::MatrixXd::Zero(2, 3), 1.0, noise);
    CHECK(pi.block.topLeftCorner(2, 2).isApprox(-Eigen::MatrixXd::Identity(2, 2)));
    CHECK(pi.block.bottomRightCorner(3, 3).isApprox(Eigen::MatrixXd::Identity(3, 3)));
    CHECK(pi.block.topRightCorner(2, 3).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("quadratic form identity on random pairs") {
    NoiseSpec noise = NoiseSpec::identity(2, 0.1);
    Rng rng(31, 0);
    for (int t = 0; t < 100; ++t) {
      Eigen::MatrixXd Ot(2, 4), Om(2, 4);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 4; ++j) {
          Ot(i, j) = rng.uniform(-1, 1);
          Om(i, j) = rng.uniform(-1, 1);
        }
      const double eps = 0.7;
      PhysicsSet pi = pi_block(Ot, eps, noise);
      Eigen::MatrixXd H = membership_form(pi.block, Om);
      Eigen::MatrixXd direct = (Om - Ot) * (Om - Ot).transpose() -
                               eps * eps * noise.Phi_inv();
      CHECK((H - direct).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SUBCASE("lorenz ground truth is a member") {
    LiftedSystem nominal = nominal_benchmark("lorenz");
    PerturbSpec spec;
    spec.omega_lo = -0.0025;
    spec.omega_hi = 0.0025;
    spec.seed = 99;
    LiftedSystem truth = perturb_truth(nominal, spec);
    NoiseSpec noise = NoiseSpec::identity(3, 0.001);
    PhysicsSet pi = pi_block(nominal.Omega, 0.1, noise);
    Eigen::MatrixXd H = membership_form(pi.block, truth.Omega);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
    CHECK(eig.eigenvalues().maxCoeff() <= 0.0);
  }
  CHECK_THROWS(pi_block(Eigen::MatrixXd::Zero(1, 2), 0.0,
                        NoiseSpec::identity(1, 0.1)));
}

TEST_CASE("ct blocks with eps_varpi = 0 match dt-style blocks") {
  TrajectoryData d;
  d.time_kind = TimeKind::continuous;
  d.tau = 0.01;
  d.x.resize(1, 2);
  d.x << 1.0, 1.5;
  d.u.resize(1, 2);
  d.u << 0.2, -0.3;
  d.x_next.resize(1, 2);
  d.x_next << 0.4, 0.6;
  LiftedSystem sys = toy(0, 0);
  sys.time_kind = TimeKind::continuous;
  LiftedData lifted = lift(d, sys.dict_M, sys.Q);

  NoiseSpec ct_noise = NoiseSpec::identity(1, 0.05, 0.0);
  ConformitySet ct = dc_blocks(d, lifted, ct_noise);

  TrajectoryData dd = d;
  dd.time_kind = TimeKind::discrete;
  NoiseSpec dt_noise = NoiseSpec::identity(1, 0.05);
  ConformitySet dt = dc_blocks(dd, lift(dd, sys.dict_M, sys.Q), dt_noise);
  for (int j = 0; j < 2; ++j)
    CHECK((ct.blocks[j] - dt.blocks[j]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dataset persistence round-trips bit-exactly") {
  LiftedSystem truth = toy(0.9, 0.5);
  NoiseSpec noise = NoiseSpec::identity(1, 0.01);
  PerturbSpec box;
  box.dist_lo = -0.005;
  box.dist_hi = 0.005;
  DisturbanceSampler dist(box, noise, 1);
  InputPolicy policy{Box::cube(1, -1, 1)};
  Eigen::VectorXd x0(1);
  x0 << 0.3;
  TrajectoryData d = collect_dt(truth, x0, policy, 7, dist, Rng(12, 5));

  const std::string path = "test_dataset.json";
  save_dataset(path, d, noise, 12, "toy");
  LoadedDataset back = load_dataset(path);
  CHECK(back.data.x == d.x);
  CHECK(back.data.x_next == d.x_next);
  CHECK(back.data.u == d.u);
  CHECK(back.seed == 12);
  CHECK(back.provenance == "toy");
  CHECK(back.noise.eps_omega == noise.eps_omega);
  std::remove(path.c_str());
}
