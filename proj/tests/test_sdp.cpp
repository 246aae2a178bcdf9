#include <doctest.h>

#include <Eigen/Dense>

#include "rcbc/builder.hpp"
#include "rcbc/sdp.hpp"

using namespace rcbc;

TEST_CASE("small LP through the conic solver") {
  // max x1 + 2 x2  s.t.  x1 + x2 + s = 1,  x >= 0  ->  x = (0, 1), value 2.
  SdpBuilder b;
  VarRef x1 = b.add_nonneg();
  VarRef x2 = b.add_nonneg();
  VarRef s = b.add_nonneg();
  LinExpr row = LinExpr::variable(x1) + LinExpr::variable(x2) + LinExpr::variable(s);
  row.add_constant(-1.0);
  b.add_equality(row);
  b.maximize(x1, 1.0);
  b.maximize(x2, 2.0);
  SdpSolution sol = solve_sdp(b.problem());
  REQUIRE(sol.status == SdpStatus::optimal);
  CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(sol.x_nonneg(1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.x_nonneg(0) == doctest::Approx(0.0).scale(1).epsilon(1e-6));
}

TEST_CASE("infeasible LP is certified") {
  // x >= 0 with x = -1.
  SdpBuilder b;
  VarRef x = b.add_nonneg();
  LinExpr row = LinExpr::variable(x);
  row.add_constant(1.0);  // x + 1 = 0
  b.add_equality(row);
  b.maximize(x, 1.0);
  SdpSolution sol = solve_sdp(b.problem());
  CHECK(sol.status == SdpStatus::infeasible);
}

TEST_CASE("unbounded LP is certified") {
  // max x1 s.t. x1 - x2 = 0, x >= 0.
  SdpBuilder b;
  VarRef x1 = b.add_nonneg();
  VarRef x2 = b.add_nonneg();
  LinExpr row = LinExpr::variable(x1) - LinExpr::variable(x2);
  b.add_equality(row);
  b.maximize(x1, 1.0);
  SdpSolution sol = solve_sdp(b.problem());
  CHECK(sol.status == SdpStatus::unbounded);
}

TEST_CASE("correlation matrix completion") {
  // X 2x2 PSD, diag = 1: max X01 -> 1, min X01 -> -1.
  for (double sign : {1.0, -1.0}) {
    SdpBuilder b;
    int blk = b.add_psd_block(2);
    LinExpr d0 = LinExpr::variable(b.psd_entry(blk, 0, 0));
    d0.add_constant(-1.0);
    b.add_equality(d0);
    LinExpr d1 = LinExpr::variable(b.psd_entry(blk, 1, 1));
    d1.add_constant(-1.0);
    b.add_equality(d1);
    b.maximize(b.psd_entry(blk, 1, 0), sign);
    SdpSolution sol = solve_sdp(b.problem());
    REQUIRE(sol.status == SdpStatus::optimal);
    CHECK(sol.X[0](1, 0) == doctest::Approx(sign).epsilon(1e-6));
  }
}

TEST_CASE("largest eigenvalue bound as an LMI") {
  // min t s.t. t I - A >= 0 for symmetric A: t* = lambda_max(A).
  Eigen::MatrixXd A(3, 3);
  A << 2, 1, 0, 1, 3, -1, 0, -1, 1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  const double lmax = eig.eigenvalues().maxCoeff();

  SdpBuilder b;
  VarRef t = b.add_nonneg();  // A's top eigenvalue is positive here
  std::vector<std::vector<LinExpr>> lmi(3, std::vector<LinExpr>(3));
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) {
      LinExpr e(-A(p, q));
      if (p == q) e += LinExpr::variable(t);
      lmi[p][q] = e;
    }
  b.add_lmi(lmi);
  b.maximize(t, -1.0);  // minimize t
  SdpSolution sol = solve_sdp(b.problem());
  REQUIRE(sol.status == SdpStatus::optimal);
  CHECK(sol.x_nonneg(0) == doctest::Approx(lmax).epsilon(1e-6));
}

TEST_CASE("free variables through equalities") {
  // max y  s.t.  y = X00,  X = [[X00, 1],[1, 2]] >= 0  ->  X00 >= 1/2
  // minimized... here maximize -y so optimum at X00 = 1/2, y = 1/2.
  SdpBuilder b;
  int blk = b.add_psd_block(2);
  VarRef y = b.add_free();
  LinExpr off = LinExpr::variable(b.psd_entry(blk, 1, 0));
  off.add_constant(-1.0);
  b.add_equality(off);
  LinExpr corner = LinExpr::variable(b.psd_entry(blk, 1, 1));
  corner.add_constant(-2.0);
  b.add_equality(corner);
  LinExpr link = LinExpr::variable(y) - LinExpr::variable(b.psd_entry(blk, 0, 0));
  b.add_equality(link);
  b.maximize(y, -1.0);
  SdpSolution sol = solve_sdp(b.problem());
  REQUIRE(sol.status == SdpStatus::optimal);
  CHECK(sol.x_free(0) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(sol.X[0](0, 0) == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("scalar SOS lower bound of a quartic") {
  // p(x) = (x^2 - 1)^2 + 0.1 x has minimum ~ p* < 0.1; the SOS relaxation of
  // max c s.t. p - c SOS is tight for univariate polynomials.
  Polynomial p(1);
  p.add_term(Expo{4}, 1.0);
  p.add_term(Expo{2}, -2.0);
  p.add_term(Expo{0}, 1.0);
  p.add_term(Expo{1}, 0.1);

  SdpBuilder b;
  LinPoly sos;
  b.add_sos_poly(1, 4, sos, "gram");
  VarRef c = b.add_free();
  // p(x) - c == sos(x) coefficientwise.
  LinPoly target = LinPoly::from_poly(p);
  target.add_term(Expo{0}, LinExpr::variable(c, -1.0));
  LinPoly diff = target;
  diff -= sos;
  for (const auto& [e, expr] : diff.terms()) b.add_equality(expr);
  b.maximize(c, 1.0);
  SdpSolution sol = solve_sdp(b.problem());
  REQUIRE(sol.status == SdpStatus::optimal);

  // Compare against a fine grid minimum.
  double pmin = 1e300;
  for (double x = -2.0; x <= 2.0; x += 1e-5) {
    double v = ((x * x - 1) * (x * x - 1)) + 0.1 * x;
    pmin = std::min(pmin, v);
  }
  CHECK(sol.x_free(0) == doctest::Approx(pmin).epsilon(1e-4));
}

TEST_CASE("matrix SOS certifies a constant PSD matrix and rejects an indefinite one") {
  SUBCASE("psd constant") {
    LinPolyMat M(2, 1);
    M.at(0, 0).add_term(Expo{0}, LinExpr(2.0));
    M.at(1, 1).add_term(Expo{0}, LinExpr(1.0));
    M.at(1, 0).add_term(Expo{0}, LinExpr(0.5));
    SdpBuilder b;
    VarRef slack = b.add_nonneg();
    b.add_matrix_sos(M, 0, "m");
    LinExpr dummy = LinExpr::variable(slack);
    dummy.add_constant(-1.0);
    b.add_equality(dummy);
    SdpSolution sol = solve_sdp(b.problem());
    CHECK(sol.status == SdpStatus::optimal);
  }
  SUBCASE("indefinite constant is infeasible") {
    LinPolyMat M(2, 1);
    M.at(0, 0).add_term(Expo{0}, LinExpr(1.0));
    M.at(1, 1).add_term(Expo{0}, LinExpr(-1.0));
    SdpBuilder b;
    VarRef slack = b.add_nonneg();
    b.add_matrix_sos(M, 0, "m");
    LinExpr dummy = LinExpr::variable(slack);
    dummy.add_constant(-1.0);
    b.add_equality(dummy);
    SdpSolution sol = solve_sdp(b.problem());
    CHECK(sol.status == SdpStatus::infeasible);
  }
  SUBCASE("polynomial matrix: [[1, x],[x, 1]] needs x^2 <= 1 so it is not SOS") {
    LinPolyMat M(2, 1);
    M.at(0, 0).add_term(Expo{0}, LinExpr(1.0));
    M.at(1, 1).add_term(Expo{0}, LinExpr(1.0));
    M.at(1, 0).add_term(Expo{1}, LinExpr(1.0));
    SdpBuilder b;
    VarRef slack = b.add_nonneg();
    b.add_matrix_sos(M, 1, "m");
    LinExpr dummy = LinExpr::variable(slack);
    dummy.add_constant(-1.0);
    b.add_equality(dummy);
    SdpSolution sol = solve_sdp(b.problem());
    CHECK(sol.status == SdpStatus::infeasible);
  }
  SUBCASE("polynomial matrix: [[1+x^2, x],[x, 1]] is SOS") {
    LinPolyMat M(2, 1);
    M.at(0, 0).add_term(Expo{0}, LinExpr(1.0));
    M.at(0, 0).add_term(Expo{2}, LinExpr(1.0));
    M.at(1, 1).add_term(Expo{0}, LinExpr(1.0));
    M.at(1, 0).add_term(Expo{1}, LinExpr(1.0));
    SdpBuilder b;
    VarRef slack = b.add_nonneg();
    b.add_matrix_sos(M, 1, "m");
    LinExpr dummy = LinExpr::variable(slack);
    dummy.add_constant(-1.0);
    b.add_equality(dummy);
    SdpSolution sol = solve_sdp(b.problem());
    CHECK(sol.status == SdpStatus::optimal);
  }
}

TEST_CASE("audit flags clean solutions as clean") {
  SdpBuilder b;
  int blk = b.add_psd_block(2);
  LinExpr d0 = LinExpr::variable(b.psd_entry(blk, 0, 0));
  d0.add_constant(-1.0);
  b.add_equality(d0);
  LinExpr d1 = LinExpr::variable(b.psd_entry(blk, 1, 1));
  d1.add_constant(-1.0);
  b.add_equality(d1);
  b.maximize(b.psd_entry(blk, 1, 0), 1.0);
  SdpSolution sol = solve_sdp(b.problem());
  REQUIRE(sol.status == SdpStatus::optimal);
  SdpAudit audit = audit_solution(b.problem(), sol);
  CHECK(audit.pass(1e-6));
}

TEST_CASE("problem dump round-trips through text") {
  SdpBuilder b;
  int blk = b.add_psd_block(2);
  LinExpr d0 = LinExpr::variable(b.psd_entry(blk, 0, 0));
  d0.add_constant(-1.0);
  b.add_equality(d0);
  b.maximize(b.psd_entry(blk, 1, 0), 1.0);
  std::ostringstream os;
  dump_problem(os, b.problem());
  const std::string text = os.str();
  CHECK(text.find("psd 2") != std::string::npos);
  CHECK(text.find("row 0") != std::string::npos);
}
