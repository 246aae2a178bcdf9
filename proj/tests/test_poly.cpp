#include <doctest.h>

#include "rcbc/poly.hpp"
#include "rcbc/rng.hpp"

using namespace rcbc;

namespace {

Polynomial random_poly(Rng& rng, int n_vars, int degree, int terms) {
  Polynomial p(n_vars);
  auto monos = enumerate_monomials(n_vars, 0, degree);
  for (int t = 0; t < terms; ++t) {
    const auto& e = monos[rng.next_u64() % monos.size()];
    p.add_term(e, rng.uniform(-2.0, 2.0));
  }
  return p;
}

Eigen::VectorXd random_point(Rng& rng, int n) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.uniform(-2.0, 2.0);
  return x;
}

}  // namespace

TEST_CASE("build_dict basic counts and ordering") {
  MonomialDict d = build_dict(3, 2, false);
  CHECK(d.size() == 9);
  // First three entries are the degree-one monomials in variable order.
  CHECK(d.entries[0] == Expo{1, 0, 0});
  CHECK(d.entries[1] == Expo{0, 1, 0});
  CHECK(d.entries[2] == Expo{0, 0, 1});
  // All six degree-two monomials follow.
  for (int i = 3; i < 9; ++i) CHECK(total_degree(d.entries[i]) == 2);

  CHECK(build_dict(3, 3, false).size() == 19);
  MonomialDict d1 = build_dict(1, 1, false);
  REQUIRE(d1.size() == 1);
  CHECK(d1.entries[0] == Expo{1});
}

TEST_CASE("build_dict size is binomial(n+d,d)-1 without constant") {
  auto binom = [](int n, int k) {
    double r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return static_cast<int>(r + 0.5);
  };
  for (int n = 1; n <= 4; ++n)
    for (int deg = 1; deg <= 4; ++deg)
      CHECK(build_dict(n, deg, false).size() == binom(n + deg, deg) - 1);
}

TEST_CASE("factor_C reproduces M(x) = C(x) x") {
  SUBCASE("degree-one dictionary gives the identity") {
    MonomialDict d = build_dict(3, 1, false);
    PolyMatrix C = factor_C(d);
    Eigen::VectorXd x(3);
    x << 0.3, -1.2, 0.7;
    CHECK(C.eval(x).isApprox(Eigen::MatrixXd::Identity(3, 3)));
  }
  SUBCASE("single mixed monomial uses the smallest variable index") {
    MonomialDict d;
    d.n_vars = 2;
    d.entries = {Expo{1, 1}};
    PolyMatrix C = factor_C(d);
    REQUIRE(C.rows() == 1);
    REQUIRE(C.cols() == 2);
    Eigen::VectorXd x(2);
    x << 5.0, 7.0;
    Eigen::MatrixXd Cx = C.eval(x);
    CHECK(Cx(0, 0) == doctest::Approx(7.0));  // x2 in column 1
    CHECK(Cx(0, 1) == 0.0);
  }
  SUBCASE("symbolic identity for all benchmark-sized dictionaries") {
    for (auto [n, deg] : {std::pair{3, 2}, std::pair{3, 3}, std::pair{1, 1},
                          std::pair{2, 4}}) {
      MonomialDict d = build_dict(n, deg, false);
      PolyMatrix C = factor_C(d);
      // C(x) x - M(x) must vanish coefficientwise.
      for (int r = 0; r < d.size(); ++r) {
        Polynomial acc(n);
        for (int c = 0; c < n; ++c)
          acc += C.at(r, c) * Polynomial::monomial(unit_expo(n, c));
        acc -= Polynomial::monomial(d.entries[r]);
        CHECK(acc.max_abs_coeff() == 0.0);
      }
    }
  }
  SUBCASE("evaluation agrees at 1000 random points") {
    MonomialDict d = build_dict(3, 2, false);
    PolyMatrix C = factor_C(d);
    Rng rng(17, 0);
    for (int trial = 0; trial < 1000; ++trial) {
      Eigen::VectorXd x = random_point(rng, 3);
      std::vector<double> xv(x.data(), x.data() + 3);
      auto m = d.eval(xv);
      Eigen::VectorXd cx = C.eval(x) * x;
      for (int i = 0; i < d.size(); ++i)
        CHECK(cx(i) == doctest::Approx(m[i]).epsilon(1e-12));
    }
  }
  SUBCASE("constant monomial is rejected") {
    MonomialDict d = build_dict(2, 2, true);
    CHECK_THROWS(factor_C(d));
  }
}

TEST_CASE("dictionary evaluation in canonical order") {
  MonomialDict d = build_dict(3, 2, false);
  std::vector<double> m = d.eval({1.0, 2.0, 3.0});
  // Grlex: x1, x2, x3, x1^2, x1 x2, x1 x3, x2^2, x2 x3, x3^2.
  std::vector<double> want = {1, 2, 3, 1, 2, 3, 4, 6, 9};
  CHECK(m == want);
}

TEST_CASE("polynomial arithmetic laws on random instances") {
  Rng rng(3, 0);
  for (int trial = 0; trial < 50; ++trial) {
    Polynomial a = random_poly(rng, 3, 3, 5);
    Polynomial b = random_poly(rng, 3, 3, 5);
    Polynomial c = random_poly(rng, 3, 2, 4);
    Eigen::VectorXd x = random_point(rng, 3);
    const double scale = 1.0 + std::abs((a * b).eval(x)) + std::abs(c.eval(x));
    CHECK((a + b).eval(x) == doctest::Approx(b.eval(x) + a.eval(x)).epsilon(1e-12));
    CHECK((a * b).eval(x) ==
          doctest::Approx(a.eval(x) * b.eval(x)).scale(scale).epsilon(1e-12));
    Polynomial lhs = a * (b + c);
    Polynomial rhs = a * b + a * c;
    CHECK((lhs - rhs).max_abs_coeff() <= 1e-12 * (1.0 + lhs.max_abs_coeff()));
    Polynomial zero_sum = a + (a * -1.0);
    CHECK(zero_sum.is_zero());
  }
}

TEST_CASE("polynomial additive identity keeps terms pruned") {
  Polynomial p = Polynomial::monomial(Expo{1, 1}, 2.5);
  Polynomial q = p + Polynomial(2);
  CHECK(q.terms().size() == 1);
  p.add_term(Expo{1, 1}, -2.5);
  CHECK(p.is_zero());
}

TEST_CASE("gram bases") {
  GramBasis s1 = gram_basis_scalar(3, 2);
  CHECK(s1.size() == 4);  // 1, x1, x2, x3
  CHECK(gram_basis_scalar(3, 4).size() == 10);
  GramBasis s2 = gram_basis_scalar(1, 2);
  CHECK(s2.size() == 2);
  CHECK_THROWS(gram_basis_scalar(2, 3));

  CHECK(gram_basis_matrix(16, 3, 2).size() == 64);
  GramBasis m2 = gram_basis_matrix(2, 1, 0);
  CHECK(m2.size() == 2);  // y1, y2
  CHECK(gram_basis_matrix(28, 3, 2).size() == 112);
}

TEST_CASE("poly matrix evaluation and transpose") {
  MonomialDict d = build_dict(3, 2, false);
  PolyMatrix C = factor_C(d);
  Eigen::VectorXd x(3);
  x << 0.3, -0.7, 1.1;
  std::vector<double> xv(x.data(), x.data() + 3);
  auto m = d.eval(xv);
  Eigen::VectorXd cx = C.eval(x) * x;
  for (int i = 0; i < d.size(); ++i)
    CHECK(cx(i) == doctest::Approx(m[i]).epsilon(1e-12));
  CHECK(C.transpose().rows() == C.cols());
  CHECK(C.max_degree() == 1);
}
