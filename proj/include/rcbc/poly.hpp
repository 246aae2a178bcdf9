#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "rcbc/monomial.hpp"

namespace rcbc {

// Multivariate polynomial with real coefficients, keyed by exponent vector
// in the canonical grlex order.  Zero coefficients are never stored.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(int n_vars) : n_vars_(n_vars) {}

  static Polynomial constant(int n_vars, double c);
  static Polynomial monomial(const Expo& e, double c = 1.0);

  int n_vars() const { return n_vars_; }
  const std::map<Expo, double, GrlexLess>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;  // max total degree, 0 for the zero polynomial

  double coeff(const Expo& e) const;
  void add_term(const Expo& e, double c);

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double s) const;
  Polynomial operator-() const { return *this * -1.0; }

  double eval(const std::vector<double>& x) const;
  double eval(const Eigen::VectorXd& x) const;

  // Largest |coefficient|, 0 for the zero polynomial.
  double max_abs_coeff() const;

  std::string to_string() const;

 private:
  int n_vars_ = 0;
  std::map<Expo, double, GrlexLess> terms_;
};

// Rectangular matrix with polynomial entries.
class PolyMatrix {
 public:
  PolyMatrix() = default;
  PolyMatrix(int rows, int cols, int n_vars);

  static PolyMatrix identity(int dim, int n_vars);
  static PolyMatrix from_constant(const Eigen::MatrixXd& m, int n_vars);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int n_vars() const { return n_vars_; }

  Polynomial& at(int r, int c);
  const Polynomial& at(int r, int c) const;

  PolyMatrix operator+(const PolyMatrix& o) const;
  PolyMatrix operator-(const PolyMatrix& o) const;
  PolyMatrix operator*(const PolyMatrix& o) const;
  PolyMatrix operator*(double s) const;
  // Right-multiply by a constant matrix.
  PolyMatrix operator*(const Eigen::MatrixXd& m) const;
  PolyMatrix transpose() const;

  Eigen::MatrixXd eval(const Eigen::VectorXd& x) const;
  int max_degree() const;
  bool is_symmetric(double tol = 0.0) const;

 private:
  int rows_ = 0, cols_ = 0, n_vars_ = 0;
  std::vector<Polynomial> entries_;
};

// Factorization M(x) = C(x) x for a dictionary without constant term.  Each
// monomial x^a is assigned to column j, the smallest variable index with
// a_j >= 1, contributing x^(a - e_j) at its own row.  Throws if the
// dictionary contains the constant monomial.
PolyMatrix factor_C(const MonomialDict& dict);

// Basis parameterizing a Gram-matrix certificate.  Scalar SOS uses plain
// monomials; matrix SOS uses (aux index, monomial) pairs y_i * m_k(x) with
// aux_dim > 0 and index i * monomials.size() + k.
struct GramBasis {
  std::vector<Expo> monomials;
  int aux_dim = 0;  // 0 for scalar SOS
  int size() const {
    return static_cast<int>(monomials.size()) * (aux_dim > 0 ? aux_dim : 1);
  }
};

// All monomials of degree <= degree/2 including the constant.  degree must
// be even.
GramBasis gram_basis_scalar(int n_vars, int degree);

// Basis {y_i m_k(x)} with m_k of degree <= ceil(entry_degree / 2).
GramBasis gram_basis_matrix(int block_dim, int n_vars, int entry_degree);

}  // namespace rcbc
