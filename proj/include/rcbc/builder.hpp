#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rcbc/poly.hpp"
#include "rcbc/sdp.hpp"

namespace rcbc {

// Reference to one scalar decision variable: an entry of a PSD block, a
// nonnegative scalar, or a free scalar.
struct VarRef {
  enum class Kind : uint8_t { psd_entry, nonneg, free_var };
  Kind kind = Kind::free_var;
  int block = -1;  // PSD block id
  int p = 0, q = 0;
  int index = -1;  // nonneg / free index

  uint64_t key() const {
    uint64_t k = static_cast<uint64_t>(kind) << 60;
    if (kind == Kind::psd_entry)
      k |= (static_cast<uint64_t>(block) << 40) |
           (static_cast<uint64_t>(p) << 20) | static_cast<uint64_t>(q);
    else
      k |= static_cast<uint64_t>(index);
    return k;
  }
};

// Affine expression c0 + sum coeff_v * var_v over scalar decision variables.
class LinExpr {
 public:
  LinExpr() = default;
  explicit LinExpr(double c) : constant_(c) {}
  static LinExpr variable(const VarRef& v, double coeff = 1.0);

  double constant() const { return constant_; }
  const std::map<uint64_t, std::pair<VarRef, double>>& terms() const {
    return terms_;
  }
  bool is_constant() const { return terms_.empty(); }

  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr operator+(const LinExpr& o) const;
  LinExpr operator-(const LinExpr& o) const;
  LinExpr operator*(double s) const;
  LinExpr operator-() const { return *this * -1.0; }
  void add(const VarRef& v, double coeff);
  void add_constant(double c) { constant_ += c; }

 private:
  double constant_ = 0.0;
  std::map<uint64_t, std::pair<VarRef, double>> terms_;
};

// Polynomial in x whose coefficients are affine in the decision variables.
class LinPoly {
 public:
  LinPoly() = default;
  explicit LinPoly(int n_vars) : n_vars_(n_vars) {}
  static LinPoly from_poly(const Polynomial& p);
  // p(x) * e for a known polynomial and an affine coefficient.
  static LinPoly scaled(const Polynomial& p, const LinExpr& e);

  int n_vars() const { return n_vars_; }
  const std::map<Expo, LinExpr, GrlexLess>& terms() const { return terms_; }

  LinPoly& operator+=(const LinPoly& o);
  LinPoly& operator-=(const LinPoly& o);
  void add_term(const Expo& e, const LinExpr& c);
  int degree() const;

 private:
  int n_vars_ = 0;
  std::map<Expo, LinExpr, GrlexLess> terms_;
};

// Symmetric-by-construction matrix of LinPoly entries (only the lower
// triangle is stored).
class LinPolyMat {
 public:
  LinPolyMat() = default;
  LinPolyMat(int dim, int n_vars);

  int dim() const { return dim_; }
  int n_vars() const { return n_vars_; }
  LinPoly& at(int r, int c);
  const LinPoly& at(int r, int c) const;
  int max_degree() const;

 private:
  int dim_ = 0, n_vars_ = 0;
  std::vector<LinPoly> entries_;  // lower triangle, row-major
};

// Accumulates decision variables and constraints, then emits an SdpProblem.
class SdpBuilder {
 public:
  // Returns the block id; entries are addressed through psd_entry().
  int add_psd_block(int dim, const std::string& name = "");
  VarRef psd_entry(int block, int p, int q) const;
  VarRef add_nonneg(const std::string& name = "");
  VarRef add_free(const std::string& name = "");

  // expr == 0
  void add_equality(const LinExpr& expr);
  // M == S for a fresh PSD slack block S; returns the block id.
  int add_lmi(const std::vector<std::vector<LinExpr>>& sym_entries,
              const std::string& name = "");

  // Constrains M(x) to be a matrix sum of squares over the basis
  // {y_i m_k(x)}, m_k of degree <= half_degree.  Returns the Gram block id.
  // Throws if an entry degree exceeds 2 * half_degree.
  int add_matrix_sos(const LinPolyMat& M, int half_degree,
                     const std::string& name = "");

  // Scalar SOS multiplier of the given even degree: returns its Gram block id
  // and writes the polynomial's coefficients as affine expressions.
  int add_sos_poly(int n_vars, int degree, LinPoly& poly_out,
                   const std::string& name = "");

  void maximize(const VarRef& v, double coeff = 1.0);

  SdpProblem problem() const { return prob_; }
  int num_rows() const { return prob_.num_rows(); }
  const std::vector<std::string>& block_names() const { return block_names_; }

 private:
  void accumulate(SdpProblem::Row& row, const LinExpr& e, double scale);

  SdpProblem prob_;
  std::vector<std::string> block_names_;
};

// Evaluate an affine expression at a solved point.
double eval_linexpr(const LinExpr& e, const SdpSolution& sol);
// Evaluate a LinPoly into a concrete polynomial.
Polynomial eval_linpoly(const LinPoly& p, const SdpSolution& sol);

}  // namespace rcbc
