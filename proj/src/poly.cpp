#include "rcbc/poly.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace rcbc {

std::string expo_to_string(const Expo& e) {
  std::ostringstream os;
  bool any = false;
  for (size_t i = 0; i < e.size(); ++i) {
    if (e[i] == 0) continue;
    if (any) os << "*";
    os << "x" << (i + 1);
    if (e[i] > 1) os << "^" << e[i];
    any = true;
  }
  return any ? os.str() : "1";
}

std::vector<Expo> enumerate_monomials(int n_vars, int min_deg, int max_deg) {
  std::vector<Expo> out;
  Expo cur(n_vars, 0);
  // Depth-first over exponents, then sort into canonical order.
  std::function<void(int, int)> rec = [&](int var, int remaining) {
    if (var == n_vars - 1) {
      cur[var] = remaining;
      out.push_back(cur);
      return;
    }
    for (int d = 0; d <= remaining; ++d) {
      cur[var] = d;
      rec(var + 1, remaining - d);
    }
    cur[var] = 0;
  };
  for (int deg = min_deg; deg <= max_deg; ++deg) rec(0, deg);
  std::sort(out.begin(), out.end(), GrlexLess{});
  return out;
}

int MonomialDict::max_degree() const {
  int d = 0;
  for (const auto& e : entries) d = std::max(d, total_degree(e));
  return d;
}

int MonomialDict::index_of(const Expo& e) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), e, GrlexLess{});
  if (it != entries.end() && *it == e)
    return static_cast<int>(it - entries.begin());
  return -1;
}

std::vector<double> MonomialDict::eval(const std::vector<double>& x) const {
  std::vector<double> v(entries.size());
  for (size_t i = 0; i < entries.size(); ++i)
    v[i] = eval_expo(entries[i], x.data());
  return v;
}

MonomialDict build_dict(int n_vars, int max_degree, bool include_constant) {
  if (n_vars < 1 || max_degree < 1)
    throw std::invalid_argument("build_dict: n_vars and max_degree must be >= 1");
  MonomialDict d;
  d.n_vars = n_vars;
  d.includes_constant = include_constant;
  d.entries = enumerate_monomials(n_vars, include_constant ? 0 : 1, max_degree);
  return d;
}

Polynomial Polynomial::constant(int n_vars, double c) {
  Polynomial p(n_vars);
  p.add_term(zero_expo(n_vars), c);
  return p;
}

Polynomial Polynomial::monomial(const Expo& e, double c) {
  Polynomial p(static_cast<int>(e.size()));
  p.add_term(e, c);
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) d = std::max(d, total_degree(e));
  return d;
}

double Polynomial::coeff(const Expo& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Expo& e, double c) {
  if (static_cast<int>(e.size()) != n_vars_)
    throw std::invalid_argument("Polynomial::add_term: wrong arity");
  auto [it, inserted] = terms_.emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  } else if (c == 0.0) {
    terms_.erase(it);
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (n_vars_ == 0 && terms_.empty()) n_vars_ = o.n_vars_;
  if (o.n_vars_ != n_vars_ && !o.terms_.empty())
    throw std::invalid_argument("Polynomial: arity mismatch");
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  if (n_vars_ == 0 && terms_.empty()) n_vars_ = o.n_vars_;
  if (o.n_vars_ != n_vars_ && !o.terms_.empty())
    throw std::invalid_argument("Polynomial: arity mismatch");
  for (const auto& [e, c] : o.terms_) add_term(e, -c);
  return *this;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  Polynomial r = *this;
  r += o;
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
  Polynomial r = *this;
  r -= o;
  return r;
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
  if (n_vars_ != o.n_vars_ && !terms_.empty() && !o.terms_.empty())
    throw std::invalid_argument("Polynomial: arity mismatch");
  Polynomial r(std::max(n_vars_, o.n_vars_));
  for (const auto& [ea, ca] : terms_)
    for (const auto& [eb, cb] : o.terms_) r.add_term(add_expo(ea, eb), ca * cb);
  return r;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial r(n_vars_);
  if (s == 0.0) return r;
  for (const auto& [e, c] : terms_) r.add_term(e, c * s);
  return r;
}

double Polynomial::eval(const std::vector<double>& x) const {
  double v = 0.0;
  for (const auto& [e, c] : terms_) v += c * eval_expo(e, x.data());
  return v;
}

double Polynomial::eval(const Eigen::VectorXd& x) const {
  double v = 0.0;
  for (const auto& [e, c] : terms_) v += c * eval_expo(e, x.data());
  return v;
}

double Polynomial::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [e, c] : terms_) {
    if (!first) os << (c >= 0 ? " + " : " - ");
    else if (c < 0) os << "-";
    os << std::abs(c);
    if (total_degree(e) > 0) os << "*" << expo_to_string(e);
    first = false;
  }
  return os.str();
}

PolyMatrix::PolyMatrix(int rows, int cols, int n_vars)
    : rows_(rows), cols_(cols), n_vars_(n_vars),
      entries_(static_cast<size_t>(rows) * cols, Polynomial(n_vars)) {}

PolyMatrix PolyMatrix::identity(int dim, int n_vars) {
  PolyMatrix m(dim, dim, n_vars);
  for (int i = 0; i < dim; ++i) m.at(i, i) = Polynomial::constant(n_vars, 1.0);
  return m;
}

PolyMatrix PolyMatrix::from_constant(const Eigen::MatrixXd& c, int n_vars) {
  PolyMatrix m(static_cast<int>(c.rows()), static_cast<int>(c.cols()), n_vars);
  for (int i = 0; i < c.rows(); ++i)
    for (int j = 0; j < c.cols(); ++j)
      if (c(i, j) != 0.0) m.at(i, j) = Polynomial::constant(n_vars, c(i, j));
  return m;
}

Polynomial& PolyMatrix::at(int r, int c) {
  return entries_[static_cast<size_t>(r) * cols_ + c];
}

const Polynomial& PolyMatrix::at(int r, int c) const {
  return entries_[static_cast<size_t>(r) * cols_ + c];
}

PolyMatrix PolyMatrix::operator+(const PolyMatrix& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_)
    throw std::invalid_argument("PolyMatrix: dimension mismatch");
  PolyMatrix r = *this;
  for (size_t i = 0; i < entries_.size(); ++i) r.entries_[i] += o.entries_[i];
  return r;
}

PolyMatrix PolyMatrix::operator-(const PolyMatrix& o) const {
  if (rows_ != o.rows_ || cols_ != o.cols_)
    throw std::invalid_argument("PolyMatrix: dimension mismatch");
  PolyMatrix r = *this;
  for (size_t i = 0; i < entries_.size(); ++i) r.entries_[i] -= o.entries_[i];
  return r;
}

PolyMatrix PolyMatrix::operator*(const PolyMatrix& o) const {
  if (cols_ != o.rows_)
    throw std::invalid_argument("PolyMatrix: dimension mismatch");
  PolyMatrix r(rows_, o.cols_, n_vars_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < o.cols_; ++j)
      for (int k = 0; k < cols_; ++k) r.at(i, j) += at(i, k) * o.at(k, j);
  return r;
}

PolyMatrix PolyMatrix::operator*(double s) const {
  PolyMatrix r = *this;
  for (auto& e : r.entries_) e = e * s;
  return r;
}

PolyMatrix PolyMatrix::operator*(const Eigen::MatrixXd& m) const {
  if (cols_ != m.rows())
    throw std::invalid_argument("PolyMatrix: dimension mismatch");
  PolyMatrix r(rows_, static_cast<int>(m.cols()), n_vars_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < m.cols(); ++j)
      for (int k = 0; k < cols_; ++k)
        if (m(k, j) != 0.0) r.at(i, j) += at(i, k) * m(k, j);
  return r;
}

PolyMatrix PolyMatrix::transpose() const {
  PolyMatrix r(cols_, rows_, n_vars_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) r.at(j, i) = at(i, j);
  return r;
}

Eigen::MatrixXd PolyMatrix::eval(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd m(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) m(i, j) = at(i, j).eval(x);
  return m;
}

int PolyMatrix::max_degree() const {
  int d = 0;
  for (const auto& e : entries_) d = std::max(d, e.degree());
  return d;
}

bool PolyMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (int i = 0; i < rows_; ++i)
    for (int j = i + 1; j < cols_; ++j) {
      Polynomial diff = at(i, j) - at(j, i);
      if (diff.max_abs_coeff() > tol) return false;
    }
  return true;
}

PolyMatrix factor_C(const MonomialDict& dict) {
  if (dict.includes_constant ||
      dict.index_of(zero_expo(dict.n_vars)) >= 0)
    throw std::invalid_argument(
        "factor_C: dictionary with constant monomial cannot be factored");
  PolyMatrix C(dict.size(), dict.n_vars, dict.n_vars);
  for (int r = 0; r < dict.size(); ++r) {
    const Expo& a = dict.entries[r];
    int j = -1;
    for (int v = 0; v < dict.n_vars; ++v)
      if (a[v] >= 1) {
        j = v;
        break;
      }
    Expo rem = a;
    rem[j] -= 1;
    C.at(r, j) += Polynomial::monomial(rem, 1.0);
  }
  return C;
}

GramBasis gram_basis_scalar(int n_vars, int degree) {
  if (degree % 2 != 0)
    throw std::invalid_argument("gram_basis_scalar: degree must be even");
  GramBasis b;
  b.monomials = enumerate_monomials(n_vars, 0, degree / 2);
  b.aux_dim = 0;
  return b;
}

GramBasis gram_basis_matrix(int block_dim, int n_vars, int entry_degree) {
  if (block_dim < 1)
    throw std::invalid_argument("gram_basis_matrix: block_dim must be >= 1");
  GramBasis b;
  b.monomials = enumerate_monomials(n_vars, 0, (entry_degree + 1) / 2);
  b.aux_dim = block_dim;
  return b;
}

}  // namespace rcbc
