#include "rcbc/builder.hpp"

#include <stdexcept>

namespace rcbc {

LinExpr LinExpr::variable(const VarRef& v, double coeff) {
  LinExpr e;
  e.add(v, coeff);
  return e;
}

void LinExpr::add(const VarRef& v, double coeff) {
  if (coeff == 0.0) return;
  auto [it, inserted] = terms_.emplace(v.key(), std::make_pair(v, coeff));
  if (!inserted) {
    it->second.second += coeff;
    if (it->second.second == 0.0) terms_.erase(it);
  }
}

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  constant_ += o.constant_;
  for (const auto& [k, tv] : o.terms_) add(tv.first, tv.second);
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) {
  constant_ -= o.constant_;
  for (const auto& [k, tv] : o.terms_) add(tv.first, -tv.second);
  return *this;
}

LinExpr LinExpr::operator+(const LinExpr& o) const {
  LinExpr r = *this;
  r += o;
  return r;
}

LinExpr LinExpr::operator-(const LinExpr& o) const {
  LinExpr r = *this;
  r -= o;
  return r;
}

LinExpr LinExpr::operator*(double s) const {
  LinExpr r;
  if (s == 0.0) return r;
  r.constant_ = constant_ * s;
  for (const auto& [k, tv] : terms_)
    r.terms_.emplace(k, std::make_pair(tv.first, tv.second * s));
  return r;
}

LinPoly LinPoly::from_poly(const Polynomial& p) {
  LinPoly r(p.n_vars());
  for (const auto& [e, c] : p.terms()) r.add_term(e, LinExpr(c));
  return r;
}

LinPoly LinPoly::scaled(const Polynomial& p, const LinExpr& e) {
  LinPoly r(p.n_vars());
  for (const auto& [mono, c] : p.terms()) r.add_term(mono, e * c);
  return r;
}

void LinPoly::add_term(const Expo& e, const LinExpr& c) {
  if (n_vars_ == 0) n_vars_ = static_cast<int>(e.size());
  auto [it, inserted] = terms_.emplace(e, c);
  if (!inserted) it->second += c;
}

LinPoly& LinPoly::operator+=(const LinPoly& o) {
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  return *this;
}

LinPoly& LinPoly::operator-=(const LinPoly& o) {
  for (const auto& [e, c] : o.terms_) add_term(e, -c);
  return *this;
}

int LinPoly::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_)
    if (!c.is_constant() || c.constant() != 0.0) d = std::max(d, total_degree(e));
  return d;
}

LinPolyMat::LinPolyMat(int dim, int n_vars)
    : dim_(dim), n_vars_(n_vars), entries_(dim * (dim + 1) / 2, LinPoly(n_vars)) {}

LinPoly& LinPolyMat::at(int r, int c) {
  if (c > r) std::swap(r, c);
  return entries_[r * (r + 1) / 2 + c];
}

const LinPoly& LinPolyMat::at(int r, int c) const {
  if (c > r) std::swap(r, c);
  return entries_[r * (r + 1) / 2 + c];
}

int LinPolyMat::max_degree() const {
  int d = 0;
  for (const auto& e : entries_) d = std::max(d, e.degree());
  return d;
}

int SdpBuilder::add_psd_block(int dim, const std::string& name) {
  prob_.psd_dims.push_back(dim);
  prob_.obj_psd.emplace_back();
  block_names_.push_back(name);
  return static_cast<int>(prob_.psd_dims.size()) - 1;
}

VarRef SdpBuilder::psd_entry(int block, int p, int q) const {
  VarRef v;
  v.kind = VarRef::Kind::psd_entry;
  v.block = block;
  v.p = std::max(p, q);
  v.q = std::min(p, q);
  return v;
}

VarRef SdpBuilder::add_nonneg(const std::string&) {
  VarRef v;
  v.kind = VarRef::Kind::nonneg;
  v.index = prob_.nonneg_dim++;
  return v;
}

VarRef SdpBuilder::add_free(const std::string&) {
  VarRef v;
  v.kind = VarRef::Kind::free_var;
  v.index = prob_.free_dim++;
  return v;
}

void SdpBuilder::accumulate(SdpProblem::Row& row, const LinExpr& e,
                            double scale) {
  for (const auto& [k, tv] : e.terms()) {
    const auto& [v, coeff] = tv;
    const double c = coeff * scale;
    switch (v.kind) {
      case VarRef::Kind::psd_entry:
        // Triplets describe the symmetric coefficient matrix; <A, X> counts
        // off-diagonal entries twice, so halve to get a plain coefficient on
        // the entry X_pq.
        row.psd.push_back({v.block, {v.p, v.q, v.p == v.q ? c : 0.5 * c}});
        break;
      case VarRef::Kind::nonneg:
        row.nonneg.emplace_back(v.index, c);
        break;
      case VarRef::Kind::free_var:
        row.free.emplace_back(v.index, c);
        break;
    }
  }
  row.rhs -= e.constant() * scale;
}

void SdpBuilder::add_equality(const LinExpr& expr) {
  SdpProblem::Row row;
  accumulate(row, expr, 1.0);
  // Merge duplicate coefficients so the solver sees clean triplets.
  std::map<std::tuple<int, int, int>, double> psd;
  for (const auto& [b, t] : row.psd) psd[{b, t.p, t.q}] += t.v;
  row.psd.clear();
  for (const auto& [k, v] : psd)
    if (v != 0.0)
      row.psd.push_back({std::get<0>(k), {std::get<1>(k), std::get<2>(k), v}});
  std::map<int, double> nn, fr;
  for (const auto& [i, v] : row.nonneg) nn[i] += v;
  for (const auto& [i, v] : row.free) fr[i] += v;
  row.nonneg.assign(nn.begin(), nn.end());
  row.free.assign(fr.begin(), fr.end());
  prob_.rows.push_back(std::move(row));
}

int SdpBuilder::add_lmi(const std::vector<std::vector<LinExpr>>& sym_entries,
                        const std::string& name) {
  const int d = static_cast<int>(sym_entries.size());
  const int blk = add_psd_block(d, name);
  for (int p = 0; p < d; ++p)
    for (int q = 0; q <= p; ++q) {
      LinExpr e = sym_entries[p][q];
      e.add(psd_entry(blk, p, q), -1.0);
      add_equality(e);
    }
  return blk;
}

int SdpBuilder::add_matrix_sos(const LinPolyMat& M, int half_degree,
                               const std::string& name) {
  const int D = M.dim();
  const int n = M.n_vars();
  if (M.max_degree() > 2 * half_degree)
    throw std::invalid_argument(
        "add_matrix_sos: entry degree " + std::to_string(M.max_degree()) +
        " exceeds Gram basis capacity " + std::to_string(2 * half_degree) +
        " (" + name + ")");
  const std::vector<Expo> basis = enumerate_monomials(n, 0, half_degree);
  const int s = static_cast<int>(basis.size());
  const int blk = add_psd_block(D * s, name);

  // Products of basis monomials, grouped by the resulting monomial.
  std::map<Expo, std::vector<std::pair<int, int>>, GrlexLess> products;
  for (int k = 0; k < s; ++k)
    for (int l = 0; l < s; ++l)
      products[add_expo(basis[k], basis[l])].emplace_back(k, l);

  // Match coefficients of y_r y_c x^alpha between y' M(x) y and the Gram
  // quadratic form over {y_i m_k(x)} with index i * s + k.
  for (int r = 0; r < D; ++r)
    for (int c = 0; c <= r; ++c) {
      const LinPoly& entry = M.at(r, c);
      for (const auto& [alpha, pairs] : products) {
        LinExpr row;
        if (r == c) {
          for (const auto& [k, l] : pairs) {
            if (k > l) continue;  // unordered entries, diagonal block
            row.add(psd_entry(blk, r * s + k, r * s + l), k == l ? 1.0 : 2.0);
          }
        } else {
          for (const auto& [k, l] : pairs)
            row.add(psd_entry(blk, r * s + k, c * s + l), 1.0);
        }
        auto it = entry.terms().find(alpha);
        if (it != entry.terms().end()) row -= it->second;
        add_equality(row);
      }
      // Entry monomials that no basis product can reach are impossible by
      // the degree check above, but guard against gaps anyway.
      for (const auto& [alpha, coeff] : entry.terms())
        if (products.find(alpha) == products.end())
          throw std::invalid_argument(
              "add_matrix_sos: monomial outside Gram basis span (" + name + ")");
    }
  return blk;
}

int SdpBuilder::add_sos_poly(int n_vars, int degree, LinPoly& poly_out,
                             const std::string& name) {
  if (degree % 2 != 0)
    throw std::invalid_argument("add_sos_poly: degree must be even");
  const std::vector<Expo> basis = enumerate_monomials(n_vars, 0, degree / 2);
  const int s = static_cast<int>(basis.size());
  const int blk = add_psd_block(s, name);
  poly_out = LinPoly(n_vars);
  for (int k = 0; k < s; ++k)
    for (int l = 0; l <= k; ++l)
      poly_out.add_term(
          add_expo(basis[k], basis[l]),
          LinExpr::variable(psd_entry(blk, k, l), k == l ? 1.0 : 2.0));
  return blk;
}

void SdpBuilder::maximize(const VarRef& v, double coeff) {
  switch (v.kind) {
    case VarRef::Kind::psd_entry:
      prob_.obj_psd[v.block].push_back({v.p, v.q, v.p == v.q ? coeff : 0.5 * coeff});
      break;
    case VarRef::Kind::nonneg:
      prob_.obj_nonneg.emplace_back(v.index, coeff);
      break;
    case VarRef::Kind::free_var:
      prob_.obj_free.emplace_back(v.index, coeff);
      break;
  }
}

double eval_linexpr(const LinExpr& e, const SdpSolution& sol) {
  double v = e.constant();
  for (const auto& [k, tv] : e.terms()) {
    const auto& [ref, coeff] = tv;
    switch (ref.kind) {
      case VarRef::Kind::psd_entry:
        v += coeff * sol.X[ref.block](ref.p, ref.q);
        break;
      case VarRef::Kind::nonneg:
        v += coeff * sol.x_nonneg(ref.index);
        break;
      case VarRef::Kind::free_var:
        v += coeff * sol.x_free(ref.index);
        break;
    }
  }
  return v;
}

Polynomial eval_linpoly(const LinPoly& p, const SdpSolution& sol) {
  Polynomial out(p.n_vars());
  for (const auto& [e, c] : p.terms()) out.add_term(e, eval_linexpr(c, sol));
  return out;
}

}  // namespace rcbc
