#include "rcbc/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

namespace rcbc {

namespace {

// svec packs the lower triangle column-major with off-diagonals times sqrt(2),
// so that <A, B> = svec(A)' svec(B).
constexpr double kSqrt2 = 1.4142135623730951;

int svec_dim(int d) { return d * (d + 1) / 2; }

int svec_index(int d, int p, int q) {
  // requires p >= q
  return q * d - q * (q - 1) / 2 + (p - q);
}

void svec_of(const Eigen::MatrixXd& M, double* out) {
  const int d = static_cast<int>(M.rows());
  int k = 0;
  for (int q = 0; q < d; ++q) {
    out[k++] = M(q, q);
    for (int p = q + 1; p < d; ++p) out[k++] = kSqrt2 * M(p, q);
  }
}

void smat_of(const double* v, Eigen::MatrixXd& M) {
  const int d = static_cast<int>(M.rows());
  int k = 0;
  for (int q = 0; q < d; ++q) {
    M(q, q) = v[k++];
    for (int p = q + 1; p < d; ++p) {
      M(p, q) = v[k] / kSqrt2;
      M(q, p) = v[k] / kSqrt2;
      ++k;
    }
  }
}

struct BlockLayout {
  int lp_dim = 0;
  std::vector<int> psd_dims;
  std::vector<int> psd_offset;  // offsets into the cone vector after the LP part
  int total = 0;

  void init(int lp, const std::vector<int>& dims) {
    lp_dim = lp;
    psd_dims = dims;
    psd_offset.resize(dims.size());
    int off = lp;
    for (size_t b = 0; b < dims.size(); ++b) {
      psd_offset[b] = off;
      off += svec_dim(dims[b]);
    }
    total = off;
  }
};

// Per-block constraint coefficients in matrix form, for the Schur complement.
struct BlockCols {
  // column index (constraint), triplets of the symmetric coefficient matrix
  std::vector<std::pair<int, std::vector<SdpTriplet>>> cols;
};

struct ConeWork {
  // Nesterov-Todd scaling state.
  std::vector<Eigen::MatrixXd> R, Rti, Lam, LamInv;  // per PSD block
  std::vector<Eigen::VectorXd> lambda_psd;           // scaled spectra
  Eigen::VectorXd w_lp, lambda_lp;
};

class Solver {
 public:
  Solver(const SdpProblem& prob, const SdpOptions& opts)
      : prob_(prob), opts_(opts) {
    nx_ = prob.num_rows();
    nf_ = prob.free_dim;
    layout_.init(prob.nonneg_dim, prob.psd_dims);
    build_data();
  }

  SdpSolution run();

 private:
  void build_data();

  // Cone-space linear maps from the constraint triplets.
  void apply_G(const Eigen::VectorXd& y, Eigen::VectorXd& cone) const;
  void apply_GT(const Eigen::VectorXd& cone, Eigen::VectorXd& y) const;

  // NT scaling from the current iterate.
  bool compute_scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z,
                       ConeWork& w) const;

  // Scaled-space helpers.
  Eigen::VectorXd scale_z(const ConeWork& w, const Eigen::VectorXd& z) const;
  Eigen::VectorXd scale_s(const ConeWork& w, const Eigen::VectorXd& s) const;
  Eigen::VectorXd unscale_ds(const ConeWork& w, const Eigen::VectorXd& v) const;
  Eigen::VectorXd wtw_inv(const ConeWork& w, const Eigen::VectorXd& v) const;
  Eigen::VectorXd wtw(const ConeWork& w, const Eigen::VectorXd& v) const;

  // Factor H = G' (W'W)^-1 G (+ saddle with the free-variable rows) and keep
  // the factors for repeated solves.
  bool factor_kkt(const ConeWork& w);
  // Solve the 3x3 KKT system
  //   A'^T dy + G^T dz = bx,  A dx = by,  G dx - W'W dz = bz
  // with A the free-variable coupling.
  void solve_kkt3(const ConeWork& w, const Eigen::VectorXd& bx,
                  const Eigen::VectorXd& by, const Eigen::VectorXd& bz,
                  Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                  Eigen::VectorXd& dz, int refine = 2) const;

  double max_step_cone(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) const;
  // Largest amount by which v sits outside the cone (negative if interior).
  double cone_deficit(const Eigen::VectorXd& v) const;

  SdpSolution extract(SdpStatus status, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                      double tau, const std::string& msg, int iters) const;

  const SdpProblem& prob_;
  SdpOptions opts_;
  int nx_ = 0;  // conelp variable count = number of equality rows
  int nf_ = 0;  // free variables = conelp equality rows
  BlockLayout layout_;

  // conelp data: min c'v s.t. Gv + s = h (cone), Aeq v = beq.
  Eigen::VectorXd c_, h_, beq_;
  Eigen::MatrixXd Aeq_;
  std::vector<std::vector<std::pair<int, double>>> g_cols_;  // svec-space columns
  std::vector<BlockCols> block_cols_;                        // per PSD block
  std::vector<std::vector<std::pair<int, double>>> lp_rows_; // per LP entry: (col, v)

  // Ruiz equilibration scales: columns (our constraint rows), PSD blocks
  // (uniform within a block to preserve the cone), LP entries, free rows.
  std::vector<double> col_scale_, blk_scale_, lp_scale_, free_scale_;

  // Iteration workspace.
  mutable Eigen::MatrixXd H_;
  mutable Eigen::LLT<Eigen::MatrixXd> hllt_;
  mutable Eigen::MatrixXd hinv_at_;  // H^-1 Aeq'
  mutable Eigen::LLT<Eigen::MatrixXd> schur_llt_;
  double hreg_ = 0.0;
};

void Solver::build_data() {
  const int nb = static_cast<int>(prob_.psd_dims.size());
  col_scale_.assign(nx_, 1.0);
  blk_scale_.assign(nb, 1.0);
  lp_scale_.assign(prob_.nonneg_dim, 1.0);
  free_scale_.assign(nf_, 1.0);

  // Block-aware Ruiz equilibration: drive the magnitude of every scaled
  // coefficient group toward one.  PSD blocks get one uniform scale so the
  // cone is preserved.
  std::vector<double> colmax(nx_), blkmax(nb), lpmax(prob_.nonneg_dim),
      fmax(nf_);
  for (int pass = 0; pass < 6; ++pass) {
    std::fill(colmax.begin(), colmax.end(), 0.0);
    std::fill(blkmax.begin(), blkmax.end(), 0.0);
    std::fill(lpmax.begin(), lpmax.end(), 0.0);
    std::fill(fmax.begin(), fmax.end(), 0.0);
    for (int i = 0; i < nx_; ++i) {
      const auto& row = prob_.rows[i];
      for (const auto& [b, t] : row.psd) {
        const double v = std::abs(t.v) * col_scale_[i] * blk_scale_[b];
        colmax[i] = std::max(colmax[i], v);
        blkmax[b] = std::max(blkmax[b], v);
      }
      for (const auto& [k, v0] : row.nonneg) {
        const double v = std::abs(v0) * col_scale_[i] * lp_scale_[k];
        colmax[i] = std::max(colmax[i], v);
        lpmax[k] = std::max(lpmax[k], v);
      }
      for (const auto& [f, v0] : row.free) {
        const double v = std::abs(v0) * col_scale_[i] * free_scale_[f];
        colmax[i] = std::max(colmax[i], v);
        fmax[f] = std::max(fmax[f], v);
      }
    }
    auto update = [](std::vector<double>& scale, const std::vector<double>& m) {
      for (size_t k = 0; k < scale.size(); ++k)
        if (m[k] > 0) scale[k] /= std::sqrt(m[k]);
    };
    update(col_scale_, colmax);
    update(blk_scale_, blkmax);
    update(lp_scale_, lpmax);
    update(free_scale_, fmax);
  }

  c_.resize(nx_);
  for (int i = 0; i < nx_; ++i) c_(i) = -prob_.rows[i].rhs * col_scale_[i];

  h_ = Eigen::VectorXd::Zero(layout_.total);
  for (const auto& [k, v] : prob_.obj_nonneg) h_(k) -= v * lp_scale_[k];
  for (int b = 0; b < nb && b < static_cast<int>(prob_.obj_psd.size()); ++b) {
    const int d = prob_.psd_dims[b];
    for (const auto& t : prob_.obj_psd[b]) {
      const int idx = layout_.psd_offset[b] + svec_index(d, t.p, t.q);
      h_(idx) -= (t.p == t.q ? t.v : kSqrt2 * t.v) * blk_scale_[b];
    }
  }

  Aeq_ = Eigen::MatrixXd::Zero(nf_, nx_);
  beq_ = Eigen::VectorXd::Zero(nf_);
  for (const auto& [f, v] : prob_.obj_free) beq_(f) = -v * free_scale_[f];

  g_cols_.resize(nx_);
  block_cols_.resize(nb);
  std::vector<std::vector<SdpTriplet>> per_block(nb);
  lp_rows_.resize(prob_.nonneg_dim);
  for (int i = 0; i < nx_; ++i) {
    const auto& row = prob_.rows[i];
    for (auto& pb : per_block) pb.clear();
    for (const auto& [b, t] : row.psd)
      per_block[b].push_back(
          {t.p, t.q, t.v * col_scale_[i] * blk_scale_[b]});
    auto& col = g_cols_[i];
    for (const auto& [k, v] : row.nonneg) {
      const double sv = v * col_scale_[i] * lp_scale_[k];
      col.emplace_back(k, sv);
      lp_rows_[k].emplace_back(i, sv);
    }
    for (size_t b = 0; b < per_block.size(); ++b) {
      if (per_block[b].empty()) continue;
      const int d = prob_.psd_dims[b];
      for (const auto& t : per_block[b])
        col.emplace_back(layout_.psd_offset[b] + svec_index(d, t.p, t.q),
                         t.p == t.q ? t.v : kSqrt2 * t.v);
      block_cols_[b].cols.emplace_back(i, per_block[b]);
    }
    for (const auto& [f, v] : row.free)
      Aeq_(f, i) = v * col_scale_[i] * free_scale_[f];
  }
}

void Solver::apply_G(const Eigen::VectorXd& y, Eigen::VectorXd& cone) const {
  cone.setZero(layout_.total);
  for (int i = 0; i < nx_; ++i) {
    const double yi = y(i);
    if (yi == 0.0) continue;
    for (const auto& [k, v] : g_cols_[i]) cone(k) += yi * v;
  }
}

void Solver::apply_GT(const Eigen::VectorXd& cone, Eigen::VectorXd& y) const {
  y.resize(nx_);
  for (int i = 0; i < nx_; ++i) {
    double acc = 0.0;
    for (const auto& [k, v] : g_cols_[i]) acc += cone(k) * v;
    y(i) = acc;
  }
}

bool Solver::compute_scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z,
                             ConeWork& w) const {
  const int nb = static_cast<int>(prob_.psd_dims.size());
  w.R.resize(nb);
  w.Rti.resize(nb);
  w.Lam.resize(nb);
  w.LamInv.resize(nb);
  w.lambda_psd.resize(nb);
  if (prob_.nonneg_dim > 0) {
    auto sl = s.head(prob_.nonneg_dim).array();
    auto zl = z.head(prob_.nonneg_dim).array();
    if ((sl <= 0).any() || (zl <= 0).any()) return false;
    w.w_lp = (sl / zl).sqrt().matrix();
    w.lambda_lp = (sl * zl).sqrt().matrix();
  }
  for (int b = 0; b < nb; ++b) {
    const int d = prob_.psd_dims[b];
    Eigen::MatrixXd S(d, d), Z(d, d);
    smat_of(s.data() + layout_.psd_offset[b], S);
    smat_of(z.data() + layout_.psd_offset[b], Z);
    Eigen::LLT<Eigen::MatrixXd> ls(S), lz(Z);
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    Eigen::MatrixXd Ls = ls.matrixL();
    Eigen::MatrixXd Lz = lz.matrixL();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Lz.transpose() * Ls,
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd sig = svd.singularValues();
    if (sig.minCoeff() <= 0) return false;
    Eigen::VectorXd sq = sig.array().sqrt().matrix();
    // R' Z R = diag(sig), R^-1 S R^-T = diag(sig)
    w.R[b] = Ls * svd.matrixV() * sq.cwiseInverse().asDiagonal();
    w.Rti[b] = Lz * svd.matrixU() * sq.cwiseInverse().asDiagonal();
    w.Lam[b] = w.R[b] * w.R[b].transpose();
    w.LamInv[b] = w.Rti[b] * w.Rti[b].transpose();
    w.lambda_psd[b] = sig;
  }
  return true;
}

Eigen::VectorXd Solver::scale_z(const ConeWork& w, const Eigen::VectorXd& z) const {
  Eigen::VectorXd out(layout_.total);
  if (prob_.nonneg_dim > 0)
    out.head(prob_.nonneg_dim) =
        w.w_lp.cwiseProduct(z.head(prob_.nonneg_dim));
  for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
    const int d = prob_.psd_dims[b];
    Eigen::MatrixXd Z(d, d);
    smat_of(z.data() + layout_.psd_offset[b], Z);
    Eigen::MatrixXd M = w.R[b].transpose() * Z * w.R[b];
    svec_of(M, out.data() + layout_.psd_offset[b]);
  }
  return out;
}

Eigen::VectorXd Solver::scale_s(const ConeWork& w, const Eigen::VectorXd& s) const {
  Eigen::VectorXd out(layout_.total);
  if (prob_.nonneg_dim > 0)
    out.head(prob_.nonneg_dim) =
        s.head(prob_.nonneg_dim).cwiseQuotient(w.w_lp);
  for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
    const int d = prob_.psd_dims[b];
    Eigen::MatrixXd S(d, d);
    smat_of(s.data() + layout_.psd_offset[b], S);
    Eigen::MatrixXd M = w.Rti[b].transpose() * S * w.Rti[b];
    svec_of(M, out.data() + layout_.psd_offset[b]);
  }
  return out;
}

Eigen::VectorXd Solver::unscale_ds(const ConeWork& w,
                                   const Eigen::VectorXd& v) const {
  // ds = W^T(v): R V R' per block, w .* v on the LP part.
  Eigen::VectorXd out(layout_.total);
  if (prob_.nonneg_dim > 0)
    out.head(prob_.nonneg_dim) =
        w.w_lp.cwiseProduct(v.head(prob_.nonneg_dim));
  for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
    const int d = prob_.psd_dims[b];
    Eigen::MatrixXd V(d, d);
    smat_of(v.data() + layout_.psd_offset[b], V);
    Eigen::MatrixXd M = w.R[b] * V * w.R[b].transpose();
    svec_of(M, out.data() + layout_.psd_offset[b]);
  }
  return out;
}

Eigen::VectorXd Solver::wtw_inv(const ConeWork& w, const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(layout_.total);
  if (prob_.nonneg_dim > 0)
    out.head(prob_.nonneg_dim) = v.head(prob_.nonneg_dim).array() /
                                 w.w_lp.array().square();
  for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
    const int d = prob_.psd_dims[b];
    Eigen::MatrixXd V(d, d);
    smat_of(v.data() + layout_.psd_offset[b], V);
    Eigen::MatrixXd M = w.LamInv[b] * V * w.LamInv[b];
    svec_of(M, out.data() + layout_.psd_offset[b]);
  }
  return out;
}

Eigen::VectorXd Solver::wtw(const ConeWork& w, const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(layout_.total);
  if (prob_.nonneg_dim > 0)
    out.head(prob_.nonneg_dim) = v.head(prob_.nonneg_dim).array() *
                                 w.w_lp.array().square();
  for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
    const int d = prob_.psd_dims[b];
    Eigen::MatrixXd V(d, d);
    smat_of(v.data() + layout_.psd_offset[b], V);
    Eigen::MatrixXd M = w.Lam[b] * V * w.Lam[b];
    svec_of(M, out.data() + layout_.psd_offset[b]);
  }
  return out;
}

bool Solver::factor_kkt(const ConeWork& w) {
  H_.setZero(nx_, nx_);

  // LP contribution: rank-one per nonnegative entry.
  for (int k = 0; k < prob_.nonneg_dim; ++k) {
    const double wi2 = 1.0 / (w.w_lp(k) * w.w_lp(k));
    const auto& rows = lp_rows_[k];
    for (size_t a = 0; a < rows.size(); ++a)
      for (size_t bb = a; bb < rows.size(); ++bb) {
        const auto [i, vi] = rows[a];
        const auto [j, vj] = rows[bb];
        const double add = vi * vj * wi2;
        if (i <= j) H_(i, j) += add;
        else H_(j, i) += add;
      }
  }

  // PSD contribution, one block at a time:
  // H_ij += <A_i, LamInv A_j LamInv>.
  for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
    const int d = prob_.psd_dims[b];
    const Eigen::MatrixXd& Li = w.LamInv[b];
    const auto& cols = block_cols_[b].cols;
    Eigen::MatrixXd U(d, d);
    for (size_t jj = 0; jj < cols.size(); ++jj) {
      const auto& [j, tj] = cols[jj];
      U.setZero();
      for (const auto& t : tj) {
        U.noalias() += t.v * (Li.col(t.p) * Li.col(t.q).transpose());
        if (t.p != t.q)
          U.noalias() += t.v * (Li.col(t.q) * Li.col(t.p).transpose());
      }
      for (size_t ii = 0; ii <= jj; ++ii) {
        const auto& [i, ti] = cols[ii];
        double acc = 0.0;
        for (const auto& t : ti)
          acc += t.v * (t.p == t.q ? U(t.p, t.p) : U(t.p, t.q) + U(t.q, t.p));
        if (i <= j) H_(i, j) += acc;
        else H_(j, i) += acc;
      }
    }
  }

  const double base = H_.diagonal().maxCoeff();
  double reg = hreg_ > 0 ? hreg_ : 1e-14 * std::max(1.0, base);
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXd Hs = H_.selfadjointView<Eigen::Upper>();
    Hs.diagonal().array() += reg;
    hllt_.compute(Hs);
    if (hllt_.info() == Eigen::Success) {
      hreg_ = reg;
      if (nf_ > 0) {
        hinv_at_ = hllt_.solve(Aeq_.transpose());
        Eigen::MatrixXd schur = Aeq_ * hinv_at_;
        schur_llt_.compute(schur);
        if (schur_llt_.info() != Eigen::Success) {
          reg *= 100.0;
          continue;
        }
      }
      return true;
    }
    reg = std::max(reg * 100.0, 1e-12 * std::max(1.0, base));
  }
  return false;
}

void Solver::solve_kkt3(const ConeWork& w, const Eigen::VectorXd& bx,
                        const Eigen::VectorXd& by, const Eigen::VectorXd& bz,
                        Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                        Eigen::VectorXd& dz, int refine) const {
  if (nf_ > 0) refine = std::max(refine, 2);
  auto solve_once = [&](const Eigen::VectorXd& rx, const Eigen::VectorXd& ry,
                        const Eigen::VectorXd& rz, Eigen::VectorXd& ox,
                        Eigen::VectorXd& oy, Eigen::VectorXd& oz) {
    Eigen::VectorXd t = wtw_inv(w, rz);
    Eigen::VectorXd gt;
    apply_GT(t, gt);
    Eigen::VectorXd r1 = rx + gt;
    Eigen::VectorXd u0 = hllt_.solve(r1);
    if (nf_ > 0) {
      oy = schur_llt_.solve(Aeq_ * u0 - ry);
      ox = u0 - hinv_at_ * oy;
    } else {
      oy.resize(0);
      ox = u0;
    }
    Eigen::VectorXd gx(layout_.total);
    apply_G(ox, gx);
    oz = wtw_inv(w, gx - rz);
  };

  solve_once(bx, by, bz, dx, dy, dz);
  for (int r = 0; r < refine; ++r) {
    // Residuals of the 3x3 system, then one correction pass.
    Eigen::VectorXd gtz;
    apply_GT(dz, gtz);
    Eigen::VectorXd e1 = bx - gtz;
    if (nf_ > 0) e1 -= Aeq_.transpose() * dy;
    Eigen::VectorXd e2 = nf_ > 0 ? (by - Aeq_ * dx).eval() : Eigen::VectorXd();
    Eigen::VectorXd gx(layout_.total);
    apply_G(dx, gx);
    Eigen::VectorXd e3 = bz - (gx - wtw(w, dz));
    Eigen::VectorXd cx, cy, cz;
    solve_once(e1, e2, e3, cx, cy, cz);
    dx += cx;
    if (nf_ > 0) dy += cy;
    dz += cz;
  }
}

double Solver::cone_deficit(const Eigen::VectorXd& v) const {
  double t = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < prob_.nonneg_dim; ++k) t = std::max(t, -v(k));
  for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
    const int d = prob_.psd_dims[b];
    Eigen::MatrixXd V(d, d);
    smat_of(v.data() + layout_.psd_offset[b], V);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(V, Eigen::EigenvaluesOnly);
    t = std::max(t, -eig.eigenvalues().minCoeff());
  }
  return t;
}

double Solver::max_step_cone(const Eigen::VectorXd& v,
                             const Eigen::VectorXd& dv) const {
  double alpha = std::numeric_limits<double>::infinity();
  for (int k = 0; k < prob_.nonneg_dim; ++k)
    if (dv(k) < 0) alpha = std::min(alpha, -v(k) / dv(k));
  for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
    const int d = prob_.psd_dims[b];
    Eigen::MatrixXd V(d, d), D(d, d);
    smat_of(v.data() + layout_.psd_offset[b], V);
    smat_of(dv.data() + layout_.psd_offset[b], D);
    Eigen::LLT<Eigen::MatrixXd> llt(V);
    if (llt.info() != Eigen::Success) return 0.0;
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd M = L.triangularView<Eigen::Lower>().solve(D);
    M = L.triangularView<Eigen::Lower>()
            .solve(M.transpose())
            .transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues().minCoeff();
    if (lmin < 0) alpha = std::min(alpha, -1.0 / lmin);
  }
  return alpha;
}

SdpSolution Solver::extract(SdpStatus status, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                            double tau, const std::string& msg, int iters) const {
  SdpSolution sol;
  sol.status = status;
  sol.message = msg;
  sol.iterations = iters;
  const double inv_tau = tau > 0 ? 1.0 / tau : 1.0;
  sol.y = x * inv_tau;
  for (int i = 0; i < nx_; ++i) sol.y(i) *= col_scale_[i];
  sol.x_free = nf_ > 0 ? (y * inv_tau).eval() : Eigen::VectorXd();
  for (int f = 0; f < nf_; ++f) sol.x_free(f) *= free_scale_[f];
  sol.x_nonneg = z.head(prob_.nonneg_dim) * inv_tau;
  for (int k = 0; k < prob_.nonneg_dim; ++k) sol.x_nonneg(k) *= lp_scale_[k];
  sol.X.resize(prob_.psd_dims.size());
  for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
    const int d = prob_.psd_dims[b];
    sol.X[b].resize(d, d);
    smat_of(z.data() + layout_.psd_offset[b], sol.X[b]);
    sol.X[b] *= inv_tau * blk_scale_[b];
  }
  double obj = 0.0;
  for (size_t b = 0; b < prob_.psd_dims.size() && b < prob_.obj_psd.size(); ++b)
    for (const auto& t : prob_.obj_psd[b])
      obj += (t.p == t.q ? 1.0 : 2.0) * t.v * sol.X[b](t.p, t.q);
  for (const auto& [k, v] : prob_.obj_nonneg) obj += v * sol.x_nonneg(k);
  for (const auto& [f, v] : prob_.obj_free) obj += v * sol.x_free(f);
  sol.objective = obj;
  return sol;
}

SdpSolution Solver::run() {
  const int ncone = prob_.nonneg_dim +
                    std::accumulate(prob_.psd_dims.begin(), prob_.psd_dims.end(), 0);
  if (layout_.total == 0 || nx_ == 0) {
    SdpSolution sol;
    sol.status = SdpStatus::numerical_failure;
    sol.message = "degenerate problem: no cone variables or no constraints";
    return sol;
  }

  // Initial point: least-squares KKT solves with identity scaling, then a
  // shift into the cone interior.
  ConeWork w0;
  w0.w_lp = Eigen::VectorXd::Ones(prob_.nonneg_dim);
  w0.lambda_lp = w0.w_lp;
  for (int d : prob_.psd_dims) {
    w0.R.push_back(Eigen::MatrixXd::Identity(d, d));
    w0.Rti.push_back(Eigen::MatrixXd::Identity(d, d));
    w0.Lam.push_back(Eigen::MatrixXd::Identity(d, d));
    w0.LamInv.push_back(Eigen::MatrixXd::Identity(d, d));
    w0.lambda_psd.push_back(Eigen::VectorXd::Ones(d));
  }
  if (!factor_kkt(w0)) {
    SdpSolution sol;
    sol.status = SdpStatus::numerical_failure;
    sol.message = "initial KKT factorization failed";
    return sol;
  }

  Eigen::VectorXd e = Eigen::VectorXd::Zero(layout_.total);
  e.head(prob_.nonneg_dim).setOnes();
  for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
    const int d = prob_.psd_dims[b];
    for (int i = 0; i < d; ++i)
      e(layout_.psd_offset[b] + svec_index(d, i, i)) = 1.0;
  }

  Eigen::VectorXd x, yeq, s, z;
  {
    Eigen::VectorXd dz;
    solve_kkt3(w0, Eigen::VectorXd::Zero(nx_), beq_, h_, x, yeq, dz, 1);
    s = -dz;  // with W = I this is h - G x
    const double ts = cone_deficit(s);
    if (ts >= -1e-8) s += (ts + 1.0) * e;
  }
  {
    Eigen::VectorXd dx2, dy2;
    solve_kkt3(w0, -c_, Eigen::VectorXd::Zero(nf_), Eigen::VectorXd::Zero(layout_.total),
               dx2, dy2, z, 1);
    if (nf_ > 0) yeq = dy2;
    const double tz = cone_deficit(z);
    if (tz >= -1e-8) z += (tz + 1.0) * e;
  }
  double tau = 1.0, kappa = 1.0;

  const double resx0 = std::max(1.0, c_.norm());
  const double resy0 = std::max(1.0, beq_.norm());
  const double resz0 = std::max(1.0, h_.norm());
  const double nu = ncone + 1;

  // Best iterate seen so far; returned when a later iteration breaks down.
  struct Snapshot {
    Eigen::VectorXd x, yeq, z;
    double tau = 1.0;
    double score = std::numeric_limits<double>::infinity();
    int iter = 0;
  } best;
  double best_cert = std::numeric_limits<double>::infinity();
  int best_cert_iter = 0;

  std::string msg;
  int iter = 0;
  for (; iter < opts_.max_iters; ++iter) {
    // Residuals of the homogeneous embedding.
    Eigen::VectorXd gtz, gx;
    apply_GT(z, gtz);
    Eigen::VectorXd rx = gtz + c_ * tau;
    if (nf_ > 0) rx += Aeq_.transpose() * yeq;
    Eigen::VectorXd ry = nf_ > 0 ? (Aeq_ * x - beq_ * tau).eval() : Eigen::VectorXd();
    apply_G(x, gx);
    Eigen::VectorXd rz = gx + s - h_ * tau;
    const double rtau = kappa + c_.dot(x) + beq_.dot(yeq) + h_.dot(z);

    const double gap = s.dot(z);
    const double mu = (gap + tau * kappa) / nu;
    const double pcost = c_.dot(x) / tau;
    const double dcost = -(h_.dot(z) + beq_.dot(yeq)) / tau;
    const double pres = std::max(nf_ > 0 ? ry.norm() / resy0 : 0.0,
                                 rz.norm() / resz0) / tau;
    const double dres = rx.norm() / resx0 / tau;
    const double relgap = gap / tau / tau / std::max(1.0, std::abs(pcost));

    if (opts_.verbose)
      std::cerr << "iter " << iter << " pcost " << pcost << " dcost " << dcost
                << " gap " << gap / tau / tau << " pres " << pres << " dres "
                << dres << " tau " << tau << " kappa " << kappa << "\n";

    if (pres <= opts_.feastol && dres <= opts_.feastol &&
        (relgap <= opts_.reltol || gap / tau / tau <= opts_.abstol))
      return extract(SdpStatus::optimal, x, yeq, z, tau, "optimal", iter);

    // Certificates of infeasibility for the original pair.
    double cert_quality = std::numeric_limits<double>::infinity();
    const double hz_by = h_.dot(z) + beq_.dot(yeq);
    if (hz_by < 0) {
      Eigen::VectorXd gtz2;
      apply_GT(z, gtz2);
      Eigen::VectorXd dual_res = gtz2;
      if (nf_ > 0) dual_res += Aeq_.transpose() * yeq;
      const double q = dual_res.norm() / resx0 / (-hz_by);
      cert_quality = std::min(cert_quality, q);
      if (q <= opts_.feastol)
        return extract(SdpStatus::unbounded, x, yeq, z, tau,
                       "dual of the equality system is infeasible (objective ray)",
                       iter);
    }
    const double cx = c_.dot(x);
    if (cx < 0) {
      Eigen::VectorXd gx2(layout_.total);
      apply_G(x, gx2);
      const double pr = std::max(nf_ > 0 ? (Aeq_ * x).norm() / resy0 : 0.0,
                                 (gx2 + s).norm() / resz0);
      const double q = pr / (-cx);
      cert_quality = std::min(cert_quality, q);
      if (q <= opts_.feastol)
        return extract(SdpStatus::infeasible, x, yeq, z, tau,
                       "Farkas certificate found", iter);
    }

    const double score = std::max({pres, dres, relgap});
    if (score < best.score) {
      best = {x, yeq, z, tau, score, iter};
    }
    if (cert_quality < best_cert) {
      best_cert = cert_quality;
      best_cert_iter = iter;
    }
    if (iter - std::max(best.iter, best_cert_iter) > 5) {
      msg = "stalled";
      break;
    }

    ConeWork w;
    if (!compute_scaling(s, z, w)) {
      msg = "scaling computation failed (iterate left the cone)";
      break;
    }
    if (!factor_kkt(w)) {
      msg = "KKT factorization failed";
      break;
    }

    // Direction for the tau elimination, shared by both solves.
    Eigen::VectorXd vx, vy, vz;
    solve_kkt3(w, -c_, beq_, h_, vx, vy, vz, 1);
    const double denom_base = c_.dot(vx) + beq_.dot(vy) + h_.dot(vz) - kappa / tau;

    Eigen::VectorXd lam_lam(layout_.total);
    lam_lam.head(prob_.nonneg_dim) =
        w.lambda_lp.array().square().matrix();
    for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
      const int d = prob_.psd_dims[b];
      Eigen::VectorXd seg = Eigen::VectorXd::Zero(svec_dim(d));
      for (int i = 0; i < d; ++i)
        seg(svec_index(d, i, i)) = w.lambda_psd[b](i) * w.lambda_psd[b](i);
      lam_lam.segment(layout_.psd_offset[b], svec_dim(d)) = seg;
    }

    auto lambda_solve = [&](const Eigen::VectorXd& v) {
      // (lambda o)^{-1} v in the scaled space
      Eigen::VectorXd out(layout_.total);
      out.head(prob_.nonneg_dim) =
          v.head(prob_.nonneg_dim).cwiseQuotient(w.lambda_lp);
      for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
        const int d = prob_.psd_dims[b];
        Eigen::MatrixXd V(d, d);
        smat_of(v.data() + layout_.psd_offset[b], V);
        const auto& lam = w.lambda_psd[b];
        for (int p = 0; p < d; ++p)
          for (int q = 0; q < d; ++q) V(p, q) /= 0.5 * (lam(p) + lam(q));
        svec_of(V, out.data() + layout_.psd_offset[b]);
      }
      return out;
    };

    auto compute_direction = [&](double eta, const Eigen::VectorXd& bs,
                                 double bkt, Eigen::VectorXd& dx,
                                 Eigen::VectorXd& dy, Eigen::VectorXd& dz,
                                 Eigen::VectorXd& ds, double& dtau,
                                 double& dkappa) {
      const double f = 1.0 - eta;
      // Eliminate ds through the scaled complementarity equation.
      Eigen::VectorXd ls = lambda_solve(bs);
      Eigen::VectorXd wls = unscale_ds(w, ls);
      Eigen::VectorXd bz2 = -f * rz - wls;
      Eigen::VectorXd ux, uy, uz;
      solve_kkt3(w, -f * rx, nf_ > 0 ? (-f * ry).eval() : Eigen::VectorXd(),
                 bz2, ux, uy, uz, 1);
      const double num = -f * rtau - bkt / tau -
                         (c_.dot(ux) + beq_.dot(uy) + h_.dot(uz));
      dtau = num / denom_base;
      dx = ux + dtau * vx;
      if (nf_ > 0) dy = uy + dtau * vy; else dy.resize(0);
      dz = uz + dtau * vz;
      // ds in the original space: ds = W'(lambda \ bs - W dz)
      Eigen::VectorXd dz_scaled = scale_z(w, dz);
      ds = unscale_ds(w, ls - dz_scaled);
      dkappa = (bkt - kappa * dtau) / tau;
    };

    // Predictor.
    Eigen::VectorXd dx, dy, dz, ds;
    double dtau, dkappa;
    Eigen::VectorXd bs = -lam_lam;
    compute_direction(0.0, bs, -tau * kappa, dx, dy, dz, ds, dtau, dkappa);

    double alpha = max_step_cone(s, ds);
    alpha = std::min(alpha, max_step_cone(z, dz));
    if (dtau < 0) alpha = std::min(alpha, -tau / dtau);
    if (dkappa < 0) alpha = std::min(alpha, -kappa / dkappa);
    alpha = std::min(alpha, 1.0);

    const double mu_aff =
        ((s + alpha * ds).dot(z + alpha * dz) +
         (tau + alpha * dtau) * (kappa + alpha * dkappa)) / nu;
    double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);

    // Corrector: include the second-order term in the scaled space.
    Eigen::VectorXd ds_sc = scale_s(w, ds);
    Eigen::VectorXd dz_sc = scale_z(w, dz);
    Eigen::VectorXd so(layout_.total);
    so.head(prob_.nonneg_dim) = ds_sc.head(prob_.nonneg_dim)
                                    .cwiseProduct(dz_sc.head(prob_.nonneg_dim));
    for (size_t b = 0; b < prob_.psd_dims.size(); ++b) {
      const int d = prob_.psd_dims[b];
      Eigen::MatrixXd U(d, d), V(d, d);
      smat_of(ds_sc.data() + layout_.psd_offset[b], U);
      smat_of(dz_sc.data() + layout_.psd_offset[b], V);
      Eigen::MatrixXd P = 0.5 * (U * V + V * U);
      svec_of(P, so.data() + layout_.psd_offset[b]);
    }
    bs = -lam_lam - so + sigma * mu * e;
    const double bkt = -tau * kappa - dtau * dkappa + sigma * mu;
    compute_direction(sigma, bs, bkt, dx, dy, dz, ds, dtau, dkappa);

    alpha = max_step_cone(s, ds);
    alpha = std::min(alpha, max_step_cone(z, dz));
    if (dtau < 0) alpha = std::min(alpha, -tau / dtau);
    if (dkappa < 0) alpha = std::min(alpha, -kappa / dkappa);
    alpha = std::min(opts_.step_fraction * alpha, 1.0);
    if (!std::isfinite(alpha) || alpha <= 0) {
      msg = "step size collapsed";
      break;
    }

    x += alpha * dx;
    if (nf_ > 0) yeq += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
    if (tau <= 0 || kappa < 0) {
      msg = "tau left the positive ray";
      break;
    }
  }

  // A breakdown after reaching the tolerance region still yields a usable
  // point; the post-solve audit remains the gate.
  if (best.score <= 10.0 * std::max(opts_.feastol, opts_.reltol))
    return extract(SdpStatus::optimal, best.x, best.yeq, best.z, best.tau,
                   "reduced accuracy (" + (msg.empty() ? "iteration limit" : msg) +
                       ")",
                   iter);
  // Nearly closed infeasibility certificates on the last iterate.
  {
    const double hz_by = h_.dot(z) + beq_.dot(yeq);
    if (hz_by < 0) {
      Eigen::VectorXd gtz2;
      apply_GT(z, gtz2);
      Eigen::VectorXd dual_res = gtz2;
      if (nf_ > 0) dual_res += Aeq_.transpose() * yeq;
      if (dual_res.norm() / resx0 / (-hz_by) <= 10.0 * opts_.feastol)
        return extract(SdpStatus::unbounded, x, yeq, z, tau,
                       "objective ray (reduced accuracy)", iter);
    }
    const double cx = c_.dot(x);
    if (cx < 0) {
      Eigen::VectorXd gx2(layout_.total);
      apply_G(x, gx2);
      const double pr = std::max(nf_ > 0 ? (Aeq_ * x).norm() / resy0 : 0.0,
                                 (gx2 + s).norm() / resz0);
      if (pr / (-cx) <= 10.0 * opts_.feastol)
        return extract(SdpStatus::infeasible, x, yeq, z, tau,
                       "Farkas certificate (reduced accuracy)", iter);
    }
  }
  SdpSolution sol = extract(SdpStatus::numerical_failure, best.x, best.yeq,
                            best.z, best.tau,
                            msg.empty() ? "iteration limit reached" : msg, iter);
  return sol;
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& prob, const SdpOptions& opts) {
  for (const auto& row : prob.rows)
    if (row.psd.empty() && row.nonneg.empty())
      throw std::invalid_argument(
          "solve_sdp: row touching only free variables is not supported");
  Solver solver(prob, opts);
  SdpSolution sol = solver.run();
  SdpAudit audit = audit_solution(prob, sol);
  sol.primal_residual = audit.worst_eq_residual;
  sol.dual_residual = -audit.worst_block_eig;
  return sol;
}

SdpAudit audit_solution(const SdpProblem& prob, const SdpSolution& sol) {
  SdpAudit a;
  if (sol.X.empty() && prob.nonneg_dim == 0) return a;
  for (const auto& row : prob.rows) {
    double lhs = 0.0;
    double scale = std::max(1.0, std::abs(row.rhs));
    for (const auto& [b, t] : row.psd) {
      lhs += (t.p == t.q ? 1.0 : 2.0) * t.v * sol.X[b](t.p, t.q);
      scale = std::max(scale, std::abs(t.v) * std::max(1.0, std::abs(sol.X[b](t.p, t.q))));
    }
    for (const auto& [k, v] : row.nonneg) {
      lhs += v * sol.x_nonneg(k);
      scale = std::max(scale, std::abs(v) * std::max(1.0, std::abs(sol.x_nonneg(k))));
    }
    for (const auto& [f, v] : row.free) {
      lhs += v * sol.x_free(f);
      scale = std::max(scale, std::abs(v) * std::max(1.0, std::abs(sol.x_free(f))));
    }
    a.worst_eq_residual =
        std::max(a.worst_eq_residual, std::abs(lhs - row.rhs) / scale);
  }
  for (const auto& X : sol.X) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(X, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, X.cwiseAbs().maxCoeff());
    a.worst_block_eig =
        std::min(a.worst_block_eig, eig.eigenvalues().minCoeff() / scale);
  }
  for (int k = 0; k < sol.x_nonneg.size(); ++k)
    a.worst_block_eig = std::min(
        a.worst_block_eig, sol.x_nonneg(k) / std::max(1.0, std::abs(sol.x_nonneg(k))));
  return a;
}

void dump_problem(std::ostream& os, const SdpProblem& prob) {
  os << "sdp 1\n";
  os << "psd";
  for (int d : prob.psd_dims) os << " " << d;
  os << "\nnonneg " << prob.nonneg_dim << "\nfree " << prob.free_dim << "\n";
  os.precision(17);
  os << "objective\n";
  for (size_t b = 0; b < prob.obj_psd.size(); ++b)
    for (const auto& t : prob.obj_psd[b])
      os << "p " << b << " " << t.p << " " << t.q << " " << t.v << "\n";
  for (const auto& [k, v] : prob.obj_nonneg) os << "n " << k << " " << v << "\n";
  for (const auto& [f, v] : prob.obj_free) os << "f " << f << " " << v << "\n";
  for (int i = 0; i < prob.num_rows(); ++i) {
    const auto& row = prob.rows[i];
    os << "row " << i << " rhs " << row.rhs << "\n";
    for (const auto& [b, t] : row.psd)
      os << "p " << b << " " << t.p << " " << t.q << " " << t.v << "\n";
    for (const auto& [k, v] : row.nonneg) os << "n " << k << " " << v << "\n";
    for (const auto& [f, v] : row.free) os << "f " << f << " " << v << "\n";
  }
}

void dump_problem_file(const std::string& path, const SdpProblem& prob) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  dump_problem(f, prob);
}

}  // namespace rcbc
