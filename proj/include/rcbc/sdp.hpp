#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

namespace rcbc {

// Symmetric coefficient entry of a PSD block: value v at (p, q) and (q, p),
// stored once with p >= q.  <A, X> counts off-diagonal entries twice.
struct SdpTriplet {
  int p = 0, q = 0;
  double v = 0.0;
};

// Standard-form conic program over PSD blocks, one nonnegative vector block
// and one free vector block:
//
//   maximize   sum_b <C_b, X_b> + c_n' x_n + c_f' x_f
//   subject to sum_b <A_ib, X_b> + a_in' x_n + a_if' x_f = rhs_i
//              X_b >= 0 (PSD), x_n >= 0, x_f free.
struct SdpProblem {
  std::vector<int> psd_dims;
  int nonneg_dim = 0;
  int free_dim = 0;

  std::vector<std::vector<SdpTriplet>> obj_psd;  // one list per block
  std::vector<std::pair<int, double>> obj_nonneg;
  std::vector<std::pair<int, double>> obj_free;

  struct Row {
    std::vector<std::pair<int, SdpTriplet>> psd;  // (block, entry)
    std::vector<std::pair<int, double>> nonneg;
    std::vector<std::pair<int, double>> free;
    double rhs = 0.0;
  };
  std::vector<Row> rows;

  int num_rows() const { return static_cast<int>(rows.size()); }
};

enum class SdpStatus {
  optimal,
  infeasible,         // certified: no (X, x_n, x_f) satisfies the constraints
  unbounded,          // certified improving ray
  numerical_failure,
};

struct SdpSolution {
  SdpStatus status = SdpStatus::numerical_failure;
  std::vector<Eigen::MatrixXd> X;
  Eigen::VectorXd x_nonneg;
  Eigen::VectorXd x_free;
  Eigen::VectorXd y;  // equality multipliers

  double objective = 0.0;
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  std::string message;
};

struct SdpOptions {
  int max_iters = 100;
  double feastol = 1e-7;
  double reltol = 1e-6;
  double abstol = 1e-9;
  double step_fraction = 0.98;
  bool verbose = false;
};

// Native solver: homogeneous self-dual embedding, Nesterov-Todd scaled
// Mehrotra predictor-corrector.
SdpSolution solve_sdp(const SdpProblem& prob, const SdpOptions& opts = {});

// Independent post-solve audit: worst equality residual and worst block
// eigenvalue, both relative to the problem scale.
struct SdpAudit {
  double worst_eq_residual = 0.0;   // |<A_i,X> - rhs_i| / max(1, |rhs|, row scale)
  double worst_block_eig = 0.0;     // most negative eigenvalue / block scale
  bool pass(double tol = 1e-7) const {
    return worst_eq_residual <= tol && worst_block_eig >= -tol;
  }
};
SdpAudit audit_solution(const SdpProblem& prob, const SdpSolution& sol);

// Sparse text dump of the assembled program (block sizes, triplet entries,
// objective, rows) for cross-checking against external solvers.
void dump_problem(std::ostream& os, const SdpProblem& prob);
void dump_problem_file(const std::string& path, const SdpProblem& prob);

}  // namespace rcbc
