#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "rcbc/system.hpp"

namespace rcbc {

// Axis-aligned box, the only set geometry supported.
struct Box {
  Eigen::VectorXd lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  Eigen::VectorXd sample(Rng& rng) const;
  // Largest Euclidean norm over the box (attained at a corner).
  double max_norm() const;
  // Smallest Euclidean norm over the box (per-coordinate clamp of 0).
  double min_norm() const;
  Eigen::VectorXd center() const { return 0.5 * (lo + hi); }

  static Box cube(int n, double lo, double hi);
};

// r_i = max norm over the initial boxes, r_u = min norm over the unsafe
// boxes.  Throws if r_i >= r_u: the safety spec has no concentric-ball
// representation.
std::pair<double, double> set_radii(const std::vector<Box>& initial,
                                    const std::vector<Box>& unsafe);

// Single-trajectory experiment record.  For discrete time, column j of
// x_next is the successor of column j of x.  For continuous time, x_next
// holds the noisy derivative samples.
struct TrajectoryData {
  TimeKind time_kind = TimeKind::discrete;
  Eigen::MatrixXd x_next;  // n x T successors (dt) or noisy derivatives (ct)
  Eigen::MatrixXd x;       // n x T visited states
  Eigen::MatrixXd u;       // l x T applied inputs
  double tau = 0.0;        // sampling time, ct only
  int T() const { return static_cast<int>(x.cols()); }
};

// Monomial lift of a trajectory: column j holds M(x_j) and Q(x_j) u_j.
struct LiftedData {
  Eigen::MatrixXd M;   // m x T
  Eigen::MatrixXd Qu;  // q x T
  Eigen::VectorXd Y(int j) const {
    Eigen::VectorXd y(M.rows() + Qu.rows());
    y << M.col(j), Qu.col(j);
    return y;
  }
};

// The T data-conformity blocks; admissible Omega satisfy
// [I Omega] N_j [I Omega]^T <= 0 for every j.
struct ConformitySet {
  std::vector<Eigen::MatrixXd> blocks;  // each (n+m+q) x (n+m+q), symmetric
};

// Physics-informed block; admissible Omega satisfy
// [I Omega] N [I Omega]^T <= 0.
struct PhysicsSet {
  Eigen::MatrixXd block;
  Eigen::MatrixXd Omega_tilde;
  double eps_Omega = 0.0;
};

// Excitation input, optionally around a stabilizing feedback u = K0 x + bias.
// The paper-side theory places no restriction on the input sequence, so the
// experiment may shape it for informative data.
struct InputPolicy {
  Box box;                // excitation component, sampled uniformly
  Eigen::MatrixXd K0;     // optional l x n feedback gain (may be empty)
  Eigen::VectorXd bias;   // optional constant offset (may be empty)

  Eigen::VectorXd sample(Rng& rng, const Eigen::VectorXd& x) const {
    Eigen::VectorXd u = box.sample(rng);
    if (K0.size() > 0) u += K0 * x;
    if (bias.size() > 0) u += bias;
    return u;
  }
};

// Applies T inputs to the true discrete-time system and records the
// transitions.  Disturbances are drawn per step and discarded.
TrajectoryData collect_dt(const LiftedSystem& sys, const Eigen::VectorXd& x0,
                          const InputPolicy& policy, int T,
                          const DisturbanceSampler& dist, Rng rng);

// Continuous-time collection: inputs held over [j tau, (j+1) tau), states
// recorded at the sample instants, and the derivative channel recorded as the
// true field plus a draw with |Y varpi| <= eps_varpi.
TrajectoryData collect_ct(const LiftedSystem& sys, const Eigen::VectorXd& x0,
                          const InputPolicy& policy, int T, double tau,
                          const DisturbanceSampler& dist,
                          const NoiseSpec& noise, Rng rng,
                          int substeps = 10);

LiftedData lift(const TrajectoryData& data, const MonomialDict& dict,
                const PolyMatrix& Q);

// N_j = [[Xt_j Xt_j' - eps^2 Phi^-1, -Xt_j Y_j'], [-Y_j Xt_j', Y_j Y_j']]
// with eps = eps_omega for discrete time and eps_omega + eps_varpi for
// continuous time.
ConformitySet dc_blocks(const TrajectoryData& data, const LiftedData& lifted,
                        const NoiseSpec& noise);

// N = [[Ot Ot' - eps_Omega^2 Phi^-1, -Ot], [-Ot', I]].
PhysicsSet pi_block(const Eigen::MatrixXd& Omega_tilde, double eps_Omega,
                    const NoiseSpec& noise);

// Quadratic form [I Omega] N [I Omega]^T shared by both block families.
Eigen::MatrixXd membership_form(const Eigen::MatrixXd& block,
                                const Eigen::MatrixXd& Omega);

// Dataset persistence (JSON, full double precision).
void save_dataset(const std::string& path, const TrajectoryData& data,
                  const NoiseSpec& noise, uint64_t seed,
                  const std::string& provenance);
struct LoadedDataset {
  TrajectoryData data;
  NoiseSpec noise;
  uint64_t seed = 0;
  std::string provenance;
};
LoadedDataset load_dataset(const std::string& path);

}  // namespace rcbc
