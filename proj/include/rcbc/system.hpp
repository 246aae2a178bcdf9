#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>

#include "rcbc/poly.hpp"
#include "rcbc/rng.hpp"

namespace rcbc {

enum class TimeKind { discrete, continuous };

// Lifted input-affine polynomial system x+ (or xdot) = Omega [M(x); Q(x) u] + w.
// Omega = [A B] concatenated, n x (m + q).
struct LiftedSystem {
  TimeKind time_kind = TimeKind::discrete;
  int n = 0;  // state dimension
  int l = 0;  // input dimension
  MonomialDict dict_M;
  PolyMatrix Q;            // q x l polynomial entries
  Eigen::MatrixXd Omega;   // n x (m + q)

  int m() const { return dict_M.size(); }
  int q() const { return Q.rows(); }

  Eigen::MatrixXd A() const { return Omega.leftCols(m()); }
  Eigen::MatrixXd B() const { return Omega.rightCols(q()); }

  // Lifted vector [M(x); Q(x) u].
  Eigen::VectorXd lift(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
};

// Weighted disturbance bounds |Y w| <= eps_omega (and |Y varpi| <= eps_varpi
// for the derivative channel of continuous-time data).  Phi = Y^T Y.
struct NoiseSpec {
  Eigen::MatrixXd Upsilon;
  double eps_omega = 0.0;
  double eps_varpi = 0.0;

  Eigen::MatrixXd Phi() const { return Upsilon.transpose() * Upsilon; }
  Eigen::MatrixXd Phi_inv() const;
  double eps_e() const { return eps_omega + eps_varpi; }

  static NoiseSpec identity(int n, double eps_omega, double eps_varpi = 0.0);
};

// Ground-truth generation: entrywise Omega perturbation interval and the
// per-component simulation disturbance box.
struct PerturbSpec {
  double omega_lo = 0.0, omega_hi = 0.0;  // entry perturbation of Omega
  double dist_lo = 0.0, dist_hi = 0.0;    // per-component disturbance box
  uint64_t seed = 0;
};

// Polynomial state feedback u = K(x) x.
struct Controller {
  PolyMatrix K;  // l x n

  Eigen::VectorXd input(const Eigen::VectorXd& x) const {
    return K.eval(x) * x;
  }

  static Controller zero(int l, int n, int n_vars) {
    return Controller{PolyMatrix(l, n, n_vars)};
  }
};

// Draws disturbances uniformly from the configured box; construction fails
// if a box corner violates the weighted-norm ball |Y w| <= eps_omega.
class DisturbanceSampler {
 public:
  DisturbanceSampler(const PerturbSpec& spec, const NoiseSpec& noise, int n);

  Eigen::VectorXd sample(Rng& rng) const;
  int dim() const { return n_; }

 private:
  int n_;
  double lo_, hi_;
};

// Named benchmark nominal models with Omega = Omega_tilde.
LiftedSystem nominal_benchmark(const std::string& name);

// Omega = Omega_tilde + E, E entrywise i.i.d. uniform in the omega range.
LiftedSystem perturb_truth(const LiftedSystem& nominal, const PerturbSpec& spec);

// One transition of a discrete-time system.
Eigen::VectorXd step_dt(const LiftedSystem& sys, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, const Eigen::VectorXd& omega);

// Right-hand side of a continuous-time system.
Eigen::VectorXd vector_field_ct(const LiftedSystem& sys, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& u,
                                const Eigen::VectorXd& omega);

// One classic RK4 step of the closed loop xdot = f(x, K(x)x, omega) with the
// disturbance held constant.
Eigen::VectorXd rk4_step(const LiftedSystem& sys, const Controller& ctrl,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& omega,
                         double dt);

struct IntegrationConfig {
  double sample_time = 0.0;  // spacing of reported samples (ct)
  int substeps = 10;         // RK4 sub-steps per sample, disturbance ZOH
};

struct SimResult {
  // One column per sample instant, starting with the initial state.
  Eigen::MatrixXd states;
  Eigen::MatrixXd inputs;  // input applied at each visited state
  std::vector<double> times;
  bool diverged = false;
  int divergence_step = -1;
};

// Closed-loop simulation under u = K(x)x.  Discrete time iterates step_dt for
// `horizon` steps; continuous time runs RK4 with zero-order-hold disturbance
// for `horizon` samples of length integ.sample_time.
SimResult simulate_closed_loop(const LiftedSystem& sys, const Controller& ctrl,
                               const Eigen::VectorXd& x0, int horizon,
                               const DisturbanceSampler& dist, Rng rng,
                               const IntegrationConfig& integ = {});

// Trajectory CSV: header k/t, x_1..x_n, u_1..u_l, one row per sample.
void write_trajectory_csv(const std::string& path, const SimResult& sim,
                          TimeKind kind);

}  // namespace rcbc
