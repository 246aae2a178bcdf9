#include "rcbc/system.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rcbc {

Eigen::VectorXd LiftedSystem::lift(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& u) const {
  if (x.size() != n || u.size() != l)
    throw std::invalid_argument("LiftedSystem::lift: dimension mismatch");
  Eigen::VectorXd y(m() + q());
  std::vector<double> xv(x.data(), x.data() + x.size());
  std::vector<double> mv = dict_M.eval(xv);
  for (int i = 0; i < m(); ++i) y(i) = mv[i];
  y.tail(q()) = Q.eval(x) * u;
  return y;
}

Eigen::MatrixXd NoiseSpec::Phi_inv() const {
  return Phi().ldlt().solve(
      Eigen::MatrixXd::Identity(Upsilon.cols(), Upsilon.cols()));
}

NoiseSpec NoiseSpec::identity(int n, double eps_omega, double eps_varpi) {
  NoiseSpec s;
  s.Upsilon = Eigen::MatrixXd::Identity(n, n);
  s.eps_omega = eps_omega;
  s.eps_varpi = eps_varpi;
  return s;
}

DisturbanceSampler::DisturbanceSampler(const PerturbSpec& spec,
                                       const NoiseSpec& noise, int n)
    : n_(n), lo_(spec.dist_lo), hi_(spec.dist_hi) {
  if (!(lo_ <= hi_) || !std::isfinite(lo_) || !std::isfinite(hi_))
    throw std::invalid_argument("DisturbanceSampler: bad box");
  // Worst corner of the box must satisfy |Y w| <= eps_omega.  The box is an
  // interval per component, so it suffices to check all sign patterns of the
  // extreme magnitudes.
  const double mag = std::max(std::abs(lo_), std::abs(hi_));
  Eigen::VectorXd corner(n);
  for (long pattern = 0; pattern < (1L << n); ++pattern) {
    for (int i = 0; i < n; ++i)
      corner(i) = (pattern >> i) & 1 ? mag : -mag;
    if ((noise.Upsilon * corner).norm() > noise.eps_omega + 1e-15)
      throw std::invalid_argument(
          "DisturbanceSampler: box corner violates |Y w| <= eps_omega");
  }
}

Eigen::VectorXd DisturbanceSampler::sample(Rng& rng) const {
  Eigen::VectorXd w(n_);
  for (int i = 0; i < n_; ++i) w(i) = rng.uniform(lo_, hi_);
  return w;
}

namespace {

struct TermSpec {
  int row;
  Expo mono;
  double coeff;
};

LiftedSystem make_system(TimeKind kind, int n, int dict_degree, int l,
                         const std::vector<TermSpec>& a_terms,
                         const std::vector<std::pair<int, double>>& b_diag) {
  LiftedSystem sys;
  sys.time_kind = kind;
  sys.n = n;
  sys.l = l;
  sys.dict_M = build_dict(n, dict_degree, false);
  sys.Q = PolyMatrix::identity(l, n);
  const int m = sys.dict_M.size();
  sys.Omega = Eigen::MatrixXd::Zero(n, m + l);
  for (const auto& t : a_terms) {
    int idx = sys.dict_M.index_of(t.mono);
    if (idx < 0) throw std::logic_error("benchmark term missing from dictionary");
    sys.Omega(t.row, idx) += t.coeff;
  }
  for (const auto& [row, coeff] : b_diag) sys.Omega(row, m + row) = coeff;
  (void)b_diag;
  return sys;
}

Expo mono3(int e1, int e2, int e3) { return Expo{e1, e2, e3}; }

}  // namespace

LiftedSystem nominal_benchmark(const std::string& name) {
  if (name == "lorenz") {
    // Euler-discretized Lorenz variant, single input on the second state.
    const double dt = 0.02;
    std::vector<TermSpec> a = {
        {0, mono3(1, 0, 0), 1.0 - 10.0 * dt}, {0, mono3(0, 1, 0), 10.0 * dt},
        {1, mono3(1, 0, 0), 28.0 * dt},       {1, mono3(0, 1, 0), 1.0 - dt},
        {1, mono3(1, 1, 0), -dt},             {2, mono3(0, 0, 1), 1.0 - dt * 8.0 / 3.0},
        {2, mono3(1, 0, 1), dt},
    };
    LiftedSystem sys;
    sys.time_kind = TimeKind::discrete;
    sys.n = 3;
    sys.l = 1;
    sys.dict_M = build_dict(3, 2, false);
    sys.Q = PolyMatrix::identity(1, 3);
    sys.Omega = Eigen::MatrixXd::Zero(3, sys.m() + 1);
    for (const auto& t : a) sys.Omega(t.row, sys.dict_M.index_of(t.mono)) = t.coeff;
    sys.Omega(1, sys.m()) = dt;  // input enters the x2 row
    return sys;
  }
  if (name == "spacecraft" || name == "higher_degree") {
    // Euler-discretized rigid body with principal inertias (0.5, 1, 1.3) and
    // full torque actuation.
    const double dt = 0.02;
    const double J1 = 0.5, J2 = 1.0, J3 = 1.3;
    const int deg = name == "spacecraft" ? 2 : 3;
    std::vector<TermSpec> a = {
        {0, mono3(1, 0, 0), 1.0}, {0, mono3(0, 1, 1), dt * (J2 - J3) / J1},
        {1, mono3(0, 1, 0), 1.0}, {1, mono3(1, 0, 1), dt * (J3 - J1) / J2},
        {2, mono3(0, 0, 1), 1.0}, {2, mono3(1, 1, 0), dt * (J1 - J2) / J3},
    };
    if (name == "higher_degree") {
      // Degree-3 augmentation of the rigid-body model.
      a.push_back({0, mono3(3, 0, 0), -0.002});
      a.push_back({1, mono3(0, 1, 2), 0.002});
      a.push_back({2, mono3(1, 1, 1), 0.002});
    }
    LiftedSystem sys = make_system(TimeKind::discrete, 3, deg, 3, a, {});
    const int m = sys.m();
    sys.Omega(0, m + 0) = dt / J1;
    sys.Omega(1, m + 1) = dt / J2;
    sys.Omega(2, m + 2) = dt / J3;
    return sys;
  }
  if (name == "chen") {
    std::vector<TermSpec> a = {
        {0, mono3(1, 0, 0), -35.0}, {0, mono3(0, 1, 0), 35.0},
        {1, mono3(1, 0, 0), -7.0},  {1, mono3(0, 1, 0), 28.0},
        {1, mono3(1, 0, 1), -1.0},  {2, mono3(0, 0, 1), -3.0},
        {2, mono3(1, 1, 0), 1.0},
    };
    LiftedSystem sys = make_system(TimeKind::continuous, 3, 2, 3, a, {});
    const int m = sys.m();
    sys.Omega(0, m + 0) = 1.0;
    sys.Omega(1, m + 1) = 1.0;
    sys.Omega(2, m + 2) = 1.0;
    return sys;
  }
  throw std::invalid_argument("unknown benchmark: " + name);
}

LiftedSystem perturb_truth(const LiftedSystem& nominal, const PerturbSpec& spec) {
  if (!std::isfinite(spec.omega_lo) || !std::isfinite(spec.omega_hi))
    throw std::invalid_argument("perturb_truth: non-finite range");
  LiftedSystem truth = nominal;
  Rng rng(spec.seed, Rng::stream_id("omega-perturbation"));
  for (int i = 0; i < truth.Omega.rows(); ++i)
    for (int j = 0; j < truth.Omega.cols(); ++j)
      truth.Omega(i, j) += rng.uniform(spec.omega_lo, spec.omega_hi);
  return truth;
}

Eigen::VectorXd step_dt(const LiftedSystem& sys, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, const Eigen::VectorXd& omega) {
  if (sys.time_kind != TimeKind::discrete)
    throw std::invalid_argument("step_dt: system is not discrete-time");
  if (omega.size() != sys.n)
    throw std::invalid_argument("step_dt: disturbance dimension mismatch");
  return sys.Omega * sys.lift(x, u) + omega;
}

Eigen::VectorXd vector_field_ct(const LiftedSystem& sys, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& u,
                                const Eigen::VectorXd& omega) {
  if (sys.time_kind != TimeKind::continuous)
    throw std::invalid_argument("vector_field_ct: system is not continuous-time");
  if (omega.size() != sys.n)
    throw std::invalid_argument("vector_field_ct: disturbance dimension mismatch");
  return sys.Omega * sys.lift(x, u) + omega;
}

Eigen::VectorXd rk4_step(const LiftedSystem& sys, const Controller& ctrl,
                         const Eigen::VectorXd& x, const Eigen::VectorXd& omega,
                         double dt) {
  auto f = [&](const Eigen::VectorXd& s) {
    return vector_field_ct(sys, s, ctrl.input(s), omega);
  };
  Eigen::VectorXd k1 = f(x);
  Eigen::VectorXd k2 = f(x + 0.5 * dt * k1);
  Eigen::VectorXd k3 = f(x + 0.5 * dt * k2);
  Eigen::VectorXd k4 = f(x + dt * k3);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

SimResult simulate_closed_loop(const LiftedSystem& sys, const Controller& ctrl,
                               const Eigen::VectorXd& x0, int horizon,
                               const DisturbanceSampler& dist, Rng rng,
                               const IntegrationConfig& integ) {
  SimResult out;
  out.states.resize(sys.n, horizon + 1);
  out.inputs.resize(sys.l, horizon + 1);
  out.times.resize(horizon + 1);
  Eigen::VectorXd x = x0;
  out.states.col(0) = x;
  out.inputs.col(0) = ctrl.input(x);
  out.times[0] = 0.0;
  for (int k = 0; k < horizon; ++k) {
    if (sys.time_kind == TimeKind::discrete) {
      x = step_dt(sys, x, ctrl.input(x), dist.sample(rng));
      out.times[k + 1] = k + 1;
    } else {
      if (integ.sample_time <= 0.0)
        throw std::invalid_argument("simulate_closed_loop: sample_time must be > 0");
      const double dt = integ.sample_time / integ.substeps;
      for (int s = 0; s < integ.substeps; ++s)
        x = rk4_step(sys, ctrl, x, dist.sample(rng), dt);
      out.times[k + 1] = (k + 1) * integ.sample_time;
    }
    if (!x.allFinite()) {
      out.diverged = true;
      out.divergence_step = k + 1;
      out.states.conservativeResize(Eigen::NoChange, k + 1);
      out.inputs.conservativeResize(Eigen::NoChange, k + 1);
      out.times.resize(k + 1);
      return out;
    }
    out.states.col(k + 1) = x;
    out.inputs.col(k + 1) = ctrl.input(x);
  }
  return out;
}

void write_trajectory_csv(const std::string& path, const SimResult& sim,
                          TimeKind kind) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << (kind == TimeKind::discrete ? "k" : "t");
  for (int i = 0; i < sim.states.rows(); ++i) f << ",x_" << (i + 1);
  for (int i = 0; i < sim.inputs.rows(); ++i) f << ",u_" << (i + 1);
  f << "\n";
  f.precision(17);
  for (int k = 0; k < sim.states.cols(); ++k) {
    f << sim.times[k];
    for (int i = 0; i < sim.states.rows(); ++i) f << "," << sim.states(i, k);
    for (int i = 0; i < sim.inputs.rows(); ++i) f << "," << sim.inputs(i, k);
    f << "\n";
  }
}

}  // namespace rcbc
