#include "rcbc/data.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace rcbc {

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  for (int i = 0; i < dim(); ++i)
    if (x(i) < lo(i) - tol || x(i) > hi(i) + tol) return false;
  return true;
}

Eigen::VectorXd Box::sample(Rng& rng) const {
  Eigen::VectorXd x(dim());
  for (int i = 0; i < dim(); ++i) x(i) = rng.uniform(lo(i), hi(i));
  return x;
}

double Box::max_norm() const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) {
    double m = std::max(std::abs(lo(i)), std::abs(hi(i)));
    s += m * m;
  }
  return std::sqrt(s);
}

double Box::min_norm() const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) {
    double c = std::clamp(0.0, lo(i), hi(i));
    s += c * c;
  }
  return std::sqrt(s);
}

Box Box::cube(int n, double lo, double hi) {
  Box b;
  b.lo = Eigen::VectorXd::Constant(n, lo);
  b.hi = Eigen::VectorXd::Constant(n, hi);
  return b;
}

std::pair<double, double> set_radii(const std::vector<Box>& initial,
                                    const std::vector<Box>& unsafe) {
  if (initial.empty() || unsafe.empty())
    throw std::invalid_argument("set_radii: empty set list");
  double r_i = 0.0;
  for (const auto& b : initial) r_i = std::max(r_i, b.max_norm());
  double r_u = std::numeric_limits<double>::infinity();
  for (const auto& b : unsafe) r_u = std::min(r_u, b.min_norm());
  if (r_i >= r_u)
    throw std::invalid_argument(
        "set_radii: initial radius reaches the unsafe region; safety spec "
        "has no concentric-norm representation");
  return {r_i, r_u};
}

TrajectoryData collect_dt(const LiftedSystem& sys, const Eigen::VectorXd& x0,
                          const InputPolicy& policy, int T,
                          const DisturbanceSampler& dist, Rng rng) {
  if (sys.time_kind != TimeKind::discrete)
    throw std::invalid_argument("collect_dt: system is not discrete-time");
  if (T < 1) throw std::invalid_argument("collect_dt: T must be >= 1");
  TrajectoryData d;
  d.time_kind = TimeKind::discrete;
  d.x.resize(sys.n, T);
  d.x_next.resize(sys.n, T);
  d.u.resize(sys.l, T);
  Eigen::VectorXd x = x0;
  for (int j = 0; j < T; ++j) {
    Eigen::VectorXd uj = policy.sample(rng, x);
    Eigen::VectorXd xn = step_dt(sys, x, uj, dist.sample(rng));
    if (!xn.allFinite())
      throw std::runtime_error("collect_dt: trajectory diverged at step " +
                               std::to_string(j + 1));
    d.x.col(j) = x;
    d.u.col(j) = uj;
    d.x_next.col(j) = xn;
    x = xn;
  }
  return d;
}

TrajectoryData collect_ct(const LiftedSystem& sys, const Eigen::VectorXd& x0,
                          const InputPolicy& policy, int T, double tau,
                          const DisturbanceSampler& dist,
                          const NoiseSpec& noise, Rng rng, int substeps) {
  if (sys.time_kind != TimeKind::continuous)
    throw std::invalid_argument("collect_ct: system is not continuous-time");
  if (T < 1 || tau <= 0.0)
    throw std::invalid_argument("collect_ct: need T >= 1 and tau > 0");
  TrajectoryData d;
  d.time_kind = TimeKind::continuous;
  d.tau = tau;
  d.x.resize(sys.n, T);
  d.x_next.resize(sys.n, T);
  d.u.resize(sys.l, T);

  // The derivative channel carries its own bounded noise |Y varpi| <= eps_varpi,
  // sampled from the inscribed box of the weighted ball.
  double varpi_box = 0.0;
  if (noise.eps_varpi > 0.0) {
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(sys.n);
    double corner = (noise.Upsilon * ones).norm();
    varpi_box = corner > 0 ? noise.eps_varpi / corner : 0.0;
  }

  Eigen::VectorXd x = x0;
  for (int j = 0; j < T; ++j) {
    Eigen::VectorXd uj = policy.sample(rng, x);
    Eigen::VectorXd w0 = dist.sample(rng);
    Eigen::VectorXd varpi(sys.n);
    for (int i = 0; i < sys.n; ++i) varpi(i) = rng.uniform(-varpi_box, varpi_box);

    d.x.col(j) = x;
    d.u.col(j) = uj;
    d.x_next.col(j) = vector_field_ct(sys, x, uj, w0) + varpi;

    // Integrate to the next sample instant, input held, disturbance ZOH.
    const double dt = tau / substeps;
    Eigen::VectorXd w = w0;
    for (int s = 0; s < substeps; ++s) {
      auto f = [&](const Eigen::VectorXd& st) {
        return vector_field_ct(sys, st, uj, w);
      };
      Eigen::VectorXd k1 = f(x);
      Eigen::VectorXd k2 = f(x + 0.5 * dt * k1);
      Eigen::VectorXd k3 = f(x + 0.5 * dt * k2);
      Eigen::VectorXd k4 = f(x + dt * k3);
      x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (s + 1 < substeps) w = dist.sample(rng);
    }
    if (!x.allFinite())
      throw std::runtime_error("collect_ct: trajectory diverged at sample " +
                               std::to_string(j + 1));
  }
  return d;
}

LiftedData lift(const TrajectoryData& data, const MonomialDict& dict,
                const PolyMatrix& Q) {
  const int T = data.T();
  if (dict.n_vars != data.x.rows())
    throw std::invalid_argument("lift: dictionary arity mismatch");
  if (Q.cols() != data.u.rows())
    throw std::invalid_argument("lift: Q input dimension mismatch");
  LiftedData out;
  out.M.resize(dict.size(), T);
  out.Qu.resize(Q.rows(), T);
  for (int j = 0; j < T; ++j) {
    std::vector<double> xv(data.x.col(j).data(), data.x.col(j).data() + data.x.rows());
    std::vector<double> mv = dict.eval(xv);
    for (int i = 0; i < dict.size(); ++i) out.M(i, j) = mv[i];
    out.Qu.col(j) = Q.eval(data.x.col(j)) * data.u.col(j);
  }
  return out;
}

ConformitySet dc_blocks(const TrajectoryData& data, const LiftedData& lifted,
                        const NoiseSpec& noise) {
  const int T = data.T();
  const int n = static_cast<int>(data.x.rows());
  const double eps =
      data.time_kind == TimeKind::discrete ? noise.eps_omega : noise.eps_e();
  const Eigen::MatrixXd eps2_phi_inv = eps * eps * noise.Phi_inv();
  ConformitySet out;
  out.blocks.reserve(T);
  for (int j = 0; j < T; ++j) {
    Eigen::VectorXd xt = data.x_next.col(j);
    Eigen::VectorXd y = lifted.Y(j);
    const int d = n + static_cast<int>(y.size());
    Eigen::MatrixXd N(d, d);
    N.topLeftCorner(n, n) = xt * xt.transpose() - eps2_phi_inv;
    N.topRightCorner(n, y.size()) = -xt * y.transpose();
    N.bottomLeftCorner(y.size(), n) = -y * xt.transpose();
    N.bottomRightCorner(y.size(), y.size()) = y * y.transpose();
    out.blocks.push_back(std::move(N));
  }
  return out;
}

PhysicsSet pi_block(const Eigen::MatrixXd& Omega_tilde, double eps_Omega,
                    const NoiseSpec& noise) {
  if (eps_Omega <= 0.0)
    throw std::invalid_argument("pi_block: eps_Omega must be > 0");
  const int n = static_cast<int>(Omega_tilde.rows());
  const int mq = static_cast<int>(Omega_tilde.cols());
  PhysicsSet out;
  out.Omega_tilde = Omega_tilde;
  out.eps_Omega = eps_Omega;
  out.block.resize(n + mq, n + mq);
  out.block.topLeftCorner(n, n) =
      Omega_tilde * Omega_tilde.transpose() -
      eps_Omega * eps_Omega * noise.Phi_inv();
  out.block.topRightCorner(n, mq) = -Omega_tilde;
  out.block.bottomLeftCorner(mq, n) = -Omega_tilde.transpose();
  out.block.bottomRightCorner(mq, mq) = Eigen::MatrixXd::Identity(mq, mq);
  return out;
}

Eigen::MatrixXd membership_form(const Eigen::MatrixXd& block,
                                const Eigen::MatrixXd& Omega) {
  const int n = static_cast<int>(Omega.rows());
  Eigen::MatrixXd stack(n, block.rows());
  stack.leftCols(n) = Eigen::MatrixXd::Identity(n, n);
  stack.rightCols(Omega.cols()) = Omega;
  return stack * block * stack.transpose();
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

}  // namespace

void save_dataset(const std::string& path, const TrajectoryData& data,
                  const NoiseSpec& noise, uint64_t seed,
                  const std::string& provenance) {
  nlohmann::json j;
  j["time_kind"] = data.time_kind == TimeKind::discrete ? "discrete" : "continuous";
  j[data.time_kind == TimeKind::discrete ? "x_next" : "x_deriv"] =
      matrix_to_json(data.x_next);
  j["x"] = matrix_to_json(data.x);
  j["u"] = matrix_to_json(data.u);
  j["tau"] = data.tau;
  j["noise"] = {{"Upsilon", matrix_to_json(noise.Upsilon)},
                {"eps_omega", noise.eps_omega},
                {"eps_varpi", noise.eps_varpi}};
  j["seed"] = seed;
  j["provenance"] = provenance;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << j.dump(1);
}

LoadedDataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  LoadedDataset out;
  out.data.time_kind =
      j.at("time_kind") == "discrete" ? TimeKind::discrete : TimeKind::continuous;
  out.data.x_next = matrix_from_json(
      j.at(out.data.time_kind == TimeKind::discrete ? "x_next" : "x_deriv"));
  out.data.x = matrix_from_json(j.at("x"));
  out.data.u = matrix_from_json(j.at("u"));
  out.data.tau = j.at("tau").get<double>();
  out.noise.Upsilon = matrix_from_json(j.at("noise").at("Upsilon"));
  out.noise.eps_omega = j.at("noise").at("eps_omega").get<double>();
  out.noise.eps_varpi = j.at("noise").at("eps_varpi").get<double>();
  out.seed = j.at("seed").get<uint64_t>();
  out.provenance = j.at("provenance").get<std::string>();
  return out;
}

}  // namespace rcbc
