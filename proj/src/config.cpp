#include "rcbc/config.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace rcbc {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("config error at " + path + ": " + what);
}

Box box_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of [lo, hi]");
  Box b;
  const int n = static_cast<int>(j.size());
  b.lo.resize(n);
  b.hi.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& iv = j[i];
    if (!iv.is_array() || iv.size() != 2)
      fail(path + "[" + std::to_string(i) + "]", "expected [lo, hi]");
    b.lo(i) = iv[0].get<double>();
    b.hi(i) = iv[1].get<double>();
    if (!(b.lo(i) <= b.hi(i)))
      fail(path + "[" + std::to_string(i) + "]", "lo > hi");
  }
  return b;
}

json box_to_json(const Box& b) {
  json j = json::array();
  for (int i = 0; i < b.dim(); ++i) j.push_back({b.lo(i), b.hi(i)});
  return j;
}

std::vector<Box> boxes_from_json(const json& j, const std::string& path) {
  std::vector<Box> out;
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of boxes");
  for (size_t i = 0; i < j.size(); ++i)
    out.push_back(box_from_json(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

void apply_sets(RunConfig& cfg, const json& j) {
  if (j.contains("X")) cfg.sets.X = box_from_json(j["X"], "sets.X");
  if (j.contains("X_i")) cfg.sets.X_i = boxes_from_json(j["X_i"], "sets.X_i");
  if (j.contains("X_u")) cfg.sets.X_u = boxes_from_json(j["X_u"], "sets.X_u");
}

void apply_noise(RunConfig& cfg, const json& j) {
  if (j.contains("eps_omega")) cfg.noise.eps_omega = j["eps_omega"].get<double>();
  if (j.contains("eps_varpi")) cfg.noise.eps_varpi = j["eps_varpi"].get<double>();
  if (j.contains("eps_Omega")) cfg.eps_Omega = j["eps_Omega"].get<double>();
  if (j.contains("Upsilon")) {
    const auto& u = j["Upsilon"];
    if (u.is_string() && u == "identity") {
      cfg.noise.Upsilon =
          Eigen::MatrixXd::Identity(cfg.nominal.n, cfg.nominal.n);
    } else if (u.is_array()) {
      const int rows = static_cast<int>(u.size());
      const int cols = static_cast<int>(u[0].size());
      cfg.noise.Upsilon.resize(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int k = 0; k < cols; ++k)
          cfg.noise.Upsilon(i, k) = u[i][k].get<double>();
    } else {
      fail("noise.Upsilon", "expected \"identity\" or a matrix");
    }
  }
}

void apply_synth(SynthesisConfig& s, const json& j) {
  if (j.contains("lambda")) s.lambda = j["lambda"].get<double>();
  if (j.contains("mu")) s.mu = j["mu"].get<double>();
  if (j.contains("deg_Kbar")) s.deg_Kbar = j["deg_Kbar"].get<int>();
  if (j.contains("deg_kappa")) s.deg_kappa = j["deg_kappa"].get<int>();
  if (j.contains("require_infinite_horizon"))
    s.require_infinite_horizon = j["require_infinite_horizon"].get<bool>();
  if (j.contains("domain")) {
    const std::string d = j["domain"].get<std::string>();
    if (d == "global") s.domain = DomainRelaxation::global;
    else if (d == "state_ball") s.domain = DomainRelaxation::state_ball;
    else fail("synthesis.domain", "expected \"global\" or \"state_ball\"");
  }
  if (j.contains("r_X")) s.r_X = j["r_X"].get<double>();
  if (j.contains("psd_margin")) s.psd_margin = j["psd_margin"].get<double>();
  if (j.contains("gamma_gap")) s.gamma_gap = j["gamma_gap"].get<double>();
  if (j.contains("solver")) {
    const auto& so = j["solver"];
    if (so.contains("max_iters")) s.solver.max_iters = so["max_iters"].get<int>();
    if (so.contains("feastol")) s.solver.feastol = so["feastol"].get<double>();
    if (so.contains("reltol")) s.solver.reltol = so["reltol"].get<double>();
    if (so.contains("verbose")) s.solver.verbose = so["verbose"].get<bool>();
  }
}

LiftedSystem system_from_json(const json& j) {
  LiftedSystem sys;
  const std::string kind = j.at("time_kind").get<std::string>();
  if (kind == "discrete") sys.time_kind = TimeKind::discrete;
  else if (kind == "continuous") sys.time_kind = TimeKind::continuous;
  else fail("system.time_kind", "expected \"discrete\" or \"continuous\"");
  sys.n = j.at("n").get<int>();
  sys.l = j.at("l").get<int>();
  sys.dict_M = build_dict(sys.n, j.at("dict_degree").get<int>(), false);
  if (j.contains("Q") && !(j["Q"].is_string() && j["Q"] == "identity"))
    fail("system.Q", "only \"identity\" is supported in config files");
  sys.Q = PolyMatrix::identity(sys.l, sys.n);
  const auto& om = j.at("Omega_tilde");
  const int rows = static_cast<int>(om.size());
  const int cols = static_cast<int>(om[0].size());
  if (rows != sys.n || cols != sys.dict_M.size() + sys.l)
    fail("system.Omega_tilde", "expected " + std::to_string(sys.n) + " x " +
                                   std::to_string(sys.dict_M.size() + sys.l));
  sys.Omega.resize(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) sys.Omega(i, k) = om[i][k].get<double>();
  return sys;
}

void finalize(RunConfig& cfg) {
  if (cfg.sets.X_i.empty() || cfg.sets.X_u.empty())
    fail("sets", "initial and unsafe sets are required");
  auto [ri, ru] = set_radii(cfg.sets.X_i, cfg.sets.X_u);
  cfg.synth.r_i = ri;
  cfg.synth.r_u = ru;
  if (cfg.synth.domain == DomainRelaxation::state_ball && cfg.synth.r_X <= 0)
    cfg.synth.r_X = cfg.sets.X.max_norm();
  cfg.synth.mode = cfg.mode;
  cfg.perturb.seed = cfg.seed;
  if (cfg.collection.x0.size() == 0) cfg.collection.x0 = cfg.sets.X_i[0].center();
  if (cfg.collection.input_box.dim() == 0)
    cfg.collection.input_box = Box::cube(cfg.nominal.l, -1.0, 1.0);
  if (cfg.nominal.time_kind == TimeKind::continuous && cfg.collection.tau <= 0)
    fail("collection.tau", "continuous-time runs need tau > 0");
}

}  // namespace

RunConfig benchmark_config(const std::string& name) {
  RunConfig cfg;
  cfg.name = name;
  cfg.nominal = nominal_benchmark(name);
  const int n = cfg.nominal.n;
  cfg.noise.Upsilon = Eigen::MatrixXd::Identity(n, n);
  cfg.synth.domain = DomainRelaxation::state_ball;
  cfg.synth.deg_kappa = 2;

  if (name == "lorenz") {
    cfg.noise.eps_omega = 0.001;
    cfg.eps_Omega = 0.1;
    cfg.perturb.omega_lo = -0.0025;
    cfg.perturb.omega_hi = 0.0025;
    // The nominal disturbance interval exceeds the weighted ball; the
    // simulation box is shrunk to the inscribed cube of |w| <= eps_omega.
    const double d = 0.001 / std::sqrt(3.0);
    cfg.perturb.dist_lo = -d;
    cfg.perturb.dist_hi = d;
    cfg.sets.X = Box::cube(3, -15, 15);
    Box xi = Box::cube(3, -2, 2);
    xi.lo(0) = 0;
    xi.hi(0) = 2;
    cfg.sets.X_i = {xi};
    Box xu1 = Box::cube(3, -15, -6);
    xu1.lo(2) = 6;
    xu1.hi(2) = 15;
    Box xu2 = Box::cube(3, -15, 15);
    xu2.lo(1) = 10;
    xu2.hi(1) = 15;
    cfg.sets.X_u = {xu1, xu2};
    cfg.synth.lambda = 0.99;
    cfg.synth.mu = 0.002;
    cfg.synth.deg_Kbar = 1;
    cfg.synth.require_infinite_horizon = false;
    // The open loop is exponentially unstable; collect along a slowly
    // decaying arc under a crude stabilizer so the samples stay informative.
    cfg.collection.x0 = Eigen::Vector3d(5.0, 5.0, 9.0);
    cfg.collection.K0 = Eigen::MatrixXd::Zero(1, 3);
    cfg.collection.K0 << -25.0, -22.0, 0.0;
    cfg.T = 2;
    cfg.T_max = 26;
  } else if (name == "spacecraft") {
    cfg.noise.eps_omega = 0.05;
    cfg.eps_Omega = 0.8;
    cfg.perturb.omega_lo = -0.001;
    cfg.perturb.omega_hi = 0.001;
    cfg.perturb.dist_lo = -0.02;
    cfg.perturb.dist_hi = 0.02;
    cfg.sets.X = Box::cube(3, -25, 25);
    cfg.sets.X_i = {Box::cube(3, -5, 5)};
    Box xu1 = Box::cube(3, -25, 25);
    xu1.lo(0) = -25;
    xu1.hi(0) = -15;
    xu1.lo(1) = 0;
    xu1.hi(1) = 25;
    Box xu2 = Box::cube(3, 10, 25);
    Box xu3 = Box::cube(3, -25, -10);
    xu3.lo(0) = 10;
    xu3.hi(0) = 25;
    cfg.sets.X_u = {xu1, xu2, xu3};
    cfg.synth.lambda = 0.99;
    cfg.synth.mu = 0.004;
    cfg.synth.deg_Kbar = 1;
    cfg.collection.x0 = Eigen::Vector3d(2.0, 2.0, 2.0);
    cfg.T = 15;
    cfg.T_max = 62;
  } else if (name == "higher_degree") {
    cfg.noise.eps_omega = 0.0014;
    cfg.eps_Omega = 0.325;
    cfg.perturb.omega_lo = -0.002;
    cfg.perturb.omega_hi = 0.002;
    cfg.perturb.dist_lo = -0.0002;
    cfg.perturb.dist_hi = 0.0002;
    cfg.sets.X = Box::cube(3, -25, 25);
    cfg.sets.X_i = {Box::cube(3, -5, 5)};
    cfg.sets.X_u = {Box::cube(3, -25, -12), Box::cube(3, 12, 25)};
    cfg.synth.lambda = 0.99;
    cfg.synth.mu = 4e-5;
    cfg.synth.deg_Kbar = 2;
    cfg.collection.x0 = Eigen::Vector3d(2.0, 2.0, 2.0);
    cfg.T = 13;
    cfg.T_max = 70;
  } else if (name == "chen") {
    cfg.noise.eps_omega = 1.25;
    cfg.noise.eps_varpi = 1.5;
    cfg.eps_Omega = 100.0;
    cfg.perturb.omega_lo = -1.0;
    cfg.perturb.omega_hi = 1.0;
    cfg.perturb.dist_lo = -0.25;
    cfg.perturb.dist_hi = 0.25;
    cfg.sets.X = Box::cube(3, -10, 10);
    cfg.sets.X_i = {Box::cube(3, -2, 2)};
    Box xu1 = Box::cube(3, -10, -6);
    xu1.lo(2) = -10;
    xu1.hi(2) = 10;
    Box xu2 = Box::cube(3, 6, 10);
    xu2.lo(0) = -10;
    xu2.hi(0) = 10;
    Box xu3 = Box::cube(3, 5, 10);
    xu3.lo(2) = -10;
    xu3.hi(2) = -5;
    cfg.sets.X_u = {xu1, xu2, xu3};
    cfg.synth.deg_Kbar = 1;
    cfg.collection.x0 = Eigen::Vector3d(1.0, 1.0, 1.0);
    cfg.collection.tau = 0.001;
    cfg.T = 9;
    cfg.T_max = 34;
  } else {
    fail("benchmark", "unknown benchmark " + name);
  }
  finalize(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }

  RunConfig cfg;
  if (j.contains("benchmark")) {
    cfg = benchmark_config(j["benchmark"].get<std::string>());
  } else if (j.contains("system")) {
    cfg.nominal = system_from_json(j["system"]);
    cfg.noise.Upsilon =
        Eigen::MatrixXd::Identity(cfg.nominal.n, cfg.nominal.n);
  } else {
    fail("(root)", "need either \"benchmark\" or \"system\"");
  }

  if (j.contains("name")) cfg.name = j["name"].get<std::string>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
  if (j.contains("mode")) {
    const std::string m = j["mode"].get<std::string>();
    if (m == "pi") cfg.mode = SynthMode::physics_informed;
    else if (m == "dd") cfg.mode = SynthMode::data_driven;
    else fail("mode", "expected \"pi\" or \"dd\"");
  }
  if (j.contains("T")) cfg.T = j["T"].get<int>();
  if (j.contains("T_max")) cfg.T_max = j["T_max"].get<int>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("sets")) apply_sets(cfg, j["sets"]);
  if (j.contains("noise")) apply_noise(cfg, j["noise"]);
  if (j.contains("perturb")) {
    const auto& p = j["perturb"];
    if (p.contains("omega_range")) {
      const double r = p["omega_range"].get<double>();
      cfg.perturb.omega_lo = -r;
      cfg.perturb.omega_hi = r;
    }
    if (p.contains("dist_range")) {
      const double r = p["dist_range"].get<double>();
      cfg.perturb.dist_lo = -r;
      cfg.perturb.dist_hi = r;
    }
  }
  if (j.contains("collection")) {
    const auto& c = j["collection"];
    if (c.contains("x0")) {
      const auto& x0 = c["x0"];
      cfg.collection.x0.resize(x0.size());
      for (size_t i = 0; i < x0.size(); ++i)
        cfg.collection.x0(i) = x0[i].get<double>();
    }
    if (c.contains("input_range")) {
      const double r = c["input_range"].get<double>();
      cfg.collection.input_box = Box::cube(cfg.nominal.l, -r, r);
    }
    if (c.contains("tau")) cfg.collection.tau = c["tau"].get<double>();
    if (c.contains("substeps")) cfg.collection.substeps = c["substeps"].get<int>();
  }
  if (j.contains("synthesis")) apply_synth(cfg.synth, j["synthesis"]);
  if (j.contains("lambda_grid"))
    cfg.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
  if (j.contains("verification")) {
    const auto& v = j["verification"];
    if (v.contains("runs")) cfg.verification.runs = v["runs"].get<int>();
    if (v.contains("samples")) cfg.verification.samples = v["samples"].get<int>();
    if (v.contains("infinite_cap"))
      cfg.verification.infinite_cap = v["infinite_cap"].get<double>();
    if (v.contains("ct_sample_time"))
      cfg.verification.ct_sample_time = v["ct_sample_time"].get<double>();
  }
  if (cfg.name.empty()) cfg.name = "custom";
  if (cfg.T <= 0) cfg.T = 4;
  if (cfg.T_max <= 0) cfg.T_max = std::max(cfg.T * 2, 10);
  finalize(cfg);
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  j["mode"] = cfg.mode == SynthMode::physics_informed ? "pi" : "dd";
  j["T"] = cfg.T;
  j["T_max"] = cfg.T_max;
  j["out_dir"] = cfg.out_dir;
  j["system"] = {
      {"time_kind",
       cfg.nominal.time_kind == TimeKind::discrete ? "discrete" : "continuous"},
      {"n", cfg.nominal.n},
      {"l", cfg.nominal.l},
      {"dict_degree", cfg.nominal.dict_M.max_degree()},
      {"m", cfg.nominal.m()},
  };
  json om = json::array();
  for (int i = 0; i < cfg.nominal.Omega.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < cfg.nominal.Omega.cols(); ++k)
      row.push_back(cfg.nominal.Omega(i, k));
    om.push_back(row);
  }
  j["system"]["Omega_tilde"] = om;
  j["sets"] = {{"X", box_to_json(cfg.sets.X)}};
  json xi = json::array(), xu = json::array();
  for (const auto& b : cfg.sets.X_i) xi.push_back(box_to_json(b));
  for (const auto& b : cfg.sets.X_u) xu.push_back(box_to_json(b));
  j["sets"]["X_i"] = xi;
  j["sets"]["X_u"] = xu;
  j["noise"] = {{"eps_omega", cfg.noise.eps_omega},
                {"eps_varpi", cfg.noise.eps_varpi},
                {"eps_Omega", cfg.eps_Omega}};
  j["perturb"] = {{"omega_range", cfg.perturb.omega_hi},
                  {"dist_range", cfg.perturb.dist_hi}};
  j["collection"] = {
      {"x0", std::vector<double>(cfg.collection.x0.data(),
                                 cfg.collection.x0.data() + cfg.collection.x0.size())},
      {"input_range", cfg.collection.input_box.dim() > 0
                          ? cfg.collection.input_box.hi(0)
                          : 1.0},
      {"tau", cfg.collection.tau},
      {"substeps", cfg.collection.substeps}};
  j["synthesis"] = {
      {"lambda", cfg.synth.lambda},
      {"mu", cfg.synth.mu},
      {"deg_Kbar", cfg.synth.deg_Kbar},
      {"deg_kappa", cfg.synth.deg_kappa},
      {"require_infinite_horizon", cfg.synth.require_infinite_horizon},
      {"domain", cfg.synth.domain == DomainRelaxation::global ? "global"
                                                              : "state_ball"},
      {"r_X", cfg.synth.r_X},
      {"r_i", cfg.synth.r_i},
      {"r_u", cfg.synth.r_u},
      {"psd_margin", cfg.synth.psd_margin},
      {"gamma_gap", cfg.synth.gamma_gap}};
  j["verification"] = {{"runs", cfg.verification.runs},
                       {"samples", cfg.verification.samples},
                       {"infinite_cap", cfg.verification.infinite_cap},
                       {"ct_sample_time", cfg.verification.ct_sample_time}};
  return j.dump(1);
}

}  // namespace rcbc
