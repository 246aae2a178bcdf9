#pragma once

#include <string>

#include "rcbc/certify.hpp"

namespace rcbc {

struct CollectionConfig {
  Eigen::VectorXd x0;
  Box input_box;          // excitation
  Eigen::MatrixXd K0;     // optional collection feedback
  Eigen::VectorXd bias;   // optional constant input offset
  double tau = 0.0;       // ct sampling time
  int substeps = 10;

  InputPolicy policy() const { return InputPolicy{input_box, K0, bias}; }
};

struct VerificationConfig {
  int runs = 200;
  int samples = 10000;
  double infinite_cap = 1000.0;
  double ct_sample_time = 0.01;
  int omega_draws = 32;
  int disturbance_draws = 16;
};

// Fully resolved run description: benchmark presets fill every field, a
// config file may override any of them.
struct RunConfig {
  std::string name;
  LiftedSystem nominal;
  SafetySets sets;
  NoiseSpec noise;
  double eps_Omega = 0.0;
  PerturbSpec perturb;
  CollectionConfig collection;
  SynthesisConfig synth;
  std::vector<double> lambda_grid;  // optional; empty means fixed synth.lambda
  VerificationConfig verification;
  SynthMode mode = SynthMode::physics_informed;
  int T = 0;
  int T_max = 0;
  uint64_t seed = 1;
  std::string out_dir = "out";

  Dictionaries dictionaries() const {
    Dictionaries d;
    d.M = nominal.dict_M;
    d.Q = nominal.Q;
    d.C = factor_C(nominal.dict_M);
    return d;
  }
};

// Table-1 style presets for the four shipped benchmarks.
RunConfig benchmark_config(const std::string& name);

// Loads a config file: {"benchmark": "..."} with optional overrides, or an
// inline {"system": {...}} description.  Throws std::runtime_error with the
// offending field path on schema violations.
RunConfig load_config(const std::string& path);

// Serialized resolved config (the echo embedded in every result file).
std::string config_to_json(const RunConfig& cfg);

}  // namespace rcbc
