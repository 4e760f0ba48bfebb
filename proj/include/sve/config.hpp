#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sve/domains.hpp"
#include "sve/kernels.hpp"
#include "sve/riccati.hpp"
#include "sve/scheme.hpp"

namespace sve {

/// Sectioned key-value run description. See README for the schema.
struct RunConfig {
  static constexpr int kSchemaVersion = 1;

  struct Kernel {
    std::string family = "constant";
    double value = 1.0;
    double a = 1.0;
    double b = 0.0;
    double alpha = 0.75;
    std::string time_change = "identity";
    double time_change_beta = 1.0;
    double time_change_shift = 0.0;
    std::vector<std::pair<double, double>> terms;
    std::vector<CompletelyMonotoneKernel::Atom> atoms;
    ScalarFn b_fn = ScalarFn::constant(1.0);
    ScalarFn c_fn = ScalarFn::constant(1.0);
    CumulativeRate rate = CumulativeRate::linear(1.0);
    int n_atoms = 20;
    int smooth_level = 0;
    double offset = 0.0;
    double scale = 1.0;
    std::optional<double> horizon;
  } kernel;

  struct Model {
    std::string family = "cir";
    double theta = 0.3;
    double lambda = 0.5;
    double sigma = 0.4;
    Vec b0;
    Mat B;
    Vec sigmas;
    double wf_a = 0.5;
    double wf_b = -1.0;
    Mat alpha;
    Mat M;
    Mat Q;
    Mat S;
  } model;

  struct Domain {
    std::string kind = "orthant";
    int size = 1;
  } domain;

  Vec x0 = Vec::Constant(1, 0.3);

  SchemeConfig scheme;
  std::size_t n_paths = 1000;

  struct Riccati {
    int grid_steps = 1000;
    int max_picard_iters = 200;
    double tol = 1e-10;
    WeightMode weight_mode = WeightMode::closed_form;
    Vec f = Vec::Constant(1, -1.0);
  } riccati;

  struct Positivity {
    int max_order = 6;
    int n_samples = 500;
    double tol = 1e-10;
  } positivity;

  struct Holder {
    std::vector<double> exponents{0.4, 0.6};
    int quad_resolution = 64;
  } holder;
};

/// Throws ConfigError on syntax errors, unknown sections or keys, bad values
/// and a missing or unsupported schema_version.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

KernelPtr build_kernel(const RunConfig::Kernel& spec, double T);
ModelPtr build_model(const RunConfig::Model& spec);
ConvexDomain build_domain(const RunConfig::Domain& spec);
TimeChange build_time_change(const RunConfig::Kernel& spec);
RiccatiConfig build_riccati_config(const RunConfig& cfg);

}  // namespace sve
