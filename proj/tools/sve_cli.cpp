#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sve/config.hpp"
#include "sve/errors.hpp"
#include "sve/harness.hpp"
#include "sve/positivity.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kPass = 0;
constexpr int kError = 1;
constexpr int kFail = 2;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_dir = ".";
};

sve::RunConfig load(const Globals& g) {
  sve::RunConfig cfg = g.config.empty() ? sve::RunConfig{} : sve::load_config(g.config);
  if (g.seed) cfg.scheme.seed = *g.seed;
  return cfg;
}

fs::path out_path(const Globals& g, const std::string& explicit_path, const std::string& name) {
  if (!explicit_path.empty()) return explicit_path;
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

void emit(const Globals& g, const std::string& name, const json& j) {
  fs::create_directories(g.out_dir);
  std::ofstream(fs::path(g.out_dir) / name) << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
}

sve::VectorFn constant_f(const sve::Vec& f) {
  return [f](double) { return f; };
}

sve::AffineParams affine_of(const sve::CoefficientModel& model) {
  auto p = model.affine_params();
  if (!p) throw sve::PreconditionViolated("model '" + model.describe() + "' is not affine square-root");
  return *p;
}

sve::Vec broadcast(const sve::Vec& v, int d) {
  if (v.size() == d) return v;
  if (v.size() == 1) return sve::Vec::Constant(d, v[0]);
  throw sve::ConfigError("vector of length " + std::to_string(v.size()) + " does not match dimension " +
                         std::to_string(d));
}

int check_kernel(const Globals& g, int max_l, int samples, std::optional<double> tolerance,
                 std::optional<double> horizon) {
  const auto cfg = load(g);
  const double T = horizon.value_or(cfg.scheme.horizon);
  const auto kernel = sve::build_kernel(cfg.kernel, T);
  json j;
  j["kernel"] = kernel->describe();
  j["horizon"] = T;
  const bool certified = sve::certified_completely_monotone(*kernel);
  j["completely_monotone"] = certified;
  if (kernel->singular_on_diagonal()) {
    j["passed"] = certified;
    j["min_value"] = nullptr;
    j["witness_times"] = json::array();
    j["orders_tested"] = 0;
    j["note"] = "singular diagonal";
    emit(g, "check_kernel.json", j);
    return certified ? kPass : kFail;
  }
  const auto rep = sve::check_preserves_nonnegativity(*kernel, T, max_l, samples, cfg.scheme.seed,
                                                      tolerance.value_or(cfg.positivity.tol));
  j["passed"] = rep.passed;
  j["min_value"] = rep.min_value;
  j["witness_times"] = rep.witness ? json(*rep.witness) : json::array();
  if (rep.witness_value) j["witness_value"] = *rep.witness_value;
  j["orders_tested"] = rep.max_order_tested;
  j["tuples_tested"] = rep.tuples_tested;
  emit(g, "check_kernel.json", j);
  return rep.passed ? kPass : kFail;
}

int simulate(const Globals& g, std::optional<std::size_t> paths, std::optional<int> steps,
             std::optional<int> substeps, const std::string& variant, const std::string& mode,
             const std::string& out) {
  auto cfg = load(g);
  if (paths) cfg.n_paths = *paths;
  if (steps) cfg.scheme.n_steps = *steps;
  if (substeps) cfg.scheme.inner_substeps = *substeps;
  if (!variant.empty()) cfg.scheme.variant = sve::parse_variant(variant);
  if (!mode.empty()) cfg.scheme.domain_mode = sve::parse_domain_mode(mode);
  cfg.scheme.validate();
  const auto kernel = sve::build_kernel(cfg.kernel, cfg.scheme.horizon);
  const auto model = sve::build_model(cfg.model);
  const auto domain = sve::build_domain(cfg.domain);
  const sve::Vec x0 = broadcast(cfg.x0, model->dimension());
  const auto ens = sve::simulate_ensemble(*kernel, *model, domain, x0, cfg.scheme, cfg.n_paths, g.threads);
  const fs::path csv = out_path(g, out, "paths.csv");
  std::ofstream os(csv);
  sve::write_ensemble_csv(os, ens);
  double mn = INFINITY;
  std::size_t outside = 0;
  for (std::size_t p = 0; p < ens.n_paths; ++p) {
    for (std::size_t k = 0; k < ens.n_times(); ++k) {
      sve::Vec x(ens.dim);
      for (int i = 0; i < ens.dim; ++i) x[i] = ens.value(p, k, i);
      mn = std::min(mn, x.minCoeff());
      if (!domain.contains(x, 1e-9)) ++outside;
    }
  }
  json j{{"csv", csv.string()},
         {"kernel", ens.kernel_id},
         {"model", ens.model_id},
         {"paths", ens.n_paths},
         {"steps", cfg.scheme.n_steps},
         {"variant", sve::to_string(cfg.scheme.variant)},
         {"domain_mode", sve::to_string(cfg.scheme.domain_mode)},
         {"seed", cfg.scheme.seed},
         {"min_value", mn},
         {"outside_domain", outside}};
  emit(g, "simulate.json", j);
  return kPass;
}

int riccati(const Globals& g, std::optional<double> alpha, const std::string& kernel_config,
            std::optional<double> f_const, std::optional<int> grid_steps, const std::string& out) {
  Globals gg = g;
  if (!kernel_config.empty()) gg.config = kernel_config;
  auto cfg = load(gg);
  if (alpha) {
    cfg.kernel = sve::RunConfig::Kernel{};
    cfg.kernel.family = "fractional";
    cfg.kernel.alpha = *alpha;
  }
  if (grid_steps) cfg.riccati.grid_steps = *grid_steps;
  const double T = cfg.scheme.horizon;
  const auto kernel = sve::build_kernel(cfg.kernel, T);
  const auto model = sve::build_model(cfg.model);
  const auto params = affine_of(*model);
  const int d = model->dimension();
  const sve::Vec f = f_const ? sve::Vec::Constant(d, *f_const) : broadcast(cfg.riccati.f, d);
  const sve::Vec x0 = broadcast(cfg.x0, d);
  const auto fn = constant_f(f);
  const auto rc = sve::build_riccati_config(cfg);
  const auto sol = sve::solve_riccati(kernel, params, fn, T, rc);
  const double value = sve::laplace_from_solution(*kernel, params, x0, fn, sol);
  const fs::path csv = out_path(g, out, "riccati.csv");
  std::ofstream os(csv);
  sve::write_riccati_csv(os, sol);
  json j{{"csv", csv.string()},
         {"kernel", kernel->describe()},
         {"laplace_value", value},
         {"iterations", sol.iterations_used},
         {"residual", sol.residual}};
  emit(g, "riccati.json", j);
  return kPass;
}

int validate(const Globals& g, std::optional<std::size_t> paths, double z_max) {
  auto cfg = load(g);
  if (paths) cfg.n_paths = *paths;
  const auto kernel = sve::build_kernel(cfg.kernel, cfg.scheme.horizon);
  const auto model = sve::build_model(cfg.model);
  sve::ValidationBundle b;
  b.kernel = kernel;
  b.params = affine_of(*model);
  const int d = model->dimension();
  b.x0 = broadcast(cfg.x0, d);
  b.f = constant_f(broadcast(cfg.riccati.f, d));
  b.scheme = cfg.scheme;
  b.riccati = sve::build_riccati_config(cfg);
  b.n_paths = cfg.n_paths;
  b.threads = g.threads;
  b.positivity_max_order = cfg.positivity.max_order;
  b.positivity_samples = cfg.positivity.n_samples;
  const auto r = sve::validate_affine(b);
  const bool ok = r.passed(z_max);
  json j{{"kernel", kernel->describe()},
         {"model", model->describe()},
         {"variant", sve::to_string(r.variant)},
         {"paths", r.n_paths},
         {"mc_estimate", r.mc_estimate},
         {"mc_stderr", r.mc_stderr},
         {"riccati_value", r.riccati_value},
         {"z_score", r.z_score},
         {"invariance_violations", r.invariance_violations},
         {"min_value", r.min_value},
         {"riccati_iterations", r.riccati_iterations},
         {"riccati_residual", r.riccati_residual},
         {"runtime_ms", r.runtime_ms},
         {"passed", ok}};
  emit(g, "validate.json", j);
  return ok ? kPass : kFail;
}

int holder(const Globals& g, std::optional<std::size_t> paths, std::vector<int> steps,
           std::vector<double> exponents) {
  auto cfg = load(g);
  if (paths) cfg.n_paths = *paths;
  if (exponents.empty()) exponents = cfg.holder.exponents;
  if (steps.empty()) steps = {cfg.scheme.n_steps};
  const auto kernel = sve::build_kernel(cfg.kernel, cfg.scheme.horizon);
  const auto model = sve::build_model(cfg.model);
  const auto domain = sve::build_domain(cfg.domain);
  const sve::Vec x0 = broadcast(cfg.x0, model->dimension());
  json rows = json::array();
  const fs::path csv = out_path(g, "", "holder.csv");
  std::ofstream os(csv);
  os << "steps,exponent,q50,q95\n";
  for (int n : steps) {
    sve::SchemeConfig sc = cfg.scheme;
    sc.n_steps = n;
    const auto ens = sve::simulate_ensemble(*kernel, *model, domain, x0, sc, cfg.n_paths, g.threads);
    for (const auto& s : sve::holder_estimate(ens, exponents)) {
      rows.push_back({{"steps", n}, {"exponent", s.exponent}, {"q50", s.q50}, {"q95", s.q95}});
      os << n << ',' << sve::format_double(s.exponent) << ',' << sve::format_double(s.q50) << ','
         << sve::format_double(s.q95) << '\n';
    }
  }
  emit(g, "holder.json", json{{"csv", csv.string()}, {"statistics", rows}});
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and validation of stochastic Volterra equations"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Run configuration file")->check(CLI::ExistingFile);
  app.add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { g.seed = s; }, "RNG seed");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out-dir", g.out_dir, "Output directory");

  int code = kPass;
  std::function<int()> action;

  auto* ck = app.add_subcommand("check-kernel", "Screen a kernel for nonnegativity preservation");
  int max_l = 6;
  int samples = 500;
  std::optional<double> tolerance, horizon;
  ck->add_option("--max-l", max_l, "Largest order l")->check(CLI::Range(2, 64));
  ck->add_option("--samples", samples, "Random tuples per order")->check(CLI::NonNegativeNumber);
  ck->add_option("--tolerance", tolerance, "Tolerance on normalized Gamma_l");
  ck->add_option("--horizon", horizon, "Horizon T");
  ck->callback([&] { action = [&] { return check_kernel(g, max_l, samples, tolerance, horizon); }; });

  auto* sim = app.add_subcommand("simulate", "Simulate paths and write them as CSV");
  std::optional<std::size_t> paths;
  std::optional<int> steps, substeps;
  std::string variant, mode, out;
  sim->add_option("--paths", paths, "Number of paths");
  sim->add_option("--steps", steps, "Grid steps N");
  sim->add_option("--substeps", substeps, "Inner substeps per step");
  sim->add_option("--variant", variant, "hat | check");
  sim->add_option("--domain-mode", mode, "enforce | off");
  sim->add_option("--out", out, "CSV output path");
  sim->callback([&] { action = [&] { return simulate(g, paths, steps, substeps, variant, mode, out); }; });

  auto* ric = app.add_subcommand("riccati", "Solve the Riccati-Volterra equation");
  std::optional<double> alpha, f_const;
  std::optional<int> grid_steps;
  std::string kernel_config;
  ric->add_option("--alpha", alpha, "Use the fractional kernel with this alpha");
  ric->add_option("--kernel-config", kernel_config, "Configuration supplying the kernel")
      ->check(CLI::ExistingFile);
  ric->add_option("--f-const", f_const, "Constant value of every component of f");
  ric->add_option("--grid-steps", grid_steps, "Riccati grid steps");
  ric->add_option("--out", out, "CSV output path");
  ric->callback([&] { action = [&] { return riccati(g, alpha, kernel_config, f_const, grid_steps, out); }; });

  auto* val = app.add_subcommand("validate", "Monte Carlo against the Riccati Laplace transform");
  double z_max = 3.0;
  val->add_option("--paths", paths, "Number of paths");
  val->add_option("--z-max", z_max, "Largest accepted |z|");
  val->callback([&] { action = [&] { return validate(g, paths, z_max); }; });

  auto* hol = app.add_subcommand("holder", "Hoelder statistics of simulated paths");
  std::vector<int> steps_list;
  std::vector<double> exponents;
  hol->add_option("--paths", paths, "Number of paths");
  hol->add_option("--steps", steps_list, "Grid sizes")->delimiter(',');
  hol->add_option("--exponents", exponents, "Hoelder exponents")->delimiter(',');
  hol->callback([&] { action = [&] { return holder(g, paths, steps_list, exponents); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kError;
  }
  try {
    code = action();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
  return code;
}
