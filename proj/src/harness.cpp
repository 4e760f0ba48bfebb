#include "sve/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ostream>

#include "sve/errors.hpp"
#include "sve/positivity.hpp"

namespace sve {

double path_exponent(const std::vector<double>& grid, const double* values, int dim,
                     const std::vector<Vec>& f_on_grid) {
  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double v = 0.0;
    for (int i = 0; i < dim; ++i) v += f_on_grid[k][i] * values[k * dim + i];
    if (k > 0) acc += 0.5 * (grid[k] - grid[k - 1]) * (prev + v);
    prev = v;
  }
  return acc;
}

McEstimate mean_and_stderr(const std::vector<double>& samples) {
  McEstimate r;
  const std::size_t n = samples.size();
  if (n == 0) return r;
  // Shifted by the first sample.
  const double shift = samples.front();
  double s1 = 0.0;
  for (double x : samples) s1 += x - shift;
  const double dm = s1 / static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - shift - dm) * (x - shift - dm);
  r.estimate = shift + dm;
  r.std_error = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  return r;
}

namespace {

std::vector<Vec> f_on(const std::vector<double>& grid, const VectorFn& f, int dim) {
  std::vector<Vec> out;
  out.reserve(grid.size());
  for (double t : grid) {
    out.push_back(f(t));
    if (out.back().size() != dim) throw std::invalid_argument("f has the wrong dimension");
  }
  return out;
}

}  // namespace

McEstimate mc_laplace(const PathEnsemble& ensemble, const VectorFn& f) {
  const auto fg = f_on(ensemble.grid, f, ensemble.dim);
  const std::size_t nt = ensemble.n_times();
  std::vector<double> samples(ensemble.n_paths);
  for (std::size_t p = 0; p < ensemble.n_paths; ++p) {
    samples[p] = std::exp(path_exponent(ensemble.grid, ensemble.values.data() + p * nt * ensemble.dim,
                                        ensemble.dim, fg));
  }
  return mean_and_stderr(samples);
}

bool certified_completely_monotone(const DoubleKernel& kernel) {
  if (dynamic_cast<const CompletelyMonotoneKernel*>(&kernel)) return true;
  if (const auto* tc = dynamic_cast<const TimeChangedKernel*>(&kernel)) return tc->G().completely_monotone();
  return false;
}

ValidationReport validate_affine(const ValidationBundle& b) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!b.kernel) throw std::invalid_argument("validate_affine needs a kernel");
  const AffineSqrtModel model(b.params.b0, b.params.B, b.params.sigmas);
  model.check_sign_conditions();
  const int d = model.dimension();
  if (b.x0.size() != d) throw std::invalid_argument("x0 has the wrong dimension");
  if ((b.x0.array() < 0.0).any()) throw PreconditionViolated("x0 must be componentwise >= 0");

  const ConvexDomain domain = ConvexDomain::orthant(d);
  const double lam = std::isfinite(b.kernel->diagonal(0.0)) ? b.kernel->diagonal(0.0) : 1.0;
  const auto inv = validate_invariance_conditions(domain, model, {lam}, b.boundary_samples, b.scheme.seed);
  if (!inv.passed) {
    for (const auto& c : inv.conditions) {
      if (!c.passed) throw PreconditionViolated("boundary condition '" + c.name + "' fails");
    }
    throw PreconditionViolated("boundary conditions fail");
  }

  if (!certified_completely_monotone(*b.kernel)) {
    if (b.kernel->singular_on_diagonal()) {
      throw PreconditionViolated("singular kernel outside the completely monotone families");
    }
    const auto rep = check_preserves_nonnegativity(*b.kernel, b.scheme.horizon, b.positivity_max_order,
                                                   b.positivity_samples, b.scheme.seed);
    if (!rep.passed) throw PreconditionViolated("kernel does not preserve nonnegativity");
  }

  SchemeConfig cfg = b.scheme;
  cfg.keep_inner_path = false;
  if (b.kernel->singular_on_diagonal()) cfg.variant = Variant::check;
  const SchemeTables tables(*b.kernel, cfg);
  const auto fg = f_on(tables.times(), b.f, d);

  std::vector<double> samples(b.n_paths);
  std::vector<std::size_t> violations(b.n_paths, 0);
  std::vector<double> minima(b.n_paths, 0.0);
  parallel_for(b.n_paths, b.threads, [&](std::size_t p) {
    NormalStream rng(cfg.seed, p);
    PathBuffers buf;
    simulate_into(tables, model, &domain, b.x0, cfg, rng, buf);
    samples[p] = std::exp(path_exponent(tables.times(), buf.grid.data(), d, fg));
    double mn = INFINITY;
    std::size_t bad = 0;
    for (double v : buf.grid) {
      mn = std::min(mn, v);
      if (v < -1e-9) ++bad;
    }
    violations[p] = bad;
    minima[p] = mn;
  });

  ValidationReport r;
  r.n_paths = b.n_paths;
  r.variant = cfg.variant;
  const McEstimate mc = mean_and_stderr(samples);
  r.mc_estimate = mc.estimate;
  r.mc_stderr = mc.std_error;
  r.min_value = INFINITY;
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    r.invariance_violations += violations[p];
    r.min_value = std::min(r.min_value, minima[p]);
  }

  const RiccatiSolution sol = solve_riccati(b.kernel, b.params, b.f, cfg.horizon, b.riccati);
  r.riccati_iterations = sol.iterations_used;
  r.riccati_residual = sol.residual;
  r.riccati_value = laplace_from_solution(*b.kernel, b.params, b.x0, b.f, sol);
  if (r.mc_stderr > 0.0) {
    r.z_score = (r.mc_estimate - r.riccati_value) / r.mc_stderr;
  } else {
    r.z_score = r.mc_estimate == r.riccati_value ? 0.0 : INFINITY;
  }
  r.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_ensemble_csv(std::ostream& out, const PathEnsemble& e) {
  out << "path_id,t,component_index,value\n";
  const std::size_t nt = e.n_times();
  for (std::size_t p = 0; p < e.n_paths; ++p) {
    for (std::size_t k = 0; k < nt; ++k) {
      for (int i = 0; i < e.dim; ++i) {
        out << p << ',' << format_double(e.grid[k]) << ',' << i << ',' << format_double(e.value(p, k, i))
            << '\n';
      }
    }
  }
}

void write_riccati_csv(std::ostream& out, const RiccatiSolution& s) {
  out << "t,component,psi\n";
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    for (Eigen::Index i = 0; i < s.psi[k].size(); ++i) {
      out << format_double(s.times[k]) << ',' << i << ',' << format_double(s.psi[k][i]) << '\n';
    }
  }
}

}  // namespace sve
