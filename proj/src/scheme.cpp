#include "sve/scheme.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "sve/errors.hpp"

namespace sve {

Variant parse_variant(const std::string& s) {
  if (s == "hat") return Variant::hat;
  if (s == "check") return Variant::check;
  throw std::invalid_argument("unknown variant '" + s + "' (hat | check)");
}

DomainMode parse_domain_mode(const std::string& s) {
  if (s == "enforce") return DomainMode::enforce;
  if (s == "off") return DomainMode::off;
  throw std::invalid_argument("unknown domain mode '" + s + "' (enforce | off)");
}

CheckWeights parse_check_weights(const std::string& s) {
  if (s == "point") return CheckWeights::point;
  if (s == "cell_average") return CheckWeights::cell_average;
  throw std::invalid_argument("unknown check weights '" + s + "' (point | cell_average)");
}

std::string to_string(Variant v) { return v == Variant::hat ? "hat" : "check"; }
std::string to_string(DomainMode m) { return m == DomainMode::enforce ? "enforce" : "off"; }
std::string to_string(CheckWeights w) { return w == CheckWeights::point ? "point" : "cell_average"; }

void SchemeConfig::validate() const {
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be > 0");
  if (inner_substeps < 1) throw std::invalid_argument("inner_substeps must be >= 1");
}

NormalStream::NormalStream(std::uint64_t seed, std::uint64_t path_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(path_index),
                    static_cast<std::uint32_t>(path_index >> 32)};
  engine_.seed(seq);
}

// ---------------------------------------------------------------------------
// Tables

SchemeTables::SchemeTables(const DoubleKernel& kernel, const SchemeConfig& config)
    : N_(config.n_steps), variant_(config.variant) {
  config.validate();
  if (kernel.horizon() && *kernel.horizon() < config.horizon * (1.0 - 1e-12)) {
    throw DomainError("scheme horizon exceeds the kernel horizon");
  }
  times_.resize(N_ + 1);
  for (int k = 0; k <= N_; ++k) times_[k] = config.time(k);
  lower_.resize(static_cast<std::size_t>(N_) * (N_ - 1) / 2);
  diag_.assign(N_ + 1, 0.0);

  const bool averaged = variant_ == Variant::check && config.check_weights == CheckWeights::cell_average;
  const double dt = config.dt();
  for (int k = 1; k <= N_; ++k) {
    const double tk = times_[k];
    double* r = lower_.data() + offset(k);
    for (int j = 1; j < k; ++j) {
      r[j - 1] = averaged ? kernel.integrate(tk, times_[j - 1], times_[j]) / dt : kernel.eval(tk, times_[j]);
    }
    if (variant_ == Variant::hat) {
      const double d = kernel.diagonal(tk);
      if (!std::isfinite(d) || !(d > 0.0)) {
        throw SingularDiagonal("hat scheme needs a finite positive diagonal; smooth or truncate the kernel first");
      }
      diag_[k] = d;
    } else if (averaged) {
      diag_[k] = kernel.integrate(tk, times_[k - 1], tk) / dt;
    } else {
      diag_[k] = kernel.singular_on_diagonal() ? 0.0 : kernel.eval(tk, tk);
    }
  }
}

// ---------------------------------------------------------------------------
// Core simulation

void simulate_into(const SchemeTables& tables, const CoefficientModel& model,
                   const ConvexDomain* domain, const Vec& x0, const SchemeConfig& config,
                   NormalStream& rng, PathBuffers& out) {
  const int N = tables.n_steps();
  const int d = model.dimension();
  if (x0.size() != d) throw std::invalid_argument("x0 has the wrong dimension");
  if (N != config.n_steps) throw std::invalid_argument("tables built for a different grid");
  const bool hat = tables.variant() == Variant::hat;
  const bool enforce = domain != nullptr && config.domain_mode == DomainMode::enforce;
  if (enforce && domain->dimension() != d) throw std::invalid_argument("domain has the wrong dimension");
  const int m = config.inner_substeps;
  const double h = config.dt() / m;
  const double sqrt_h = std::sqrt(h);

  out.grid.assign(static_cast<std::size_t>(N + 1) * d, 0.0);
  out.left.assign(static_cast<std::size_t>(N + 1) * d, 0.0);
  out.inc.assign(static_cast<std::size_t>(N) * d, 0.0);
  if (config.keep_inner_path) {
    out.inner.assign(static_cast<std::size_t>(N) * m * d, 0.0);
  } else {
    out.inner.clear();
  }
  for (int i = 0; i < d; ++i) out.grid[i] = out.left[i] = x0[i];

  Vec start(d), D(d), xi(d), b(d), z(d), sdw(d);
  for (int k = 0; k < N; ++k) {
    const int kn = k + 1;
    const double* w = tables.row(kn);
    for (int i = 0; i < d; ++i) {
      double acc = x0[i];
      for (int j = 1; j <= k; ++j) acc += out.inc[static_cast<std::size_t>(j - 1) * d + i] * w[j - 1];
      start[i] = acc;
    }
    const double lambda = hat ? tables.diag(kn) : 1.0;
    D.setZero();
    xi = start;
    for (int sub = 0; sub < m; ++sub) {
      model.drift(xi, b);
      for (int i = 0; i < d; ++i) z[i] = rng.next() * sqrt_h;
      model.apply_diffusion(xi, z, sdw);
      if (hat) {
        D += lambda * (b * h + sdw);
      } else {
        D += b * h + sdw;
      }
      xi = start + D;
      if (enforce) {
        domain->project_inplace(xi);
        D = xi - start;
      }
      if (config.keep_inner_path) {
        for (int i = 0; i < d; ++i) out.inner[(static_cast<std::size_t>(k) * m + sub) * d + i] = xi[i];
      }
    }
    const double dg = tables.diag(kn);
    for (int i = 0; i < d; ++i) {
      const double inc = hat ? D[i] / lambda : D[i];
      out.inc[static_cast<std::size_t>(k) * d + i] = inc;
      out.left[static_cast<std::size_t>(kn) * d + i] = start[i];
      out.grid[static_cast<std::size_t>(kn) * d + i] = start[i] + inc * dg;
    }
  }
}

namespace {

PathState to_state(const PathBuffers& buf, const SchemeTables& tables, const SchemeConfig& config,
                   int d) {
  PathState p;
  p.variant = tables.variant();
  p.times = tables.times();
  const int N = tables.n_steps();
  auto slice = [d](const std::vector<double>& v, std::size_t row) {
    return Vec(Eigen::Map<const Vec>(v.data() + row * d, d));
  };
  for (int k = 0; k <= N; ++k) {
    p.grid_values.push_back(slice(buf.grid, k));
    p.left_limits.push_back(slice(buf.left, k));
  }
  for (int k = 0; k < N; ++k) p.increments.push_back(slice(buf.inc, k));
  if (config.keep_inner_path) {
    for (std::size_t r = 0; r < buf.inner.size() / d; ++r) p.inner_path.push_back(slice(buf.inner, r));
  }
  return p;
}

}  // namespace

PathState simulate_hat(const SchemeTables& tables, const CoefficientModel& model,
                       const ConvexDomain& domain, const Vec& x0, const SchemeConfig& config,
                       NormalStream& rng) {
  if (tables.variant() != Variant::hat) throw std::invalid_argument("tables were built for the check variant");
  if (config.domain_mode == DomainMode::enforce && !domain.contains(x0)) {
    throw DomainViolation("x0 is outside the domain");
  }
  PathBuffers buf;
  simulate_into(tables, model, &domain, x0, config, rng, buf);
  return to_state(buf, tables, config, model.dimension());
}

PathState simulate_hat(const DoubleKernel& kernel, const CoefficientModel& model,
                       const ConvexDomain& domain, const Vec& x0, const SchemeConfig& config,
                       NormalStream& rng) {
  SchemeConfig c = config;
  c.variant = Variant::hat;
  return simulate_hat(SchemeTables(kernel, c), model, domain, x0, c, rng);
}

PathState simulate_check(const SchemeTables& tables, const CoefficientModel& model, const Vec& x0,
                         const SchemeConfig& config, NormalStream& rng, const ConvexDomain* domain) {
  if (tables.variant() != Variant::check) throw std::invalid_argument("tables were built for the hat variant");
  PathBuffers buf;
  simulate_into(tables, model, domain, x0, config, rng, buf);
  return to_state(buf, tables, config, model.dimension());
}

PathState simulate_check(const DoubleKernel& kernel, const CoefficientModel& model, const Vec& x0,
                         const SchemeConfig& config, NormalStream& rng, const ConvexDomain* domain) {
  SchemeConfig c = config;
  c.variant = Variant::check;
  return simulate_check(SchemeTables(kernel, c), model, x0, c, rng, domain);
}

Vec reconstruct(const DoubleKernel& kernel, const PathState& path, double t) {
  if (path.grid_values.empty() || path.increments.size() + 1 != path.times.size()) {
    throw MissingIncrements("path does not carry increments");
  }
  const Vec& x0 = path.grid_values.front();
  Vec acc = x0;
  for (std::size_t j = 1; j < path.times.size() && path.times[j] <= t; ++j) {
    acc += path.increments[j - 1] * kernel.eval(t, path.times[j]);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Ensembles

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads) : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t i; !failed && (i = next.fetch_add(1)) < n;) fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

PathState PathEnsemble::path_state(std::size_t path) const {
  if (path >= n_paths) throw std::out_of_range("path index out of range");
  PathState p;
  p.variant = config.variant;
  p.times = grid;
  const std::size_t nt = grid.size();
  for (std::size_t k = 0; k < nt; ++k) {
    p.grid_values.emplace_back(Eigen::Map<const Vec>(values.data() + (path * nt + k) * dim, dim));
  }
  if (!increments.empty()) {
    for (std::size_t k = 0; k + 1 < nt; ++k) {
      p.increments.emplace_back(Eigen::Map<const Vec>(increments.data() + (path * (nt - 1) + k) * dim, dim));
    }
  }
  return p;
}

PathEnsemble simulate_ensemble(const DoubleKernel& kernel, const CoefficientModel& model,
                               const ConvexDomain& domain, const Vec& x0, const SchemeConfig& config,
                               std::size_t n_paths, int threads, bool keep_increments) {
  config.validate();
  if (config.variant == Variant::hat && config.domain_mode == DomainMode::enforce && !domain.contains(x0)) {
    throw DomainViolation("x0 is outside the domain");
  }
  const SchemeTables tables(kernel, config);
  PathEnsemble ens;
  ens.grid = tables.times();
  ens.n_paths = n_paths;
  ens.dim = model.dimension();
  ens.seed = config.seed;
  ens.kernel_id = kernel.describe();
  ens.model_id = model.describe();
  ens.config = config;
  ens.config.keep_inner_path = false;
  const std::size_t nt = ens.grid.size();
  const int d = ens.dim;
  ens.values.assign(n_paths * nt * d, 0.0);
  if (keep_increments) ens.increments.assign(n_paths * (nt - 1) * d, 0.0);

  parallel_for(n_paths, threads, [&](std::size_t p) {
    NormalStream rng(config.seed, p);
    PathBuffers buf;
    simulate_into(tables, model, &domain, x0, ens.config, rng, buf);
    std::copy(buf.grid.begin(), buf.grid.end(), ens.values.begin() + p * nt * d);
    if (keep_increments) std::copy(buf.inc.begin(), buf.inc.end(), ens.increments.begin() + p * (nt - 1) * d);
  });
  return ens;
}

std::vector<HolderStatistic> holder_estimate(const PathEnsemble& ensemble,
                                             const std::vector<double>& exponents) {
  if (exponents.empty()) return {};
  if (ensemble.n_paths < 100) {
    throw InsufficientPaths("holder_estimate needs at least 100 paths, got " +
                            std::to_string(ensemble.n_paths));
  }
  const std::size_t nt = ensemble.n_times();
  const int d = ensemble.dim;
  const auto& g = ensemble.grid;
  if (nt >= 3) {
    const double dt = g[1] - g[0];
    for (std::size_t k = 1; k < nt; ++k) {
      if (std::abs((g[k] - g[k - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(g.back()))) {
        throw std::invalid_argument("holder_estimate needs a uniform grid");
      }
    }
  }
  std::vector<HolderStatistic> out;
  std::vector<double> stat(ensemble.n_paths);
  for (double a : exponents) {
    std::vector<double> inv_pow(nt, 0.0);
    for (std::size_t m = 1; m < nt; ++m) inv_pow[m] = std::pow(g[m] - g[0], -a);
    for (std::size_t p = 0; p < ensemble.n_paths; ++p) {
      const double* x = ensemble.values.data() + p * nt * d;
      double best = 0.0;
      for (std::size_t k = 1; k < nt; ++k) {
        for (std::size_t j = 0; j < k; ++j) {
          double diff2 = 0.0;
          for (int i = 0; i < d; ++i) {
            const double e = x[k * d + i] - x[j * d + i];
            diff2 += e * e;
          }
          best = std::max(best, std::sqrt(diff2) * inv_pow[k - j]);
        }
      }
      stat[p] = best;
    }
    std::vector<double> sorted = stat;
    std::sort(sorted.begin(), sorted.end());
    auto q = [&](double prob) {
      const double pos = prob * (sorted.size() - 1);
      const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
      return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
    };
    out.push_back({a, q(0.5), q(0.95)});
  }
  return out;
}

}  // namespace sve
