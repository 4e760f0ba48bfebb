#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sve/domains.hpp"
#include "sve/kernels.hpp"

namespace sve {

enum class Variant { hat, check };
enum class DomainMode { enforce, off };
/// How the check variant weights step integrals. `point` uses Gamma(t, t_j)
/// and, for kernels singular on the diagonal, stores left limits at grid
/// times. `cell_average` replaces Gamma(t_k, t_j) by the average of
/// Gamma(t_k, .) over (t_{j-1}, t_j].
enum class CheckWeights { point, cell_average };

Variant parse_variant(const std::string& s);
DomainMode parse_domain_mode(const std::string& s);
CheckWeights parse_check_weights(const std::string& s);
std::string to_string(Variant v);
std::string to_string(DomainMode m);
std::string to_string(CheckWeights w);

struct SchemeConfig {
  int n_steps = 100;
  double horizon = 1.0;
  int inner_substeps = 1;
  Variant variant = Variant::hat;
  DomainMode domain_mode = DomainMode::enforce;
  std::uint64_t seed = 0;
  CheckWeights check_weights = CheckWeights::point;
  bool keep_inner_path = false;

  void validate() const;
  double dt() const { return horizon / n_steps; }
  double time(int k) const { return k == n_steps ? horizon : horizon * k / n_steps; }
};

/// Gaussian stream owned by one path. Draws are consumed in the order
/// (step, substep, component).
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t path_index);
  double next() { return dist_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> dist_;
};

/// Kernel weights on the uniform grid, shared by all paths.
class SchemeTables {
 public:
  SchemeTables(const DoubleKernel& kernel, const SchemeConfig& config);

  int n_steps() const { return N_; }
  const std::vector<double>& times() const { return times_; }
  /// Weight of increment j in the value just before t_k, 1 <= j < k <= N.
  double lower(int k, int j) const { return lower_[offset(k) + (j - 1)]; }
  /// Weight of increment k in the grid value at t_k.
  double diag(int k) const { return diag_[k]; }
  const double* row(int k) const { return lower_.data() + offset(k); }
  Variant variant() const { return variant_; }

 private:
  static std::size_t offset(int k) { return static_cast<std::size_t>(k - 1) * (k - 2) / 2; }
  int N_;
  Variant variant_;
  std::vector<double> times_;
  std::vector<double> lower_;
  std::vector<double> diag_;
};

struct PathState {
  Variant variant = Variant::hat;
  std::vector<double> times;
  /// Values at t_0..t_N.
  std::vector<Vec> grid_values;
  /// Values just before t_0..t_N (left limits); entry 0 is x0.
  std::vector<Vec> left_limits;
  /// Increments for steps 1..N (entry j - 1 for step j).
  std::vector<Vec> increments;
  /// Inner process after every substep, when requested.
  std::vector<Vec> inner_path;
};

/// Flat per-path storage: grid and left are (N + 1) x d, inc is N x d.
struct PathBuffers {
  std::vector<double> grid;
  std::vector<double> left;
  std::vector<double> inc;
  std::vector<double> inner;
};

/// Shared core of both variants; the variant is taken from the tables.
/// Projection happens only when `domain` is non-null and the config enforces.
void simulate_into(const SchemeTables& tables, const CoefficientModel& model,
                   const ConvexDomain* domain, const Vec& x0, const SchemeConfig& config,
                   NormalStream& rng, PathBuffers& out);

PathState simulate_hat(const DoubleKernel& kernel, const CoefficientModel& model,
                       const ConvexDomain& domain, const Vec& x0, const SchemeConfig& config,
                       NormalStream& rng);
PathState simulate_hat(const SchemeTables& tables, const CoefficientModel& model,
                       const ConvexDomain& domain, const Vec& x0, const SchemeConfig& config,
                       NormalStream& rng);

/// `domain` is only used for projection when config.domain_mode is enforce.
PathState simulate_check(const DoubleKernel& kernel, const CoefficientModel& model, const Vec& x0,
                         const SchemeConfig& config, NormalStream& rng,
                         const ConvexDomain* domain = nullptr);
PathState simulate_check(const SchemeTables& tables, const CoefficientModel& model, const Vec& x0,
                         const SchemeConfig& config, NormalStream& rng,
                         const ConvexDomain* domain = nullptr);

/// x0 + sum_{t_j <= t} increment_j Gamma(t, t_j).
Vec reconstruct(const DoubleKernel& kernel, const PathState& path, double t);

struct PathEnsemble {
  std::vector<double> grid;
  std::size_t n_paths = 0;
  int dim = 0;
  std::uint64_t seed = 0;
  std::string kernel_id;
  std::string model_id;
  SchemeConfig config;
  /// n_paths x (n_steps + 1) x dim
  std::vector<double> values;
  /// n_paths x n_steps x dim, empty unless requested.
  std::vector<double> increments;

  std::size_t n_times() const { return grid.size(); }
  double value(std::size_t path, std::size_t k, int i) const {
    return values[(path * grid.size() + k) * dim + i];
  }
  PathState path_state(std::size_t path) const;
};

/// Runs fn(i) for i in [0, n) on `threads` workers (0 = hardware concurrency).
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

PathEnsemble simulate_ensemble(const DoubleKernel& kernel, const CoefficientModel& model,
                               const ConvexDomain& domain, const Vec& x0, const SchemeConfig& config,
                               std::size_t n_paths, int threads = 1, bool keep_increments = false);

struct HolderStatistic {
  double exponent;
  double q50;
  double q95;
};

/// Quantiles over paths of sup_{j<k} |X_k - X_j| / (t_k - t_j)^a.
std::vector<HolderStatistic> holder_estimate(const PathEnsemble& ensemble,
                                             const std::vector<double>& exponents);

}  // namespace sve
