#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sve/kernels.hpp"

namespace sve {

/// Strictly increasing times s_1 < ... < s_l. The functions below evaluate
/// Gamma_l(s_l, ..., s_1), i.e. the largest time comes first in the notation.
using OrderedTuple = std::vector<double>;

struct GammaLValue {
  double value;
  /// Sum of the absolute values of the terms of the expansion.
  double scale;
};

double gamma_l(const DoubleKernel& kernel, const OrderedTuple& tuple);
GammaLValue gamma_l_scaled(const DoubleKernel& kernel, const OrderedTuple& tuple);

/// Alternating sum over subsets of the interior indices. Limited to l <= 12.
double gamma_l_nonrecursive(const DoubleKernel& kernel, const OrderedTuple& tuple);

/// Solves sum_{k >= k'} beta_k Gamma(t_k, t_k') = Gamma(t, t_k') for k' = K..1.
std::vector<double> beta_coefficients(const DoubleKernel& kernel, const OrderedTuple& grid, double t);

/// x_1 = 1 and x_k chosen so that sum_{k' <= k} x_k' Gamma(t_k, t_k') = 0.
std::vector<double> extremal_weights(const DoubleKernel& kernel, const OrderedTuple& grid);

struct PositivityReport {
  bool passed = true;
  int max_order_tested = 0;
  std::size_t tuples_tested = 0;
  /// Smallest Gamma_l over the samples, divided by max(1, scale).
  double min_value = 0.0;
  std::optional<OrderedTuple> witness;
  /// Unnormalized Gamma_l at the witness.
  std::optional<double> witness_value;
  double tolerance = 1e-10;
};

PositivityReport check_preserves_nonnegativity(const DoubleKernel& kernel, double T, int max_l = 6,
                                               int n_samples = 500, std::uint64_t rng_seed = 0,
                                               double tolerance = 1e-10);

/// Deterministic corner tuples of length l in [0, T) used by the sampler.
std::vector<OrderedTuple> corner_tuples(int l, double T);

/// Checks x0 + sum_{t_k <= t} x_k Gamma(t, t_k) >= -tolerance at every t in
/// t_eval. Throws PreconditionViolated when x0 < 0, when a partial sum at a
/// grid point is negative, or when the kernel increases in its first argument
/// on the sampled times.
bool check_with_offset(const DoubleKernel& kernel, double x0, const std::vector<double>& weights,
                       const OrderedTuple& grid, const std::vector<double>& t_eval,
                       double tolerance = 1e-10);

}  // namespace sve
