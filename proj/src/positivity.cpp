#include "sve/positivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "sve/errors.hpp"

namespace sve {

namespace {

void validate_tuple(const OrderedTuple& s, std::size_t min_len) {
  if (s.size() < min_len) {
    throw std::invalid_argument("tuple needs at least " + std::to_string(min_len) + " times");
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i]) || s[i] < 0.0) throw DomainError("tuple times must be finite and >= 0");
    if (i > 0 && !(s[i] > s[i - 1])) throw DomainError("tuple times must be strictly increasing");
  }
}

double pivot(const DoubleKernel& kernel, double s) {
  const double d = kernel.diagonal(s);
  if (!std::isfinite(d) || !(d > 0.0)) {
    throw SingularDiagonal("diagonal at s = " + std::to_string(s) + " is not finite and positive");
  }
  if (d < std::numeric_limits<double>::min()) {
    throw IllConditioned("diagonal at s = " + std::to_string(s) + " underflows");
  }
  return d;
}

// g2[a][b] = Gamma(s_a, s_b) / Gamma(s_b, s_b) for b < a.
std::vector<std::vector<double>> gamma2_table(const DoubleKernel& kernel, const OrderedTuple& s) {
  const std::size_t l = s.size();
  std::vector<std::vector<double>> g2(l, std::vector<double>(l, 0.0));
  for (std::size_t b = 0; b + 1 < l; ++b) {
    const double d = pivot(kernel, s[b]);
    for (std::size_t a = b + 1; a < l; ++a) g2[a][b] = kernel.eval(s[a], s[b]) / d;
  }
  return g2;
}

}  // namespace

GammaLValue gamma_l_scaled(const DoubleKernel& kernel, const OrderedTuple& tuple) {
  validate_tuple(tuple, 2);
  const std::size_t L = tuple.size() - 1;
  const auto g2 = gamma2_table(kernel, tuple);
  // F(i, j): Gamma over (s_i; s_j, ..., s_L), i < j <= L.
  std::vector<std::vector<double>> F(L + 1, std::vector<double>(L + 1, 0.0));
  std::vector<std::vector<double>> S(L + 1, std::vector<double>(L + 1, 0.0));
  for (std::size_t i = 0; i < L; ++i) {
    F[i][L] = g2[L][i];
    S[i][L] = std::abs(g2[L][i]);
  }
  for (std::size_t j = L; j-- > 1;) {
    for (std::size_t i = 0; i < j; ++i) {
      F[i][j] = F[i][j + 1] - g2[j][i] * F[j][j + 1];
      S[i][j] = S[i][j + 1] + std::abs(g2[j][i]) * S[j][j + 1];
    }
  }
  return {F[0][1], S[0][1]};
}

double gamma_l(const DoubleKernel& kernel, const OrderedTuple& tuple) {
  return gamma_l_scaled(kernel, tuple).value;
}

double gamma_l_nonrecursive(const DoubleKernel& kernel, const OrderedTuple& tuple) {
  validate_tuple(tuple, 2);
  const std::size_t l = tuple.size();
  if (l > 12) throw OrderTooLarge("non-recursive expansion limited to l <= 12");
  const auto g2 = gamma2_table(kernel, tuple);
  const std::size_t interior = l - 2;
  double acc = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << interior); ++mask) {
    double term = 1.0;
    std::size_t prev = 0;
    int count = 0;
    for (std::size_t k = 0; k < interior; ++k) {
      if (mask & (1u << k)) {
        term *= g2[k + 1][prev];
        prev = k + 1;
        ++count;
      }
    }
    term *= g2[l - 1][prev];
    acc += (count % 2 == 0) ? term : -term;
  }
  return acc;
}

std::vector<double> beta_coefficients(const DoubleKernel& kernel, const OrderedTuple& grid, double t) {
  validate_tuple(grid, 1);
  if (!(t > grid.back())) throw DomainError("beta_coefficients needs t after the last grid time");
  const std::size_t K = grid.size();
  std::vector<double> beta(K, 0.0);
  for (std::size_t kp = K; kp-- > 0;) {
    double rhs = kernel.eval(t, grid[kp]);
    for (std::size_t k = kp + 1; k < K; ++k) rhs -= beta[k] * kernel.eval(grid[k], grid[kp]);
    beta[kp] = rhs / pivot(kernel, grid[kp]);
  }
  return beta;
}

std::vector<double> extremal_weights(const DoubleKernel& kernel, const OrderedTuple& grid) {
  validate_tuple(grid, 1);
  const std::size_t K = grid.size();
  std::vector<double> x(K, 0.0);
  pivot(kernel, grid[0]);
  x[0] = 1.0;
  for (std::size_t k = 1; k < K; ++k) {
    double acc = 0.0;
    for (std::size_t kp = 0; kp < k; ++kp) acc += x[kp] * kernel.eval(grid[k], grid[kp]);
    x[k] = -acc / pivot(kernel, grid[k]);
  }
  return x;
}

std::vector<OrderedTuple> corner_tuples(int l, double T) {
  std::vector<OrderedTuple> out;
  OrderedTuple t(l);
  for (int i = 0; i < l; ++i) t[i] = T * i / l;
  out.push_back(t);
  for (int i = 0; i < l; ++i) t[i] = T * (1.0 - std::ldexp(1.0, -i));
  out.push_back(t);
  t[0] = 0.0;
  for (int i = 1; i < l; ++i) t[i] = T * std::ldexp(1.0, -(l - i));
  out.push_back(t);
  for (int i = 0; i < l; ++i) t[i] = T * (0.5 + 1e-3 * i);
  out.push_back(t);
  for (int i = 0; i < l; ++i) t[i] = T * 1e-4 * i;
  out.push_back(t);
  for (int i = 0; i < l; ++i) t[i] = T * (1.0 - 1e-3 * (l - i));
  out.push_back(t);
  t[0] = 0.0;
  for (int i = 1; i < l; ++i) t[i] = T * (1.0 - 1e-3 * (l - i));
  out.push_back(t);
  return out;
}

PositivityReport check_preserves_nonnegativity(const DoubleKernel& kernel, double T, int max_l,
                                               int n_samples, std::uint64_t rng_seed,
                                               double tolerance) {
  if (max_l < 2) throw std::invalid_argument("max_l must be >= 2");
  if (n_samples < 0) throw std::invalid_argument("n_samples must be >= 0");
  if (!(T > 0.0)) throw std::invalid_argument("T must be > 0");
  PositivityReport report;
  report.tolerance = tolerance;
  report.max_order_tested = max_l;
  report.min_value = std::numeric_limits<double>::infinity();
  OrderedTuple argmin;
  double argmin_raw = 0.0;

  auto consider = [&](const OrderedTuple& tuple) {
    const auto v = gamma_l_scaled(kernel, tuple);
    const double normalized = v.value / std::max(1.0, v.scale);
    ++report.tuples_tested;
    if (normalized < report.min_value) {
      report.min_value = normalized;
      argmin = tuple;
      argmin_raw = v.value;
    }
  };

  for (int l = 2; l <= max_l; ++l) {
    for (const auto& tuple : corner_tuples(l, T)) consider(tuple);
    for (int idx = 0; idx < n_samples; ++idx) {
      std::seed_seq seq{static_cast<std::uint32_t>(rng_seed), static_cast<std::uint32_t>(rng_seed >> 32),
                        static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(idx)};
      std::mt19937_64 rng(seq);
      std::uniform_real_distribution<double> unif(0.0, T);
      OrderedTuple tuple(l);
      do {
        for (auto& x : tuple) x = unif(rng);
        std::sort(tuple.begin(), tuple.end());
      } while (std::adjacent_find(tuple.begin(), tuple.end()) != tuple.end());
      consider(tuple);
    }
  }
  report.passed = report.min_value >= -tolerance;
  if (!report.passed) {
    report.witness = argmin;
    report.witness_value = argmin_raw;
  }
  return report;
}

bool check_with_offset(const DoubleKernel& kernel, double x0, const std::vector<double>& weights,
                       const OrderedTuple& grid, const std::vector<double>& t_eval, double tolerance) {
  if (!(x0 >= 0.0)) throw PreconditionViolated("x0 must be >= 0");
  if (weights.size() != grid.size()) throw std::invalid_argument("one weight per grid time");
  if (!grid.empty()) validate_tuple(grid, 1);
  const std::size_t K = grid.size();

  for (std::size_t k = 0; k < K; ++k) {
    double sum = x0;
    double scale = std::abs(x0);
    for (std::size_t kp = 0; kp <= k; ++kp) {
      const double term = weights[kp] * kernel.eval(grid[k], grid[kp]);
      sum += term;
      scale += std::abs(term);
    }
    if (sum < -tolerance * std::max(1.0, scale)) {
      throw PreconditionViolated("partial sum at grid point " + std::to_string(k) + " is " +
                                 std::to_string(sum));
    }
  }

  std::vector<double> times = t_eval;
  times.insert(times.end(), grid.begin(), grid.end());
  std::sort(times.begin(), times.end());
  for (std::size_t kp = 0; kp < K; ++kp) {
    double prev = std::numeric_limits<double>::infinity();
    for (double t : times) {
      if (t < grid[kp]) continue;
      const double v = kernel.eval(t, grid[kp]);
      if (v > prev * (1.0 + 1e-12) + 1e-300) {
        throw PreconditionViolated("kernel increases in its first argument after s = " +
                                   std::to_string(grid[kp]));
      }
      prev = v;
    }
  }

  for (double t : t_eval) {
    double sum = x0;
    double scale = std::abs(x0);
    for (std::size_t k = 0; k < K && grid[k] <= t; ++k) {
      const double term = weights[k] * kernel.eval(t, grid[k]);
      sum += term;
      scale += std::abs(term);
    }
    if (sum < -tolerance * std::max(1.0, scale)) return false;
  }
  return true;
}

}  // namespace sve
