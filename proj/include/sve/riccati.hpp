#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sve/domains.hpp"
#include "sve/kernels.hpp"
#include "sve/scheme.hpp"

namespace sve {

using VectorFn = std::function<Vec(double)>;
using MatrixFn = std::function<Mat(double)>;

enum class WeightMode { closed_form, adaptive_quadrature };

struct RiccatiConfig {
  /// 0 = u_0 < ... < u_n = T.
  std::vector<double> grid;
  int max_picard_iters = 200;
  double tol = 1e-10;
  WeightMode weight_mode = WeightMode::closed_form;

  static RiccatiConfig uniform(double T, int n_steps);
  void validate(double T) const;
};

struct RiccatiSolution {
  /// Backward times t_i = T - u_{n-i}, increasing.
  std::vector<double> times;
  /// psi(t_i)
  std::vector<Vec> psi;
  /// Forward grid u_i and psi~(u_i).
  std::vector<double> forward_times;
  std::vector<Vec> psi_forward;
  int iterations_used = 0;
  double residual = 0.0;
  std::optional<double> laplace_value;
};

/// F_i(s, psi) = f_i(s) + (B^T psi)_i + sigma_i^2 / 2 psi_i^2
Vec riccati_rhs(const AffineParams& params, const Vec& f_s, const Vec& psi);

/// Product-integration weights of u -> kernel(u_i, .) against continuous
/// piecewise-linear functions on the grid: row i holds A_i0..A_ii.
std::vector<std::vector<double>> product_weights(const DoubleKernel& kernel,
                                                 const std::vector<double>& grid, WeightMode mode);

RiccatiSolution solve_riccati(const KernelPtr& kernel, const AffineParams& params, const VectorFn& f,
                              double T, const RiccatiConfig& config);

/// chi(t) = v + int_0^t kernel(t, s) (F(s) + G(s) chi(s)) ds on config.grid.
std::vector<Vec> solve_linear_volterra(const DoubleKernel& kernel, const Vec& v, const VectorFn& Fsrc,
                                       const MatrixFn& Gmat, double T, const RiccatiConfig& config);

/// g_0(s) = x0 + b0 int_0^s kernel(s, r) dr.
Vec forward_curve_base(const DoubleKernel& kernel, const AffineParams& params, const Vec& x0, double s);

/// exp(int_0^T F(s, psi(s))^T g_0(s) ds) from an existing solution.
double laplace_from_solution(const DoubleKernel& kernel, const AffineParams& params, const Vec& x0,
                             const VectorFn& f, const RiccatiSolution& solution);

double laplace_transform(const KernelPtr& kernel, const AffineParams& params, const Vec& x0,
                         const VectorFn& f, double T, const RiccatiConfig& config);

/// g_t(s) = g_0(s) + sum_{t_j <= t} kernel(s, t_j) dZ_j with dZ_j = increment_j - b0 dt.
class ForwardCurve {
 public:
  ForwardCurve(KernelPtr kernel, AffineParams params, Vec x0, PathState path);

  Vec base(double s) const;
  /// g_t(s) for s >= t; t is rounded down to the scheme grid.
  Vec operator()(double t, double s) const;

 private:
  KernelPtr kernel_;
  AffineParams params_;
  Vec x0_;
  PathState path_;
  std::vector<Vec> dZ_;
};

ForwardCurve forward_curve(const KernelPtr& kernel, const AffineParams& params, const Vec& x0,
                           const PathState& path);

struct FractionalRiccatiResult {
  /// Grid on [0, int_0^T h].
  std::vector<double> y;
  std::vector<Vec> phi;
  double laplace_value = 1.0;
};

/// Adams-Bashforth-Moulton solve of D^alpha phi = F~(T - xi, phi) and the
/// associated transform. Throws UnsupportedTimeChange when xi has no closed form.
FractionalRiccatiResult fractional_riccati_check(double alpha, const TimeChange& h,
                                                 const AffineParams& params, const Vec& x0,
                                                 const VectorFn& f, double T, int n_steps,
                                                 int corrector_iterations = 1);

}  // namespace sve
