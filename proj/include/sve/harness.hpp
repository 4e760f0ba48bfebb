#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sve/domains.hpp"
#include "sve/kernels.hpp"
#include "sve/riccati.hpp"
#include "sve/scheme.hpp"

namespace sve {

struct McEstimate {
  double estimate = 1.0;
  double std_error = 0.0;
};

/// Trapezoid of int_0^T f(s)^T X_s ds over the grid values of one path.
double path_exponent(const std::vector<double>& grid, const double* values, int dim,
                     const std::vector<Vec>& f_on_grid);

/// Mean of exp(int f^T X ds) over paths; std_error = sample sd / sqrt(n).
McEstimate mc_laplace(const PathEnsemble& ensemble, const VectorFn& f);
McEstimate mean_and_stderr(const std::vector<double>& samples);

struct ValidationBundle {
  KernelPtr kernel;
  AffineParams params;
  Vec x0;
  VectorFn f;
  SchemeConfig scheme;
  RiccatiConfig riccati;
  std::size_t n_paths = 100000;
  int threads = 1;
  /// Kernels outside the completely monotone families are screened with
  /// check_preserves_nonnegativity at these settings.
  int positivity_max_order = 4;
  int positivity_samples = 200;
  int boundary_samples = 64;
};

struct ValidationReport {
  double mc_estimate = 0.0;
  double mc_stderr = 0.0;
  double riccati_value = 0.0;
  double z_score = 0.0;
  std::size_t invariance_violations = 0;
  double min_value = 0.0;
  double runtime_ms = 0.0;
  std::size_t n_paths = 0;
  Variant variant = Variant::hat;
  int riccati_iterations = 0;
  double riccati_residual = 0.0;

  bool passed(double z_max = 3.0) const { return std::abs(z_score) <= z_max && invariance_violations == 0; }
};

/// Kernels whose nonnegativity preservation holds by construction.
bool certified_completely_monotone(const DoubleKernel& kernel);

/// Throws PreconditionViolated when the sign conditions, the boundary
/// conditions or the kernel screen fail. Singular kernels use the check variant.
ValidationReport validate_affine(const ValidationBundle& bundle);

// ---------------------------------------------------------------------------
// Output

/// Shortest decimal string that parses back to the same double.
std::string format_double(double x);

/// path_id,t,component_index,value
void write_ensemble_csv(std::ostream& out, const PathEnsemble& ensemble);
/// t,component,psi on the backward grid.
void write_riccati_csv(std::ostream& out, const RiccatiSolution& solution);

}  // namespace sve
