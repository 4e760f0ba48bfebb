#pragma once

#include <functional>
#include <vector>

namespace sve::quad {

using Integrand = std::function<double(double)>;

/// Adaptive Gauss-Kronrod (15 point) on [a, b]. Throws QuadratureError when
/// the error estimate stays above `abs_tol`.
double adaptive(const Integrand& f, double a, double b, double abs_tol = 1e-10);

/// Tanh-sinh on [a, b]; tolerates integrable singularities at either end.
double endpoint_singular(const Integrand& f, double a, double b, double abs_tol = 1e-10);

/// Composite Gauss-Legendre over the pieces delimited by `breaks` (sorted,
/// only those strictly inside (a, b) are used). Each piece gets enough 8-point
/// panels for roughly `n` nodes in total. With `singular_at_b` the last piece
/// uses the substitution u = b - (b - p) w^4.
double composite(const Integrand& f, double a, double b, const std::vector<double>& breaks,
                 int n, bool singular_at_b);

/// Runs `composite` at n and 2n and throws QuadratureError when the two
/// disagree by more than `rel_tol` relative (plus a tiny absolute floor).
double composite_refined(const Integrand& f, double a, double b,
                         const std::vector<double>& breaks, int n, bool singular_at_b,
                         double rel_tol = 1e-2);

}  // namespace sve::quad
