#include "sve/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "sve/errors.hpp"

namespace sve::quad {

namespace {

// 8-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 4> kGlNodes = {0.1834346424956498, 0.5255324099163290,
                                            0.7966664774136267, 0.9602898564975363};
constexpr std::array<double, 4> kGlWeights = {0.3626837833783620, 0.3137066458778873,
                                              0.2223810344533745, 0.1012285362903763};

template <class F>
double gl8(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double acc = 0.0;
  for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
    acc += kGlWeights[i] * (f(c - h * kGlNodes[i]) + f(c + h * kGlNodes[i]));
  }
  return acc * h;
}

}  // namespace

double adaptive(const Integrand& f, double a, double b, double abs_tol) {
  if (a == b) return 0.0;
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, 15, 1e-12, &err);
  if (!std::isfinite(v) || err > abs_tol) {
    throw QuadratureError("adaptive quadrature did not reach tolerance on [" + std::to_string(a) +
                          ", " + std::to_string(b) + "]");
  }
  return v;
}

double endpoint_singular(const Integrand& f, double a, double b, double abs_tol) {
  if (a == b) return 0.0;
  boost::math::quadrature::tanh_sinh<double> integrator;
  double err = 0.0;
  double v = 0.0;
  try {
    v = integrator.integrate(f, a, b, 1e-12, &err);
  } catch (const std::exception& e) {
    throw QuadratureError(std::string("tanh-sinh failed: ") + e.what());
  }
  if (!std::isfinite(v) || err > abs_tol * std::max(1.0, std::abs(v))) {
    throw QuadratureError("tanh-sinh quadrature did not reach tolerance");
  }
  return v;
}

double composite(const Integrand& f, double a, double b, const std::vector<double>& breaks,
                 int n, bool singular_at_b) {
  if (!(b > a)) return 0.0;
  std::vector<double> pts{a};
  for (double x : breaks) {
    if (x > a && x < b) pts.push_back(x);
  }
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  const double len = b - a;
  const double panels_total = std::max(1.0, n / 8.0);
  double acc = 0.0;
  for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
    const double lo = pts[p];
    const double hi = pts[p + 1];
    const bool last = p + 2 == pts.size();
    int panels = static_cast<int>(std::ceil(panels_total * (hi - lo) / len));
    panels = std::max(panels, 1);
    if (last && singular_at_b) {
      panels = std::max(panels, static_cast<int>(panels_total / 2));
      const double L = hi - lo;
      auto g = [&](double w) {
        const double w3 = w * w * w;
        return f(hi - L * w3 * w) * 4.0 * L * w3;
      };
      for (int k = 0; k < panels; ++k) {
        acc += gl8(g, static_cast<double>(k) / panels, static_cast<double>(k + 1) / panels);
      }
    } else {
      const double h = (hi - lo) / panels;
      for (int k = 0; k < panels; ++k) {
        acc += gl8(f, lo + k * h, k + 1 == panels ? hi : lo + (k + 1) * h);
      }
    }
  }
  return acc;
}

double composite_refined(const Integrand& f, double a, double b,
                         const std::vector<double>& breaks, int n, bool singular_at_b,
                         double rel_tol) {
  const double coarse = composite(f, a, b, breaks, n, singular_at_b);
  const double fine = composite(f, a, b, breaks, 2 * n, singular_at_b);
  if (!std::isfinite(fine) ||
      std::abs(fine - coarse) > rel_tol * std::abs(fine) + 1e-13) {
    throw QuadratureError("composite quadrature refinement diverged on [" + std::to_string(a) +
                          ", " + std::to_string(b) + "]");
  }
  return fine;
}

}  // namespace sve::quad
