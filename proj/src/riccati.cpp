#include "sve/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sve/errors.hpp"

namespace sve {

namespace {

double sup_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

void check_params(const AffineParams& p) {
  const auto d = p.b0.size();
  if (d == 0 || p.B.rows() != d || p.B.cols() != d || p.sigmas.size() != d) {
    throw std::invalid_argument("affine parameters have inconsistent dimensions");
  }
}

Vec eval_f(const VectorFn& f, double s, Eigen::Index d) {
  Vec v = f(s);
  if (v.size() != d) throw std::invalid_argument("f has the wrong dimension");
  return v;
}

}  // namespace

RiccatiConfig RiccatiConfig::uniform(double T, int n_steps) {
  if (n_steps < 1) throw std::invalid_argument("grid needs at least one step");
  RiccatiConfig c;
  c.grid.resize(n_steps + 1);
  for (int i = 0; i <= n_steps; ++i) c.grid[i] = i == n_steps ? T : T * i / n_steps;
  return c;
}

void RiccatiConfig::validate(double T) const {
  if (grid.size() < 2) throw std::invalid_argument("grid needs at least two points");
  if (grid.front() != 0.0) throw std::invalid_argument("grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("grid must be strictly increasing");
  }
  if (std::abs(grid.back() - T) > 1e-12 * std::max(1.0, T)) throw std::invalid_argument("grid must end at T");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (max_picard_iters < 1) throw std::invalid_argument("max_picard_iters must be >= 1");
}

Vec riccati_rhs(const AffineParams& p, const Vec& f_s, const Vec& psi) {
  Vec out = f_s + p.B.transpose() * psi;
  out.array() += 0.5 * p.sigmas.array().square() * psi.array().square();
  return out;
}

std::vector<std::vector<double>> product_weights(const DoubleKernel& kernel,
                                                 const std::vector<double>& grid, WeightMode mode) {
  const std::size_t n = grid.size();
  std::vector<std::vector<double>> A(n);
  for (std::size_t i = 0; i < n; ++i) {
    A[i].assign(i + 1, 0.0);
    const double t = grid[i];
    for (std::size_t j = 0; j < i; ++j) {
      const CellMoments m = mode == WeightMode::closed_form ? kernel.moments(t, grid[j], grid[j + 1])
                                                            : kernel.DoubleKernel::moments(t, grid[j], grid[j + 1]);
      A[i][j] += m.m0 - m.m1;
      A[i][j + 1] += m.m1;
    }
  }
  return A;
}

RiccatiSolution solve_riccati(const KernelPtr& kernel, const AffineParams& params, const VectorFn& f,
                              double T, const RiccatiConfig& config) {
  if (!kernel) throw std::invalid_argument("solve_riccati needs a kernel");
  check_params(params);
  config.validate(T);
  const auto d = params.b0.size();
  const auto& u = config.grid;
  const std::size_t n = u.size();

  std::vector<Vec> fv(n);
  for (std::size_t i = 0; i < n; ++i) {
    fv[i] = eval_f(f, T - u[i], d);
    if ((fv[i].array() > 0.0).any()) throw PositiveF("f has a positive component at s = " + std::to_string(T - u[i]));
  }

  const KernelPtr rev = reverse_kernel(kernel, T);
  const auto A = product_weights(*rev, u, config.weight_mode);

  RiccatiSolution sol;
  sol.forward_times = u;
  sol.psi_forward.assign(n, Vec::Zero(d));
  std::vector<Vec> F(n);
  F[0] = riccati_rhs(params, fv[0], sol.psi_forward[0]);
  sol.iterations_used = 1;

  for (std::size_t i = 1; i < n; ++i) {
    Vec hist = Vec::Zero(d);
    for (std::size_t j = 0; j < i; ++j) hist.noalias() += A[i][j] * F[j];
    const double a = A[i][i];
    Vec x = sol.psi_forward[i - 1];
    double damping = 1.0;
    double last = INFINITY;
    int it = 0;
    bool done = false;
    while (it < config.max_picard_iters) {
      ++it;
      const Vec target = hist + a * riccati_rhs(params, fv[i], x);
      if (!target.allFinite()) throw NoConvergence("Riccati iterate is not finite at u = " + std::to_string(u[i]));
      const double delta = sup_norm(target - x);
      if (delta > last && damping == 1.0) damping = 0.5;
      x += damping * (target - x);
      last = delta;
      if (delta < config.tol) {
        done = true;
        break;
      }
    }
    if (!done) throw NoConvergence("Picard iteration did not converge at u = " + std::to_string(u[i]));
    sol.iterations_used = std::max(sol.iterations_used, it);
    sol.psi_forward[i] = x;
    F[i] = riccati_rhs(params, fv[i], x);
    sol.residual = std::max(sol.residual, sup_norm(x - hist - a * F[i]));
  }

  sol.times.resize(n);
  sol.psi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    sol.times[i] = T - u[n - 1 - i];
    sol.psi[i] = sol.psi_forward[n - 1 - i];
  }
  sol.times.front() = 0.0;
  return sol;
}

std::vector<Vec> solve_linear_volterra(const DoubleKernel& kernel, const Vec& v, const VectorFn& Fsrc,
                                       const MatrixFn& Gmat, double T, const RiccatiConfig& config) {
  config.validate(T);
  const auto d = v.size();
  const auto& t = config.grid;
  const std::size_t n = t.size();
  const auto A = product_weights(kernel, t, config.weight_mode);

  std::vector<Vec> chi(n);
  std::vector<Vec> rhs(n);
  const Mat I = Mat::Identity(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec Fi = eval_f(Fsrc, t[i], d);
    const Mat Gi = Gmat(t[i]);
    if (Gi.rows() != d || Gi.cols() != d) throw std::invalid_argument("G has the wrong shape");
    Vec b = v;
    for (std::size_t j = 0; j < i; ++j) b.noalias() += A[i][j] * rhs[j];
    b.noalias() += A[i][i] * Fi;
    const Mat M = I - A[i][i] * Gi;
    Eigen::FullPivLU<Mat> lu(M);
    if (!lu.isInvertible()) throw NoConvergence("linear Volterra step is singular at t = " + std::to_string(t[i]));
    chi[i] = lu.solve(b);
    if (!chi[i].allFinite()) throw NoConvergence("linear Volterra solution is not finite");
    rhs[i] = Fi + Gi * chi[i];
  }
  return chi;
}

Vec forward_curve_base(const DoubleKernel& kernel, const AffineParams& params, const Vec& x0, double s) {
  if (s <= 0.0) return x0;
  return x0 + params.b0 * kernel.integrate(s, 0.0, s);
}

double laplace_from_solution(const DoubleKernel& kernel, const AffineParams& params, const Vec& x0,
                             const VectorFn& f, const RiccatiSolution& solution) {
  const auto d = params.b0.size();
  if (x0.size() != d) throw std::invalid_argument("x0 has the wrong dimension");
  const auto& s = solution.times;
  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vec F = riccati_rhs(params, eval_f(f, s[i], d), solution.psi[i]);
    const double val = F.dot(forward_curve_base(kernel, params, x0, s[i]));
    if (i > 0) acc += 0.5 * (s[i] - s[i - 1]) * (prev + val);
    prev = val;
  }
  return std::exp(acc);
}

double laplace_transform(const KernelPtr& kernel, const AffineParams& params, const Vec& x0,
                         const VectorFn& f, double T, const RiccatiConfig& config) {
  const RiccatiSolution sol = solve_riccati(kernel, params, f, T, config);
  return laplace_from_solution(*kernel, params, x0, f, sol);
}

// ---------------------------------------------------------------------------
// Forward curve

ForwardCurve::ForwardCurve(KernelPtr kernel, AffineParams params, Vec x0, PathState path)
    : kernel_(std::move(kernel)), params_(std::move(params)), x0_(std::move(x0)), path_(std::move(path)) {
  check_params(params_);
  if (path_.increments.empty() || path_.increments.size() + 1 != path_.times.size()) {
    throw MissingIncrements("path has no stored increments");
  }
  dZ_.resize(path_.increments.size());
  for (std::size_t j = 0; j < dZ_.size(); ++j) {
    dZ_[j] = path_.increments[j] - params_.b0 * (path_.times[j + 1] - path_.times[j]);
  }
}

Vec ForwardCurve::base(double s) const { return forward_curve_base(*kernel_, params_, x0_, s); }

Vec ForwardCurve::operator()(double t, double s) const {
  if (s < t) throw DomainError("forward curve needs s >= t");
  const auto& times = path_.times;
  const auto k = static_cast<std::size_t>(
      std::upper_bound(times.begin(), times.end(), t * (1.0 + 1e-14) + 1e-300) - times.begin() - 1);
  Vec g = base(s);
  const bool sing = kernel_->singular_on_diagonal();
  for (std::size_t j = 1; j <= k && j < times.size(); ++j) {
    if (sing && s <= times[j]) continue;
    g.noalias() += kernel_->eval(s, times[j]) * dZ_[j - 1];
  }
  return g;
}

ForwardCurve forward_curve(const KernelPtr& kernel, const AffineParams& params, const Vec& x0,
                           const PathState& path) {
  return ForwardCurve(kernel, params, x0, path);
}

// ---------------------------------------------------------------------------
// Fractional Riccati

FractionalRiccatiResult fractional_riccati_check(double alpha, const TimeChange& h,
                                                 const AffineParams& params, const Vec& x0,
                                                 const VectorFn& f, double T, int n_steps,
                                                 int corrector_iterations) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  if (corrector_iterations < 1) throw std::invalid_argument("corrector_iterations must be >= 1");
  check_params(params);
  const auto d = params.b0.size();
  if (x0.size() != d) throw std::invalid_argument("x0 has the wrong dimension");

  const double U = h.H(T);
  if (!h.H_inverse(U)) throw UnsupportedTimeChange("no closed-form inverse for " + h.describe());

  FractionalRiccatiResult res;
  const double dy = U / n_steps;
  res.y.resize(n_steps + 1);
  for (int k = 0; k <= n_steps; ++k) res.y[k] = k == n_steps ? U : dy * k;

  // s(y) = T - xi(y) and 1 / h(s(y)).
  std::vector<double> s(n_steps + 1), inv_h(n_steps + 1);
  std::vector<Vec> fv(n_steps + 1);
  for (int k = 0; k <= n_steps; ++k) {
    const double sk = std::clamp(*h.H_inverse(U - res.y[k]), 0.0, T);
    s[k] = k == 0 ? T : (k == n_steps ? 0.0 : sk);
    const double hk = h.h(s[k]);
    inv_h[k] = std::isfinite(hk) ? 1.0 / hk : 0.0;
    fv[k] = eval_f(f, s[k], d);
    if ((fv[k].array() > 0.0).any()) throw PositiveF("f has a positive component");
  }
  auto Ft = [&](int k, const Vec& phi) { return Vec(riccati_rhs(params, fv[k], phi) * inv_h[k]); };

  const double g_a = std::tgamma(alpha);
  const double g_a2 = std::tgamma(alpha + 2.0);
  const double pred_scale = std::pow(dy, alpha) / (alpha * g_a);
  const double corr_scale = std::pow(dy, alpha) / g_a2;

  res.phi.assign(n_steps + 1, Vec::Zero(d));
  std::vector<Vec> F(n_steps + 1);
  F[0] = Ft(0, res.phi[0]);
  for (int k = 0; k < n_steps; ++k) {
    const double kk = k;
    Vec pred = Vec::Zero(d);
    Vec corr = Vec::Zero(d);
    for (int j = 0; j <= k; ++j) {
      const double m = kk - j;
      pred.noalias() += (std::pow(m + 1.0, alpha) - std::pow(m, alpha)) * F[j];
      double a;
      if (j == 0) {
        a = std::pow(kk, alpha + 1.0) - (kk - alpha) * std::pow(kk + 1.0, alpha);
      } else {
        a = std::pow(m + 2.0, alpha + 1.0) + std::pow(m, alpha + 1.0) - 2.0 * std::pow(m + 1.0, alpha + 1.0);
      }
      corr.noalias() += a * F[j];
    }
    Vec phi = pred_scale * pred;
    for (int c = 0; c < corrector_iterations; ++c) {
      phi = corr_scale * (Ft(k + 1, phi) + corr);
    }
    if (!phi.allFinite()) throw NoConvergence("fractional Riccati iterate is not finite");
    res.phi[k + 1] = phi;
    F[k + 1] = Ft(k + 1, phi);
  }

  // phi(T) = int_0^U phi^T b0 / h(s(y)) dy
  double varphi = 0.0;
  for (int k = 0; k < n_steps; ++k) {
    varphi += 0.5 * dy * (res.phi[k].dot(params.b0) * inv_h[k] + res.phi[k + 1].dot(params.b0) * inv_h[k + 1]);
  }

  // I^(1 - alpha) phi (U) with piecewise-linear phi.
  Vec frac = Vec::Zero(d);
  const double beta = 1.0 - alpha;
  if (beta == 0.0) {
    frac = res.phi.back();
  } else {
    const double gb1 = std::tgamma(beta + 1.0);
    const double gbq = std::tgamma(beta) * (beta + 1.0);
    auto P = [&](double x) { return std::pow(x, beta) / gb1; };
    auto Q = [&](double x) { return std::pow(x, beta + 1.0) / gbq; };
    for (int k = 0; k < n_steps; ++k) {
      const double hi = U - res.y[k];
      const double lo = U - res.y[k + 1];
      const double width = res.y[k + 1] - res.y[k];
      const double m0 = P(hi) - P(lo);
      const double m1 = (hi * m0 - (Q(hi) - Q(lo))) / width;
      frac.noalias() += (m0 - m1) * res.phi[k] + m1 * res.phi[k + 1];
    }
  }
  res.laplace_value = std::exp(varphi + x0.dot(frac));
  return res;
}

}  // namespace sve
