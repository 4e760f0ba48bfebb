#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sve/errors.hpp"
#include "sve/riccati.hpp"

using namespace sve;

namespace {

AffineParams scalar_params(double b0, double B, double sigma) {
  return {Vec::Constant(1, b0), Mat::Constant(1, 1, B), Vec::Constant(1, sigma)};
}

VectorFn constant_f(double u, int d = 1) {
  return [u, d](double) { return Vec::Constant(d, u); };
}

}  // namespace

TEST(Config, Validation) {
  RiccatiConfig c = RiccatiConfig::uniform(1.0, 10);
  EXPECT_NO_THROW(c.validate(1.0));
  EXPECT_THROW(c.validate(2.0), std::invalid_argument);
  c.grid[3] = c.grid[2];
  EXPECT_THROW(c.validate(1.0), std::invalid_argument);
  c = RiccatiConfig::uniform(1.0, 10);
  c.tol = 0.0;
  EXPECT_THROW(c.validate(1.0), std::invalid_argument);
}

TEST(Rhs, Formula) {
  const AffineParams p{Vec{{0.1, 0.2}}, Mat{{-1.0, 0.5}, {0.3, -2.0}}, Vec{{0.4, 0.6}}};
  const Vec r = riccati_rhs(p, Vec{{-1.0, -2.0}}, Vec{{-0.5, -0.25}});
  EXPECT_DOUBLE_EQ(r[0], -1.0 + (-1.0 * -0.5 + 0.3 * -0.25) + 0.08 * 0.25);
  EXPECT_DOUBLE_EQ(r[1], -2.0 + (0.5 * -0.5 + -2.0 * -0.25) + 0.18 * 0.0625);
}

TEST(Weights, RowsIntegrateKernel) {
  const auto k = fractional_kernel(0.75);
  const auto grid = RiccatiConfig::uniform(1.0, 20).grid;
  for (auto mode : {WeightMode::closed_form, WeightMode::adaptive_quadrature}) {
    const auto A = product_weights(*k, grid, mode);
    for (std::size_t i = 1; i < grid.size(); ++i) {
      double row = 0.0, lin = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        row += A[i][j];
        lin += A[i][j] * grid[j];
      }
      const double t = grid[i];
      EXPECT_NEAR(row, std::pow(t, 0.75) / oracle::gamma_fn(1.75), 1e-10);
      // int_0^t (t - s)^{-1/4} s ds / Gamma(3/4) = t^{7/4} / Gamma(11/4)
      EXPECT_NEAR(lin, std::pow(t, 1.75) / oracle::gamma_fn(2.75), 1e-10);
    }
  }
}

TEST(Solve, ZeroF) {
  const auto sol = solve_riccati(constant_kernel(1.0), scalar_params(0.3, -0.5, 0.4), constant_f(0.0), 1.0,
                                 RiccatiConfig::uniform(1.0, 50));
  for (const auto& v : sol.psi) EXPECT_EQ(v[0], 0.0);
  EXPECT_EQ(sol.iterations_used, 1);
  EXPECT_EQ(sol.residual, 0.0);
}

TEST(Solve, TanhClosedForm) {
  for (double b0 : {0.0, 0.7}) {
    const auto sol = solve_riccati(constant_kernel(1.0), scalar_params(b0, 0.0, 0.4), constant_f(-1.0), 1.0,
                                   RiccatiConfig::uniform(1.0, 1000));
    double err = 0.0;
    for (std::size_t i = 0; i < sol.forward_times.size(); ++i) {
      err = std::max(err, std::abs(sol.psi_forward[i][0] - oracle::tanh_riccati(-1.0, 0.4, sol.forward_times[i])));
    }
    EXPECT_LE(err, 1e-6);
    EXPECT_LE(sol.residual, 1e-10);
  }
}

TEST(Solve, BackwardForwardConsistency) {
  const auto sol = solve_riccati(fractional_kernel(0.75), scalar_params(0.3, -0.5, 0.4), constant_f(-1.0), 1.0,
                                 RiccatiConfig::uniform(1.0, 100));
  const std::size_t n = sol.times.size();
  EXPECT_EQ(sol.psi_forward[0][0], 0.0);
  EXPECT_EQ(sol.psi[n - 1][0], 0.0);
  EXPECT_EQ(sol.times[0], 0.0);
  EXPECT_EQ(sol.times[n - 1], 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(sol.psi[i][0], sol.psi_forward[n - 1 - i][0]);
    EXPECT_NEAR(sol.times[i], 1.0 - sol.forward_times[n - 1 - i], 1e-15);
  }
}

TEST(Solve, NonpositiveForRandomInstances) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto k = fractional_kernel(0.75);
  for (int trial = 0; trial < 10; ++trial) {
    AffineParams p{Vec(3), Mat(3, 3), Vec(3)};
    for (int i = 0; i < 3; ++i) {
      p.b0[i] = u(rng);
      p.sigmas[i] = 0.1 + u(rng);
      for (int j = 0; j < 3; ++j) p.B(i, j) = i == j ? -2.0 * u(rng) : u(rng);
    }
    const Vec c{{-u(rng), -u(rng), -2.0 * u(rng)}};
    const VectorFn f = [c](double s) { return Vec(c * (1.0 + 0.5 * std::sin(3.0 * s))); };
    const auto sol = solve_riccati(k, p, f, 1.0, RiccatiConfig::uniform(1.0, 100));
    for (const auto& v : sol.psi) EXPECT_LE(v.maxCoeff(), 1e-10);
  }
}

TEST(Solve, Errors) {
  EXPECT_THROW(solve_riccati(constant_kernel(1.0), scalar_params(0.3, -0.5, 0.4),
                             [](double s) { return Vec::Constant(1, s > 0.5 ? 0.1 : -1.0); }, 1.0,
                             RiccatiConfig::uniform(1.0, 10)),
               PositiveF);
  RiccatiConfig c = RiccatiConfig::uniform(1.0, 10);
  c.max_picard_iters = 1;
  EXPECT_THROW(solve_riccati(constant_kernel(1.0), scalar_params(0.3, -0.5, 0.4), constant_f(-1.0), 1.0, c),
               NoConvergence);
}

TEST(Solve, WeightModesAgree) {
  for (const auto& k : {fractional_kernel(0.75), exp_mixture_kernel({{1.0, 2.0}, {0.5, 0.1}})}) {
    RiccatiConfig a = RiccatiConfig::uniform(1.0, 100), b = a;
    b.weight_mode = WeightMode::adaptive_quadrature;
    const auto sa = solve_riccati(k, scalar_params(0.3, -0.5, 0.4), constant_f(-1.0), 1.0, a);
    const auto sb = solve_riccati(k, scalar_params(0.3, -0.5, 0.4), constant_f(-1.0), 1.0, b);
    for (std::size_t i = 0; i < sa.psi.size(); ++i) EXPECT_NEAR(sa.psi[i][0], sb.psi[i][0], 1e-9);
  }
}

TEST(Linear, Exponential) {
  for (double g : {-1.5, 0.8}) {
    const auto chi = solve_linear_volterra(*constant_kernel(1.0), Vec::Constant(1, 2.0),
                                           [](double) { return Vec::Zero(1); },
                                           [g](double) { return Mat::Constant(1, 1, g); }, 1.0,
                                           RiccatiConfig::uniform(1.0, 1000));
    const auto grid = RiccatiConfig::uniform(1.0, 1000).grid;
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(chi[i][0], 2.0 * std::exp(g * grid[i]), 1e-6);
  }
}

TEST(Linear, Zero) {
  const auto chi = solve_linear_volterra(*fractional_kernel(0.6), Vec::Zero(2), [](double) { return Vec::Zero(2); },
                                         [](double) { return Mat::Identity(2, 2); }, 1.0,
                                         RiccatiConfig::uniform(1.0, 50));
  for (const auto& v : chi) EXPECT_EQ(v.norm(), 0.0);
}

TEST(Linear, FractionalIntegralOfConstant) {
  const auto grid = RiccatiConfig::uniform(1.0, 200).grid;
  const auto chi = solve_linear_volterra(*fractional_kernel(0.75), Vec::Zero(1), [](double) { return Vec::Ones(1); },
                                         [](double) { return Mat::Zero(1, 1); }, 1.0,
                                         RiccatiConfig::uniform(1.0, 200));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(chi[i][0], std::pow(grid[i], 0.75) / oracle::gamma_fn(1.75), 1e-4);
  }
}

TEST(Linear, NonnegativeForCooperativeSystems) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto k = fractional_kernel(0.75);
  for (int trial = 0; trial < 10; ++trial) {
    Vec v(3), F(3);
    Mat G(3, 3);
    for (int i = 0; i < 3; ++i) {
      v[i] = trial % 2 ? u(rng) : 0.0;
      F[i] = u(rng);
      for (int j = 0; j < 3; ++j) G(i, j) = i == j ? -5.0 * u(rng) : u(rng);
    }
    const auto chi = solve_linear_volterra(*k, v, [F](double s) { return Vec(F * s); },
                                           [G](double) { return G; }, 1.0, RiccatiConfig::uniform(1.0, 100));
    for (const auto& c : chi) EXPECT_GE(c.minCoeff(), -1e-10);
  }
}

TEST(Comparison, LinearLowerBound) {
  const auto k = fractional_kernel(0.75);
  const AffineParams p{Vec{{0.2, 0.1}}, Mat{{-1.0, 0.4}, {0.2, -0.5}}, Vec{{0.5, 0.3}}};
  const Vec c{{-1.0, -0.6}};
  const VectorFn f = [c](double s) { return Vec(c * (1.0 + s)); };
  const auto cfg = RiccatiConfig::uniform(1.0, 200);
  const auto sol = solve_riccati(k, p, f, 1.0, cfg);
  const auto kr = reverse_kernel(k, 1.0);
  const auto ell = solve_linear_volterra(*kr, Vec::Zero(2), [&](double u) { return f(1.0 - u); },
                                         [&](double) { return Mat(p.B.transpose()); }, 1.0, cfg);
  for (std::size_t i = 0; i < ell.size(); ++i) {
    for (int c2 = 0; c2 < 2; ++c2) {
      EXPECT_GE(sol.psi_forward[i][c2], ell[i][c2] - 1e-8);
      EXPECT_LE(sol.psi_forward[i][c2], 1e-10);
    }
  }
}

TEST(Laplace, ZeroFIsOne) {
  EXPECT_EQ(laplace_transform(fractional_kernel(0.75), scalar_params(0.3, -0.5, 0.4), Vec::Constant(1, 0.3),
                              constant_f(0.0), 1.0, RiccatiConfig::uniform(1.0, 50)),
            1.0);
}

TEST(Laplace, ZeroStartAndDrift) {
  EXPECT_EQ(laplace_transform(fractional_kernel(0.75), scalar_params(0.0, -0.5, 0.4), Vec::Zero(1),
                              constant_f(-2.0), 1.0, RiccatiConfig::uniform(1.0, 50)),
            1.0);
}

TEST(Laplace, ClassicalCir) {
  for (double u : {-1.0, -3.0}) {
    const double got = laplace_transform(constant_kernel(1.0), scalar_params(0.3, -0.5, 0.4), Vec::Constant(1, 0.3),
                                         constant_f(u), 1.0, RiccatiConfig::uniform(1.0, 1000));
    const double want = oracle::cir_laplace(0.3, 0.5, 0.4, 0.3, u, 1.0);
    EXPECT_NEAR(got / want, 1.0, 1e-4) << u;
  }
}

TEST(Laplace, InUnitInterval) {
  const double v = laplace_transform(fractional_kernel(0.75), scalar_params(0.3, -0.5, 0.4), Vec::Constant(1, 0.3),
                                     constant_f(-1.0), 1.0, RiccatiConfig::uniform(1.0, 200));
  EXPECT_GT(v, 0.0);
  EXPECT_LT(v, 1.0);
}

TEST(Laplace, GridRefinement) {
  std::vector<double> vals;
  for (int n : {50, 100, 200, 400, 800}) {
    vals.push_back(laplace_transform(fractional_kernel(0.75), scalar_params(0.3, -0.5, 0.4), Vec::Constant(1, 0.3),
                                     constant_f(-1.0), 1.0, RiccatiConfig::uniform(1.0, n)));
  }
  for (std::size_t i = 2; i < vals.size(); ++i) {
    EXPECT_LT(std::abs(vals[i] - vals[i - 1]), 4.0 * std::abs(vals[i - 1] - vals[i - 2]));
  }
}

TEST(ForwardCurveTest, StartIsBase) {
  const auto k = fractional_kernel(0.75);
  const auto p = scalar_params(0.3, -0.5, 0.4);
  SchemeConfig c;
  c.n_steps = 20;
  c.variant = Variant::check;
  NormalStream rng(1, 0);
  const auto path = simulate_check(*k, *cir_model(0.3, 0.5, 0.4), Vec::Constant(1, 0.3), c, rng);
  const auto g = forward_curve(k, p, Vec::Constant(1, 0.3), path);
  for (double s : {0.0, 0.3, 1.0}) EXPECT_EQ(g(0.0, s)[0], g.base(s)[0]);
  // g_0(s) = x0 + b0 s^a / Gamma(1 + a)
  EXPECT_NEAR(g.base(0.5)[0], 0.3 + 0.3 * std::pow(0.5, 0.75) / oracle::gamma_fn(1.75), 1e-10);
}

TEST(ForwardCurveTest, NoNoiseNoDriftMatrix) {
  const auto k = fractional_kernel(0.75);
  const AffineParams p{Vec::Constant(1, 0.3), Mat::Zero(1, 1), Vec::Constant(1, 0.4)};
  const ConstantModel model(Vec::Constant(1, 0.3), Mat::Zero(1, 1));
  SchemeConfig c;
  c.n_steps = 40;
  c.variant = Variant::check;
  NormalStream rng(1, 0);
  const auto path = simulate_check(*k, model, Vec::Constant(1, 0.3), c, rng);
  const auto g = forward_curve(k, p, Vec::Constant(1, 0.3), path);
  for (double t : {0.25, 0.5, 0.9}) {
    for (double s : {t, 0.95, 1.0}) EXPECT_NEAR(g(t, s)[0], g.base(s)[0], 1e-14);
  }
}

TEST(ForwardCurveTest, UnitKernelMatchesPath) {
  const auto k = constant_kernel(1.0);
  const auto p = scalar_params(0.0, -0.5, 0.4);
  SchemeConfig c;
  c.n_steps = 50;
  NormalStream rng(3, 1);
  const auto path = simulate_hat(*k, *cir_model(0.0, 0.5, 0.4), ConvexDomain::orthant(1), Vec::Constant(1, 0.3), c,
                                 rng);
  const auto g = forward_curve(k, p, Vec::Constant(1, 0.3), path);
  for (int kk = 0; kk <= 50; ++kk) {
    const double t = path.times[kk];
    for (double s : {t, 0.5 * (t + 1.0), 1.0}) EXPECT_NEAR(g(t, s)[0], path.grid_values[kk][0], 1e-12);
  }
}

TEST(ForwardCurveTest, Errors) {
  PathState empty;
  empty.times = {0.0, 1.0};
  empty.grid_values = {Vec::Zero(1), Vec::Zero(1)};
  EXPECT_THROW(forward_curve(constant_kernel(1.0), scalar_params(0.0, 0.0, 1.0), Vec::Zero(1), empty),
               MissingIncrements);
}

TEST(Fractional, ZeroF) {
  const auto r = fractional_riccati_check(0.75, TimeChange::identity(), scalar_params(0.3, -0.5, 0.4),
                                          Vec::Constant(1, 0.3), constant_f(0.0), 1.0, 100);
  EXPECT_EQ(r.laplace_value, 1.0);
  for (const auto& v : r.phi) EXPECT_EQ(v[0], 0.0);
}

TEST(Fractional, OrderOneIsClassical) {
  const auto p = scalar_params(0.3, -0.5, 0.4);
  const auto r = fractional_riccati_check(1.0, TimeChange::identity(), p, Vec::Constant(1, 0.3), constant_f(-1.0),
                                          1.0, 2000);
  const auto sol = solve_riccati(constant_kernel(1.0), p, constant_f(-1.0), 1.0, RiccatiConfig::uniform(1.0, 2000));
  const double lt = laplace_from_solution(*constant_kernel(1.0), p, Vec::Constant(1, 0.3), constant_f(-1.0), sol);
  EXPECT_NEAR(r.laplace_value, lt, 1e-6);
  EXPECT_NEAR(r.laplace_value, oracle::cir_laplace(0.3, 0.5, 0.4, 0.3, -1.0, 1.0), 1e-6);
}

TEST(Fractional, MatchesProductIntegration) {
  const auto p = scalar_params(0.3, -0.5, 0.4);
  for (double a : {0.75, 0.9}) {
    const auto r = fractional_riccati_check(a, TimeChange::identity(), p, Vec::Constant(1, 0.3), constant_f(-1.0),
                                            1.0, 2000);
    const double lt = laplace_transform(fractional_kernel(a), p, Vec::Constant(1, 0.3), constant_f(-1.0), 1.0,
                                        RiccatiConfig::uniform(1.0, 1000));
    EXPECT_NEAR(r.laplace_value / lt, 1.0, 1e-3) << a;
  }
}

TEST(Fractional, ExponentialTimeChange) {
  const auto p = scalar_params(0.3, -0.5, 0.4);
  const auto r = fractional_riccati_check(0.75, TimeChange::exponential(), p, Vec::Constant(1, 0.3),
                                          constant_f(-1.0), 1.0, 2000);
  const double lt = laplace_transform(fractional_kernel(0.75, TimeChange::exponential()), p, Vec::Constant(1, 0.3),
                                      constant_f(-1.0), 1.0, RiccatiConfig::uniform(1.0, 1000));
  EXPECT_NEAR(r.laplace_value / lt, 1.0, 1e-3);
}

TEST(Fractional, UnsupportedTimeChange) {
  EXPECT_THROW(fractional_riccati_check(0.75, TimeChange::affine_power(1.0, 1.0), scalar_params(0.3, -0.5, 0.4),
                                        Vec::Constant(1, 0.3), constant_f(-1.0), 1.0, 10),
               UnsupportedTimeChange);
}
