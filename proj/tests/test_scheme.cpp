#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "sve/errors.hpp"
#include "sve/positivity.hpp"
#include "sve/scheme.hpp"

using namespace sve;

namespace {

SchemeConfig make_config(int N, Variant v, int m = 1, std::uint64_t seed = 7) {
  SchemeConfig c;
  c.n_steps = N;
  c.horizon = 1.0;
  c.inner_substeps = m;
  c.variant = v;
  c.seed = seed;
  return c;
}

const ConstantModel unit_drift(Vec::Constant(1, 1.0), Mat::Zero(1, 1));

}  // namespace

TEST(Config, Validation) {
  SchemeConfig c;
  c.n_steps = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SchemeConfig{};
  c.inner_substeps = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = SchemeConfig{};
  c.horizon = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(parse_variant("check"), Variant::check);
  EXPECT_EQ(parse_domain_mode("off"), DomainMode::off);
  EXPECT_THROW(parse_variant("tilde"), std::invalid_argument);
}

TEST(Hat, ConstantDriftIsExactOnDyadicGrid) {
  const auto k = constant_kernel(1.0);
  NormalStream rng(1, 0);
  const auto p = simulate_hat(*k, unit_drift, ConvexDomain::orthant(1), Vec::Zero(1),
                              make_config(8, Variant::hat, 4), rng);
  for (int i = 0; i <= 8; ++i) EXPECT_EQ(p.grid_values[i][0], i / 8.0);
}

TEST(Hat, ConstantDriftGeneralGrid) {
  const auto k = constant_kernel(1.0);
  for (int N : {3, 7, 50}) {
    for (int m : {1, 3}) {
      NormalStream rng(1, 0);
      const auto p = simulate_hat(*k, unit_drift, ConvexDomain::orthant(1), Vec::Zero(1),
                                  make_config(N, Variant::hat, m), rng);
      for (int i = 0; i <= N; ++i) EXPECT_NEAR(p.grid_values[i][0], p.times[i], 1e-13);
    }
  }
}

TEST(Check, ConstantDriftGeneralGrid) {
  const auto k = constant_kernel(1.0);
  NormalStream rng(1, 0);
  const auto p = simulate_check(*k, unit_drift, Vec::Zero(1), make_config(13, Variant::check, 2), rng);
  for (int i = 0; i <= 13; ++i) EXPECT_NEAR(p.grid_values[i][0], p.times[i], 1e-13);
}

TEST(Agreement, HatEqualsCheckAtUnitKernel) {
  const auto k = constant_kernel(1.0);
  const auto cir = cir_model(0.3, 0.5, 0.4);
  const AffineSqrtModel two(Vec{{0.1, 0.2}}, Mat{{-1.0, 0.5}, {0.3, -2.0}}, Vec{{0.4, 0.6}});
  const ConvexDomain o1 = ConvexDomain::orthant(1), o2 = ConvexDomain::orthant(2);
  for (std::uint64_t path = 0; path < 20; ++path) {
    for (int m : {1, 4}) {
      for (const auto* model : {static_cast<const CoefficientModel*>(cir.get()),
                                static_cast<const CoefficientModel*>(&two)}) {
        const int d = model->dimension();
        const ConvexDomain& dom = d == 1 ? o1 : o2;
        const Vec x0 = Vec::Constant(d, 0.05);
        NormalStream r1(3, path), r2(3, path);
        const auto ph = simulate_hat(*k, *model, dom, x0, make_config(40, Variant::hat, m), r1);
        const auto pc = simulate_check(*k, *model, x0, make_config(40, Variant::check, m), r2, &dom);
        for (int i = 0; i <= 40; ++i) {
          for (int c = 0; c < d; ++c) EXPECT_EQ(ph.grid_values[i][c], pc.grid_values[i][c]);
        }
      }
    }
  }
}

TEST(Hat, SmoothedKernelVanishesAtHorizonDiagonal) {
  const auto k = smooth_kernel(fractional_kernel(0.75), 8, 1.0);
  EXPECT_EQ(k->diagonal(1.0), 0.0);
  NormalStream rng(1, 0);
  EXPECT_THROW(simulate_hat(*k, unit_drift, ConvexDomain::orthant(1), Vec::Zero(1), make_config(400, Variant::hat),
                            rng),
               SingularDiagonal);
}

TEST(Check, SmoothedFractionalDeterministicIntegral) {
  // int_0^1 of the smoothed kernel is (1 - 1 / (M + 2)) / Gamma(1.75).
  const auto k = smooth_kernel(fractional_kernel(0.75), 8, 1.0);
  NormalStream rng(1, 0);
  const auto p = simulate_check(*k, unit_drift, Vec::Zero(1), make_config(400, Variant::check), rng);
  EXPECT_NEAR(p.grid_values.back()[0], 0.9 / oracle::gamma_fn(1.75), 2e-2);
  const auto kc = fractional_cm_mixture(0.75, 20);
  NormalStream rng2(1, 0);
  SchemeConfig c = make_config(400, Variant::hat);
  const auto ph = simulate_hat(*kc, unit_drift, ConvexDomain::orthant(1), Vec::Zero(1), c, rng2);
  EXPECT_NEAR(ph.grid_values.back()[0], 1.0 / oracle::gamma_fn(1.75), 2e-2);
}

TEST(Check, FractionalDeterministicIntegral) {
  const auto k = fractional_kernel(0.75);
  SchemeConfig c = make_config(400, Variant::check);
  c.check_weights = CheckWeights::cell_average;
  NormalStream rng(1, 0);
  const auto p = simulate_check(*k, unit_drift, Vec::Zero(1), c, rng);
  for (int i : {100, 250, 400}) {
    const double t = p.times[i];
    EXPECT_NEAR(p.grid_values[i][0], std::pow(t, 0.75) / oracle::gamma_fn(1.75), 1e-10);
  }
}

TEST(Check, SingularKernelRuns) {
  const auto k = fractional_kernel(0.75);
  NormalStream rng(2, 0);
  PathState p;
  EXPECT_NO_THROW(p = simulate_check(*k, *cir_model(0.3, 0.5, 0.4), Vec::Constant(1, 0.3),
                                     make_config(100, Variant::check), rng));
  for (const auto& v : p.grid_values) EXPECT_TRUE(std::isfinite(v[0]));
}

TEST(Hat, SingularKernelRejected) {
  NormalStream rng(2, 0);
  EXPECT_THROW(simulate_hat(*fractional_kernel(0.75), *cir_model(0.3, 0.5, 0.4), ConvexDomain::orthant(1),
                            Vec::Constant(1, 0.3), make_config(10, Variant::hat), rng),
               SingularDiagonal);
}

TEST(Hat, StartOutsideDomain) {
  NormalStream rng(2, 0);
  EXPECT_THROW(simulate_hat(*constant_kernel(1.0), *cir_model(0.3, 0.5, 0.4), ConvexDomain::orthant(1),
                            Vec::Constant(1, -0.1), make_config(10, Variant::hat), rng),
               DomainViolation);
  EXPECT_THROW(simulate_ensemble(*constant_kernel(1.0), *cir_model(0.3, 0.5, 0.4), ConvexDomain::orthant(1),
                                 Vec::Constant(1, -0.1), make_config(10, Variant::hat), 4),
               DomainViolation);
}

TEST(Hat, HorizonBeyondKernel) {
  const auto k = fractional_kernel(0.75, TimeChange::identity(), 0.5);
  EXPECT_THROW(SchemeTables(*k, make_config(10, Variant::check)), DomainError);
}

TEST(Reconstruction, MatchesGridAndLeftLimits) {
  const auto k = offset_kernel(smooth_kernel(fractional_kernel(0.75), 6, 1.0), 0.125);
  const auto model = cir_model(0.3, 0.5, 0.4);
  NormalStream rng(5, 3);
  const auto p = simulate_hat(*k, *model, ConvexDomain::orthant(1), Vec::Constant(1, 0.3),
                              make_config(60, Variant::hat, 2), rng);
  for (int kk = 0; kk <= 60; ++kk) {
    EXPECT_NEAR(reconstruct(*k, p, p.times[kk])[0], p.grid_values[kk][0], 1e-12);
  }
  for (int kk = 0; kk < 60; ++kk) {
    double left = 0.3;
    for (int j = 1; j <= kk; ++j) left += p.increments[j - 1][0] * k->eval(p.times[kk + 1], p.times[j]);
    EXPECT_NEAR(p.left_limits[kk + 1][0], left, 1e-12);
  }
}

TEST(Reconstruction, NeedsIncrements) {
  PathState p;
  p.times = {0.0, 1.0};
  p.grid_values = {Vec::Zero(1), Vec::Zero(1)};
  EXPECT_THROW(reconstruct(*constant_kernel(1.0), p, 0.5), MissingIncrements);
}

TEST(Invariance, EnforcedOrthantIncludingInterGridValues) {
  const auto k = fractional_cm_mixture(0.75, 20);
  ASSERT_TRUE(check_preserves_nonnegativity(*k, 1.0, 4, 200, 1).passed);
  const auto model = cir_model(0.3, 0.5, 0.4);
  const auto ens = simulate_ensemble(*k, *model, ConvexDomain::orthant(1), Vec::Constant(1, 0.02),
                                     make_config(40, Variant::hat), 100, 1, true);
  double worst = 0.0;
  for (std::size_t p = 0; p < ens.n_paths; ++p) {
    const auto st = ens.path_state(p);
    for (const auto& v : st.grid_values) worst = std::min(worst, v[0]);
    for (int kk = 0; kk < 40; ++kk) {
      for (int q = 1; q < 10; ++q) {
        const double t = st.times[kk] + q * (st.times[kk + 1] - st.times[kk]) / 10.0;
        worst = std::min(worst, reconstruct(*k, st, t)[0]);
      }
    }
  }
  EXPECT_GE(worst, -1e-12);
}

TEST(Invariance, EnforcedGridValuesWithSmoothedKernel) {
  const auto k = offset_kernel(smooth_kernel(fractional_kernel(0.75), 8, 1.0), 0.125);
  const auto ens = simulate_ensemble(*k, *cir_model(0.3, 0.5, 0.4), ConvexDomain::orthant(1),
                                     Vec::Constant(1, 0.02), make_config(50, Variant::hat), 200);
  EXPECT_GE(*std::min_element(ens.values.begin(), ens.values.end()), -1e-12);
}

TEST(Invariance, OffModeCanLeaveDomain) {
  const auto model = cir_model(0.0, 3.0, 2.0);
  SchemeConfig c = make_config(20, Variant::hat);
  c.domain_mode = DomainMode::off;
  const auto ens =
      simulate_ensemble(*constant_kernel(1.0), *model, ConvexDomain::orthant(1), Vec::Constant(1, 0.01), c, 200);
  EXPECT_LT(*std::min_element(ens.values.begin(), ens.values.end()), 0.0);
}

TEST(Invariance, PsdConeWishart) {
  const WishartModel w(2.0 * Mat::Identity(2, 2), -0.5 * Mat::Identity(2, 2), 0.5 * Mat::Identity(2, 2));
  const ConvexDomain dom = ConvexDomain::psd_cone(2);
  const Vec x0{{0.2, 0.0, 0.0, 0.1}};
  const auto ens = simulate_ensemble(*constant_kernel(1.0), w, dom, x0, make_config(50, Variant::hat, 2), 50);
  for (std::size_t p = 0; p < ens.n_paths; ++p) {
    for (std::size_t kk = 0; kk < ens.n_times(); ++kk) {
      Vec x(4);
      for (int i = 0; i < 4; ++i) x[i] = ens.value(p, kk, i);
      EXPECT_TRUE(dom.contains(x, 1e-12));
    }
  }
}

TEST(Ensemble, DeterministicAcrossThreads) {
  const auto k = fractional_kernel(0.75);
  const auto model = cir_model(0.3, 0.5, 0.4);
  SchemeConfig c = make_config(30, Variant::check, 2, 99);
  const auto a = simulate_ensemble(*k, *model, ConvexDomain::orthant(1), Vec::Constant(1, 0.3), c, 37, 1);
  const auto b = simulate_ensemble(*k, *model, ConvexDomain::orthant(1), Vec::Constant(1, 0.3), c, 37, 4);
  const auto again = simulate_ensemble(*k, *model, ConvexDomain::orthant(1), Vec::Constant(1, 0.3), c, 37, 1);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.values, again.values);
  c.seed = 100;
  const auto other = simulate_ensemble(*k, *model, ConvexDomain::orthant(1), Vec::Constant(1, 0.3), c, 37, 1);
  EXPECT_NE(a.values, other.values);
}

TEST(Ensemble, PathMatchesSingleSimulation) {
  const auto k = constant_kernel(1.0);
  const auto model = cir_model(0.3, 0.5, 0.4);
  const SchemeConfig c = make_config(25, Variant::hat, 1, 4);
  const auto ens = simulate_ensemble(*k, *model, ConvexDomain::orthant(1), Vec::Constant(1, 0.3), c, 5, 1, true);
  NormalStream rng(4, 3);
  const auto p = simulate_hat(*k, *model, ConvexDomain::orthant(1), Vec::Constant(1, 0.3), c, rng);
  const auto st = ens.path_state(3);
  for (int i = 0; i <= 25; ++i) EXPECT_EQ(st.grid_values[i][0], p.grid_values[i][0]);
  for (int i = 0; i < 25; ++i) EXPECT_EQ(st.increments[i][0], p.increments[i][0]);
  EXPECT_THROW(ens.path_state(5), std::out_of_range);
}

TEST(Ensemble, InnerPathKept) {
  SchemeConfig c = make_config(5, Variant::hat, 3);
  c.keep_inner_path = true;
  NormalStream rng(1, 0);
  const auto p = simulate_hat(*constant_kernel(1.0), unit_drift, ConvexDomain::orthant(1), Vec::Zero(1), c, rng);
  ASSERT_EQ(p.inner_path.size(), 15u);
  EXPECT_NEAR(p.inner_path.back()[0], 1.0, 1e-14);
  EXPECT_NEAR(p.inner_path[4][0], 5.0 / 15.0, 1e-14);
}

TEST(Holder, Errors) {
  const auto ens = simulate_ensemble(*constant_kernel(1.0), unit_drift, ConvexDomain::orthant(1), Vec::Zero(1),
                                     make_config(10, Variant::hat), 50);
  EXPECT_TRUE(holder_estimate(ens, {}).empty());
  EXPECT_THROW(holder_estimate(ens, {0.5}), InsufficientPaths);
}

TEST(Holder, LipschitzPathIsStable) {
  for (int N : {50, 200}) {
    const auto ens = simulate_ensemble(*constant_kernel(1.0), unit_drift, ConvexDomain::orthant(1), Vec::Zero(1),
                                       make_config(N, Variant::hat), 100);
    const auto h = holder_estimate(ens, {0.5, 1.0});
    EXPECT_NEAR(h[1].q50, 1.0, 1e-9);
    EXPECT_NEAR(h[1].q95, 1.0, 1e-9);
    EXPECT_NEAR(h[0].q50, 1.0, 1e-9);
  }
}

TEST(Holder, BrownianGrowthAndStability) {
  const ConstantModel bm(Vec::Zero(1), Mat::Identity(1, 1));
  std::vector<std::vector<HolderStatistic>> stats;
  for (int N : {100, 400}) {
    SchemeConfig c = make_config(N, Variant::hat, 1, 21);
    c.domain_mode = DomainMode::off;
    const auto ens = simulate_ensemble(*constant_kernel(1.0), bm, ConvexDomain::unit_ball(1), Vec::Zero(1), c, 1000);
    stats.push_back(holder_estimate(ens, {0.4, 0.6}));
  }
  EXPECT_LT(stats[1][0].q50 / stats[0][0].q50, 1.10);
  EXPECT_GT(stats[1][1].q50 / stats[0][1].q50, 1.15);
}
