#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "supmax/lemma_integrals.hpp"
#include "supmax/moments.hpp"
#include "supmax/rng.hpp"
#include "test_util.hpp"

using namespace supmax;

namespace {

/// int_0^1 weight(r) * 4 / (pi (1 + r^2)) dr, with points clustered near r = 1
/// where r^p concentrates.
template <class W>
double ratio_oracle(W weight, double p) {
  std::vector<double> pts{0.0, 1.0};
  for (double d = 1.0 / p; d < 1.0; d *= 2.0) pts.push_back(1.0 - d);
  quad::QuadratureOptions o;
  o.rel_tol = 1e-13;
  return quad::integrate([&](double r) { return weight(r) * 4.0 / (std::numbers::pi * (1.0 + r * r)); },
                         std::span<const double>(pts), o)
      .value;
}

double oracle_1(double p) {
  return ratio_oracle([p](double r) { return std::pow(r, p - 1.0); }, p);
}

double oracle_2(double p) {
  return ratio_oracle([p](double r) { return std::pow(r, p - 2.0) * (1.0 - r); }, p);
}

const BivariatePair kStandard = decorrelate(1.0, 1.0, 0.0);

}  // namespace

TEST(Decorrelate, Examples) {
  EXPECT_EQ(kStandard.c, 0.0);
  EXPECT_EQ(kStandard.c1, 0.5);
  EXPECT_EQ(kStandard.c2, 0.5);
  EXPECT_EQ(kStandard.c3, 0.125);
  EXPECT_FALSE(kStandard.swapped);

  const auto b = decorrelate(1.0, 1.0, 0.6);
  EXPECT_DOUBLE_EQ(b.c, 0.6);
  EXPECT_DOUBLE_EQ(b.var_resid, 0.64);
  EXPECT_DOUBLE_EQ(b.c1, 0.5);
  EXPECT_DOUBLE_EQ(b.c2, 0.78125);

  const auto s = decorrelate(1.0, 4.0, 0.5);
  EXPECT_TRUE(s.swapped);
  EXPECT_EQ(s.var_x, 4.0);
  EXPECT_EQ(s.var_y, 1.0);
  EXPECT_DOUBLE_EQ(s.c, 0.25);
  EXPECT_LE(std::abs(s.c), std::abs(s.corr));

  EXPECT_NO_THROW(decorrelate(1.0, 1.0, 0.999));
  EXPECT_SUPMAX_ERROR(decorrelate(1.0, 1.0, 1.0 - 1e-13), ErrorKind::DegenerateCorrelation);
  EXPECT_SUPMAX_ERROR(decorrelate(0.0, 1.0, 0.0), ErrorKind::InvalidParameter);
}

TEST(Decorrelate, DensityDominationHoldsPointwise) {
  rng::CounterRng gen(61, 0);
  for (double corr : {0.0, 0.3, -0.7, 0.9, 0.99}) {
    for (double vy : {0.2, 1.0, 5.0}) {
      const auto b = decorrelate(1.0, vy, corr);
      std::size_t violations = 0;
      for (int q = 0; q < 100'000; ++q) {
        const double x = 5.0 * gen.normal();
        const double y = 5.0 * gen.normal();
        if (!density_domination_holds(b, x, y)) ++violations;
      }
      EXPECT_EQ(violations, 0u) << "corr=" << corr << " vy=" << vy;
    }
  }
}

TEST(Engine, OneDimensionalMomentsExact) {
  for (double vx : {0.5, 1.0, 3.0}) {
    for (double corr : {0.0, 0.5, -0.8}) {
      const auto b = decorrelate(vx, 0.7 * vx, corr);
      for (double m : {1.0, 2.0, 3.0, 4.0}) {
        quad::QuadratureOptions o;
        o.rel_tol = 1e-11;
        const auto r = bivariate_expectation(b, [m](double u, double) { return std::pow(u, m); }, true, o);
        const double truth = std::pow(b.var_x, 0.5 * m) * abs_normal_moment(m);
        EXPECT_NEAR(r.value, truth, 1e-9 * truth) << "vx=" << vx << " corr=" << corr << " m=" << m;
        const auto ry = bivariate_expectation(b, [m](double, double v) { return std::pow(v, m); }, true, o);
        const double truth_y = std::pow(b.var_y, 0.5 * m) * abs_normal_moment(m);
        EXPECT_NEAR(ry.value, truth_y, 1e-9 * truth_y);
      }
    }
  }
}

TEST(Engine, SymmetryReductionAgreesWithFullRange) {
  for (double corr : {0.0, 0.4, -0.9}) {
    const auto b = decorrelate(2.0, 1.0, corr);
    for (double p : {3.0, 8.0, 32.0}) {
      const auto half = ratio_moment_1(b, 2.0, p, true);
      const auto full = ratio_moment_1(b, 2.0, p, false);
      EXPECT_NEAR(half.value, full.value, 1e-8 * full.value) << corr << " " << p;
      const auto half2 = ratio_moment_2(b, 3.0, p, true);
      const auto full2 = ratio_moment_2(b, 3.0, p, false);
      EXPECT_NEAR(half2.value, full2.value, 1e-8 * full2.value);
    }
  }
}

TEST(Engine, BivariateMaxMoment) {
  const auto id = make_covariance({{1, 0}, {0, 1}});
  EXPECT_NEAR(bivariate_max_abs_moment(id, 1.0).value, 2.0 / std::sqrt(std::numbers::pi), 1e-9);
  EXPECT_NEAR(bivariate_max_abs_moment(id, 0.0).value, 1.0, 1e-9);
  // perfectly correlated limit: max equals |X1|
  const auto near = make_covariance({{1, 0.999999}, {0.999999, 1}});
  EXPECT_NEAR(bivariate_max_abs_moment(near, 2.0).value, 1.0, 2e-3);
  EXPECT_SUPMAX_ERROR(bivariate_max_abs_moment(make_covariance({{1}}), 1.0), ErrorKind::DimensionMismatch);
}

TEST(RatioDensity, MatchesSimulation) {
  // min/max of two i.i.d. |N(0,1)| has CDF (4/pi) atan(r) on [0, 1]
  rng::CounterRng gen(62, 0);
  const std::size_t n = 1'000'000;
  const std::vector<double> probes{0.1, 0.25, 0.5, 0.75, 0.9};
  std::vector<std::size_t> below(probes.size(), 0);
  for (std::size_t s = 0; s < n; ++s) {
    const double a = std::abs(gen.normal()), b = std::abs(gen.normal());
    const double r = std::min(a, b) / std::max(a, b);
    for (std::size_t q = 0; q < probes.size(); ++q) below[q] += r <= probes[q] ? 1 : 0;
  }
  for (std::size_t q = 0; q < probes.size(); ++q) {
    const double f = 4.0 / std::numbers::pi * std::atan(probes[q]);
    const double ecdf = static_cast<double>(below[q]) / static_cast<double>(n);
    EXPECT_NEAR(ecdf, f, 5.0 * std::sqrt(f * (1.0 - f) / static_cast<double>(n))) << probes[q];
  }
}

TEST(RatioMoment1, Examples) {
  const double v2 = ratio_moment_1(kStandard, 2.0, 2.0).value;
  EXPECT_NEAR(v2, 2.0 / std::numbers::pi * std::log(2.0), 1e-8);
  EXPECT_NEAR(v2, 0.4413, 1e-4);
  EXPECT_NEAR(v2, oracle_1(2.0), 1e-8);
  for (double p : {1.5, 4.0, 16.0, 100.0}) EXPECT_LE(ratio_moment_1(decorrelate(2.0, 1.0, 0.5), 2.0, p).value, 1.0);
  EXPECT_SUPMAX_ERROR(ratio_moment_1(kStandard, 2.0, 1.0), ErrorKind::InvalidParameter);
  EXPECT_SUPMAX_ERROR(ratio_moment_2(kStandard, 2.0, 2.0), ErrorKind::InvalidParameter);
}

TEST(RatioMoment1, AgreesWithOneDimensionalOracle) {
  for (double p : {3.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0}) {
    const auto r = ratio_moment_1(kStandard, 2.0, p);
    const double truth = oracle_1(p);
    EXPECT_NEAR(r.value, truth, 1e-8 * truth) << "p=" << p;
    EXPECT_LE(r.abs_error, 1e-8 * r.value);
  }
  EXPECT_NEAR(512.0 * oracle_1(512.0), 2.0 / std::numbers::pi, 2e-3);
}

TEST(RatioMoment2, AgreesWithOneDimensionalOracle) {
  for (double p : {4.0, 8.0, 16.0, 32.0, 64.0, 256.0}) {
    const auto r = ratio_moment_2(kStandard, 2.0, p);
    const double truth = oracle_2(p);
    EXPECT_NEAR(r.value, truth, 1e-8 * truth) << "p=" << p;
  }
}

TEST(RatioMoment2, DominatedByFirstMoment) {
  for (double corr : {0.0, 0.5, -0.9}) {
    const auto b = decorrelate(1.5, 1.0, corr);
    for (double p : {3.0, 6.0, 20.0, 64.0})
      EXPECT_LE(ratio_moment_2(b, 2.0, p).value, ratio_moment_1(b, 2.0, p - 1.0).value * (1.0 + 1e-9));
  }
}

TEST(SxRegion, MatchesClosedForm) {
  for (double vx : {0.5, 1.0, 2.0}) {
    const auto b = decorrelate(vx, 0.5, 0.0);
    for (double m : {1.5, 2.0, 3.0, 4.0}) {
      for (double p : {4.0, 16.0, 64.0}) {
        const double exact = sx_region_closed_form(b, m, p);
        EXPECT_NEAR(sx_region_integral(b, m, p).value, exact, 1e-8 * exact) << vx << " " << m << " " << p;
      }
    }
  }
  // c(m) from the 1-d gamma integral int_0^inf x^(m-1) e^{-c1 x^2} dx = Gamma(m/2) / (2 c1^(m/2))
  quad::QuadratureOptions o;
  o.rel_tol = 1e-12;
  const std::vector<double> pts{0.0, 1.0, 3.0, 20.0};
  const double gamma_int =
      quad::integrate([](double x) { return x * x * std::exp(-0.5 * x * x); }, std::span<const double>(pts), o).value;
  EXPECT_NEAR(gamma_int, std::tgamma(1.5) / (2.0 * std::pow(0.5, 1.5)), 1e-11);
}

namespace {

double oracle_slope(const std::vector<double>& grid, double (*f)(double)) {
  std::vector<double> v;
  for (double p : grid) v.push_back(f(p));
  return loglog_slope(grid, v);
}

}  // namespace

TEST(Decay, StandardPairSlopes) {
  const auto grid = doubling_grid(4.0, 64.0);
  ASSERT_EQ(grid.size(), 5u);
  const auto r = decay_check(kStandard, 2.0, grid);
  EXPECT_TRUE(r.passed());
  // on the short default grid the slopes carry finite-p curvature; they must
  // still match the exact 1-d values
  EXPECT_NEAR(r.fitted_slope_1, oracle_slope(grid, oracle_1), 1e-6);
  EXPECT_NEAR(r.fitted_slope_2, oracle_slope(grid, oracle_2), 1e-6);
  EXPECT_GE(r.fitted_slope_1, -1.15);
  EXPECT_LE(r.fitted_slope_1, -0.85);
  for (std::size_t q = 0; q < grid.size(); ++q) {
    EXPECT_GT(r.values_1[q], 0.0);
    EXPECT_DOUBLE_EQ(r.scaled_1[q], grid[q] * r.values_1[q]);
  }
  EXPECT_DOUBLE_EQ(r.c_bound, 1.0);
}

TEST(Decay, StandardPairSlopesOverFullRange) {
  const auto grid = doubling_grid(4.0, 512.0);
  ASSERT_EQ(grid.size(), 8u);
  const auto r = decay_check(kStandard, 2.0, grid);
  EXPECT_TRUE(r.passed());
  EXPECT_GE(r.fitted_slope_1, -1.15);
  EXPECT_LE(r.fitted_slope_1, -0.85);
  EXPECT_GE(r.fitted_slope_2, -2.2);
  EXPECT_LE(r.fitted_slope_2, -1.8);
  EXPECT_NEAR(r.fitted_slope_2, oracle_slope(grid, oracle_2), 1e-6);
}

TEST(Decay, FittedConstantTracksCorrelationFactor) {
  const auto grid = doubling_grid(4.0, 64.0);
  std::vector<double> fitted, bound;
  for (double corr : {0.0, 0.9, 0.99}) {
    const auto r = decay_check(decorrelate(1.0, 1.0, corr), 2.0, grid);
    EXPECT_TRUE(r.errors_ok) << corr;
    for (double v : r.values_1) EXPECT_TRUE(std::isfinite(v) && v > 0.0);
    fitted.push_back(*std::max_element(r.scaled_1.begin(), r.scaled_1.end()));
    bound.push_back(r.c_bound);
  }
  // the scaled values may grow with correlation, but no faster than the bound
  for (std::size_t q = 1; q < fitted.size(); ++q) EXPECT_LE(fitted[q] / fitted[0], bound[q] / bound[0]);
}

TEST(Decay, StrongCorrelationGrowsBeforeSaturating) {
  // p * value rises by more than 1.5x between p = 4 and 64 before levelling
  // off, so the boundedness rule flags it on the short grid
  const auto b = decorrelate(1.0, 1.0, 0.99);
  const auto r = decay_check(b, 2.0, doubling_grid(4.0, 512.0));
  EXPECT_FALSE(r.bounded_1);
  const auto& s = r.scaled_1;
  EXPECT_LT(s.back() / s[s.size() - 2], 1.02);
  EXPECT_LT(s.back(), r.c_bound);
}

TEST(Decay, GridValidation) {
  const std::vector<double> short_grid{4, 8, 16};
  EXPECT_SUPMAX_ERROR(decay_check(kStandard, 2.0, short_grid), ErrorKind::InvalidParameter);
  const std::vector<double> low{2, 4, 8, 16};
  EXPECT_SUPMAX_ERROR(decay_check(kStandard, 2.0, low), ErrorKind::InvalidParameter);
  const std::vector<double> uneven{4, 8, 16, 64};
  EXPECT_SUPMAX_ERROR(decay_check(kStandard, 2.0, uneven), ErrorKind::InvalidParameter);
  const std::vector<double> high{64, 128, 256, 1024};
  EXPECT_SUPMAX_ERROR(decay_check(kStandard, 2.0, high), ErrorKind::InvalidParameter);
}

TEST(Decay, LogLogSlopeOfPowerLaw) {
  const std::vector<double> p{4, 8, 16, 32};
  std::vector<double> v;
  for (double x : p) v.push_back(3.0 * std::pow(x, -1.7));
  EXPECT_NEAR(loglog_slope(p, v), -1.7, 1e-12);
}
