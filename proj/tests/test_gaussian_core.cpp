#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "supmax/gaussian_core.hpp"
#include "supmax/parallel.hpp"
#include "test_util.hpp"

using namespace supmax;

TEST(MakeCovariance, AcceptsIdentityAndScalar) {
  const auto id = make_covariance({{1, 0}, {0, 1}});
  EXPECT_EQ(id.dim(), 2u);
  EXPECT_TRUE(id.strictly_pd());
  const auto four = make_covariance({{4}});
  EXPECT_EQ(four.dim(), 1u);
  EXPECT_EQ(four(0, 0), 4.0);
}

TEST(MakeCovariance, RejectsIndefinite) {
  EXPECT_SUPMAX_ERROR(make_covariance({{1, 2}, {2, 1}}), ErrorKind::NotPSD);
  EXPECT_SUPMAX_ERROR(make_covariance({{-1}}), ErrorKind::NotPSD);
}

TEST(MakeCovariance, RejectsNonSquareAndNonFinite) {
  EXPECT_SUPMAX_ERROR(make_covariance(std::vector<std::vector<double>>{{1, 0}, {0}}), ErrorKind::DimensionError);
  EXPECT_SUPMAX_ERROR(make_covariance({{1, std::nan("")}, {0, 1}}), ErrorKind::NonFinite);
  EXPECT_SUPMAX_ERROR(make_covariance({{std::numeric_limits<double>::infinity()}}), ErrorKind::NonFinite);
  EXPECT_SUPMAX_ERROR(SquareMatrix::from_row_major(2, std::vector<double>{1, 2, 3}), ErrorKind::DimensionError);
}

TEST(MakeCovariance, SymmetrizesSmallAsymmetryRejectsLarge) {
  const auto c = make_covariance({{2, 0.5 + 1e-10}, {0.5 - 1e-10, 2}});
  EXPECT_EQ(c(0, 1), c(1, 0));
  EXPECT_NEAR(c(0, 1), 0.5, 1e-15);
  EXPECT_SUPMAX_ERROR(make_covariance({{2, 0.6}, {0.5, 2}}), ErrorKind::NotSymmetric);
}

TEST(MakeCovariance, AcceptsPsdWithinTolerance) {
  const auto c = make_covariance({{1, 1}, {1, 1}});
  EXPECT_FALSE(c.strictly_pd());
  EXPECT_SUPMAX_ERROR(cholesky(c), ErrorKind::SingularMatrix);
}

TEST(Cholesky, Examples) {
  const auto l3 = cholesky(CovarianceMatrix::make(SquareMatrix::identity(3)));
  EXPECT_EQ(l3, SquareMatrix::identity(3));
  const auto l = cholesky(make_covariance({{4, 0}, {0, 9}}));
  EXPECT_EQ(l, (SquareMatrix{{2, 0}, {0, 3}}));
}

TEST(Cholesky, RoundTripOnRandomMatrices) {
  rng::CounterRng gen(11, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 1 + trial % 12;
    const auto c = testutil::random_pd(k, gen);
    const auto l = cholesky(c);
    double worst = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        EXPECT_EQ(j > i ? l(i, j) : 0.0, 0.0);
        double s = 0.0;
        for (std::size_t t = 0; t < k; ++t) s += l(i, t) * l(j, t);
        worst = std::max(worst, std::abs(s - c(i, j)));
      }
    EXPECT_LE(worst, 1e-10 * c.scale());
  }
}

TEST(Covariance, QuadraticFormNonNegative) {
  rng::CounterRng gen(12, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + trial % 7;
    // rank-deficient Gram matrices sit right at the PSD boundary
    SquareMatrix a(k), s(k);
    for (double& v : a.data()) v = gen.normal();
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) s(i, j) = a(i, 0) * a(j, 0) + a(i, 1) * a(j, 1);
    const auto c = CovarianceMatrix::make(s);
    for (int q = 0; q < 1000 / 20; ++q) {
      std::vector<double> v(k);
      double norm = 0.0;
      for (double& x : v) {
        x = gen.normal();
        norm += x * x;
      }
      double form = 0.0;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) form += v[i] * c(i, j) * v[j];
      EXPECT_GE(form / norm, -kPsdTolerance * c.scale());
    }
  }
}

TEST(IncrementVariance, Examples) {
  const auto id = CovarianceMatrix::make(SquareMatrix::identity(2));
  EXPECT_EQ(increment_variance(id, 0, 1), 2.0);
  EXPECT_EQ(increment_variance(id, 1, 1), 0.0);
  const auto c = make_covariance({{1, 0.9}, {0.9, 1}});
  EXPECT_NEAR(increment_variance(c, 0, 1), 0.2, 1e-15);
  EXPECT_EQ(increment_variance(c, 0, 1), increment_variance(c, 1, 0));
  EXPECT_SUPMAX_ERROR(increment_variance(c, 0, 2), ErrorKind::IndexError);
}

TEST(IncrementVariance, SymmetricOnRandomMatrices) {
  rng::CounterRng gen(13, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = testutil::random_pd(5, gen);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(increment_variance(c, i, j), increment_variance(c, j, i));
  }
}

TEST(IncrementVariance, MatchesSampledVariance) {
  rng::CounterRng gen(14, 0);
  const auto c = testutil::random_pd(4, gen);
  const auto l = cholesky(c);
  const auto stats = parallel::monte_carlo(1'000'000, 99, 0, 4, 1, [&](std::span<const double> z, std::span<double> out) {
    double x0 = 0.0, x3 = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      x0 += l(0, j) * z[j];
      x3 += l(3, j) * z[j];
    }
    out[0] = (x0 - x3) * (x0 - x3);
  });
  EXPECT_LE(std::abs(stats[0].mean - increment_variance(c, 0, 3)), 4.0 * stats[0].std_error());
}

TEST(Correlation, Examples) {
  EXPECT_NEAR(correlation(make_covariance({{1, 0.9}, {0.9, 1}}), 0, 1), 0.9, 1e-15);
  EXPECT_EQ(correlation(CovarianceMatrix::make(SquareMatrix::identity(2)), 0, 1), 0.0);
  EXPECT_EQ(correlation(make_covariance({{4, 2}, {2, 4}}), 0, 1), 0.5);
  EXPECT_SUPMAX_ERROR(correlation(make_covariance({{0, 0}, {0, 1}}), 0, 1), ErrorKind::ZeroVariance);
  EXPECT_SUPMAX_ERROR(correlation(make_covariance({{1, 0}, {0, 1}}), 2, 0), ErrorKind::IndexError);
}

TEST(Correlation, ClampedAtRankOne) {
  const double r = correlation(make_covariance({{1, 1}, {1, 1}}), 0, 1);
  EXPECT_LE(r, 1.0);
  EXPECT_EQ(r, 1.0);
}

TEST(GaussianPair, DimensionMismatch) {
  EXPECT_SUPMAX_ERROR(GaussianPair(make_covariance({{1}}), make_covariance({{1, 0}, {0, 1}})),
                      ErrorKind::DimensionMismatch);
}

TEST(Regularize, Examples) {
  const auto id = CovarianceMatrix::make(SquareMatrix::identity(2));
  const auto r = regularize(GaussianPair(id, id), RegularizationParams(0.1));
  EXPECT_NEAR(r.sigma_x(0, 0), 1.01, 1e-15);
  EXPECT_NEAR(r.sigma_y(1, 1), 1.01, 1e-15);
  EXPECT_EQ(r.sigma_x(0, 1), 0.0);

  const auto r2 = regularize(GaussianPair(make_covariance({{1, 1}, {1, 1}}), id), RegularizationParams(1.0));
  EXPECT_EQ(r2.sigma_x.entries(), (SquareMatrix{{2, 1}, {1, 2}}));
  EXPECT_EQ(r2.sigma_y.entries(), (SquareMatrix{{2, 0}, {0, 2}}));
  EXPECT_EQ(correlation(r2.sigma_x, 0, 1), 0.5);
}

TEST(Regularize, RejectsBadEpsilon) {
  EXPECT_SUPMAX_ERROR(RegularizationParams(0.0), ErrorKind::InvalidParameter);
  EXPECT_SUPMAX_ERROR(RegularizationParams(-1.0), ErrorKind::InvalidParameter);
  EXPECT_SUPMAX_ERROR(RegularizationParams(std::nan("")), ErrorKind::InvalidParameter);
}

TEST(Regularize, PreservesDelta) {
  rng::CounterRng gen(15, 0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + trial % 6;
    const GaussianPair p(testutil::random_pd(k, gen), testutil::random_pd(k, gen));
    const double eps = std::pow(10.0, gen.uniform(-4.0, 1.0));
    const auto r = regularize(p, RegularizationParams(eps));
    const auto before = p.sigma_y.entries() - p.sigma_x.entries();
    const auto after = r.sigma_y.entries() - r.sigma_x.entries();
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        if (i != j) {
          EXPECT_EQ(after(i, j), before(i, j));
        } else {
          // (a + s) - (b + s) rounds twice; allow a few ulps of the shifted entries
          const double bound = testutil::ulp_distance_bound(r.sigma_x(i, i), r.sigma_y(i, i), 4);
          EXPECT_LE(std::abs(after(i, i) - before(i, i)), bound);
        }
      }
  }
}

TEST(Regularize, GivesPositiveVarianceAndStrictCorrelation) {
  rng::CounterRng gen(16, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + trial % 5;
    // rank-one inputs have |corr| = 1 before regularization
    SquareMatrix s(k);
    std::vector<double> v(k);
    for (double& x : v) x = gen.normal();
    v[0] = 0.0;  // one zero variance as well
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) s(i, j) = v[i] * v[j];
    const auto c = CovarianceMatrix::make(s);
    const double eps = std::pow(10.0, gen.uniform(-3.0, 0.0));
    const auto r = regularize(GaussianPair(c, c), RegularizationParams(eps));
    const double margin = 0.1 * eps * eps / (r.scale() + eps * eps);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_GT(r.sigma_x(i, i), 0.0);
      for (std::size_t j = 0; j < k; ++j)
        if (i != j) {
          EXPECT_LT(std::abs(correlation(r.sigma_x, i, j)), 1.0 - margin);
        }
    }
    EXPECT_TRUE(r.strictly_pd());
  }
}

TEST(DefaultEpsilon, ScalesWithLargestVariance) {
  const auto c = make_covariance({{4, 0}, {0, 1}});
  EXPECT_DOUBLE_EQ(default_epsilon(c), 2e-6);
  EXPECT_DOUBLE_EQ(default_epsilon(make_covariance({{0}})), 1e-6);
}
