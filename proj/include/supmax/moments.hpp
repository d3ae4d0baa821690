#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "supmax/conditions.hpp"
#include "supmax/error.hpp"
#include "supmax/gaussian_core.hpp"
#include "supmax/parallel.hpp"

namespace supmax {

inline constexpr std::uint64_t kMinSamples = 1000;
inline constexpr std::uint64_t kDefaultSamples = 1'000'000;
inline constexpr double kViolationZ = 3.0;
inline constexpr double kConsistentZ = 1.0;
/// Normal-stream id shared by every moment estimate (common random numbers).
inline constexpr std::uint32_t kMomentStream = 0;

/// Monte Carlo estimate of E[(max_i |X_i|)^m].
struct MomentEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n_samples = 0;
  double m = 1.0;
  std::uint64_t seed = 0;
  std::size_t k = 0;
  /// Set when the covariance had to be regularized before factorization.
  std::optional<double> regularization_epsilon;
};

enum class Verdict { consistent, inconclusive, violation };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::consistent: return "consistent";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::violation: return "violation";
  }
  return "unknown";
}

struct ComparisonVerdict {
  MomentEstimate lhs;
  MomentEstimate rhs;
  double z_score = 0.0;
  /// Standard error of lhs - rhs from the paired (common random number) samples.
  double diff_std_error = 0.0;
  Verdict verdict = Verdict::consistent;
};

/// Result of checking the increment-condition moment bound and, where it
/// applies, the constant-factor variant.
struct CorollaryVerdict {
  ComparisonVerdict bound;
  double sigma = 0.0;
  bool remark_applies = false;
  std::optional<ComparisonVerdict> remark;
};

inline Verdict classify(double z, double threshold = kViolationZ) {
  if (z > threshold) return Verdict::violation;
  if (z < kConsistentZ) return Verdict::consistent;
  return Verdict::inconclusive;
}

inline double z_score(double diff, double se) {
  if (se > 0.0) return diff / se;
  if (diff > 0.0) return std::numeric_limits<double>::infinity();
  if (diff < 0.0) return -std::numeric_limits<double>::infinity();
  return 0.0;
}

/// E|g|^m for g ~ N(0,1): 2^(m/2) Gamma((m+1)/2) / sqrt(pi).
inline double abs_normal_moment(double m) {
  if (!std::isfinite(m)) fail(ErrorKind::InvalidParameter, "moment order must be finite");
  if (m < 0.0) fail(ErrorKind::NegativeOrder, "moment order must be >= 0");
  if (m == 0.0) return 1.0;
  return std::exp(0.5 * m * std::numbers::ln2 + std::lgamma(0.5 * (m + 1.0)) -
                  0.5 * std::log(std::numbers::pi));
}

/// x^m for x >= 0, exact products for small integer orders.
inline double pow_order(double x, double m) noexcept {
  if (x == 0.0) return 0.0;
  if (m == 1.0) return x;
  if (m == 2.0) return x * x;
  if (m == 3.0) return x * x * x;
  if (m == 4.0) {
    const double x2 = x * x;
    return x2 * x2;
  }
  return std::exp(m * std::log(x));
}

namespace detail {

inline void check_sampling_args(std::uint64_t n, std::span<const double> ms) {
  if (n < kMinSamples)
    fail(ErrorKind::InvalidParameter, "sample count must be at least " + std::to_string(kMinSamples));
  if (ms.empty()) fail(ErrorKind::InvalidParameter, "no moment order given");
  for (double m : ms)
    if (!(m >= 1.0) || !std::isfinite(m))
      fail(ErrorKind::InvalidParameter, "moment order must be a finite real >= 1");
}

struct Factor {
  SquareMatrix chol;
  std::optional<double> epsilon;
};

inline Factor sampling_factor(const CovarianceMatrix& c) {
  if (c.strictly_pd()) return {*c.cholesky_factor(), std::nullopt};
  const double eps = default_epsilon(c);
  const CovarianceMatrix reg = add_to_diagonal(c, eps * eps);
  if (!reg.strictly_pd()) fail(ErrorKind::SingularAfterRegularize, "covariance still singular");
  return {*reg.cholesky_factor(), eps};
}

struct PairFactor {
  SquareMatrix chol_x;
  SquareMatrix chol_y;
  std::optional<double> epsilon;
};

/// Both sides are regularized with the same epsilon, so Delta is unchanged.
inline PairFactor sampling_factor(const GaussianPair& p) {
  if (p.strictly_pd()) return {*p.sigma_x.cholesky_factor(), *p.sigma_y.cholesky_factor(), std::nullopt};
  const double eps = default_epsilon(p);
  const GaussianPair reg = regularize(p, RegularizationParams(eps));
  if (!reg.strictly_pd()) fail(ErrorKind::SingularAfterRegularize, "pair still singular");
  return {*reg.sigma_x.cholesky_factor(), *reg.sigma_y.cholesky_factor(), eps};
}

/// max_i |(L z)_i| for lower-triangular L.
inline double max_abs_lower(const SquareMatrix& l, std::span<const double> z) noexcept {
  const std::size_t k = l.dim();
  double best = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j) s += l(i, j) * z[j];
    best = std::max(best, std::abs(s));
  }
  return best;
}

inline MomentEstimate to_estimate(const parallel::RunningStats& s, double m, std::uint64_t seed,
                                  std::size_t k, std::optional<double> eps) {
  return {s.mean, s.std_error(), s.count, m, seed, k, eps};
}

}  // namespace detail

/// Estimates E[(max_i |X_i|)^m] for every order in `ms` from one shared set of
/// n samples X = L z.
inline std::vector<MomentEstimate> sample_max_abs(const CovarianceMatrix& c, std::uint64_t n,
                                                  std::uint64_t seed, std::span<const double> ms) {
  detail::check_sampling_args(n, ms);
  const auto factor = detail::sampling_factor(c);
  const std::vector<double> orders(ms.begin(), ms.end());
  const auto stats = parallel::monte_carlo(
      n, seed, kMomentStream, c.dim(), orders.size(),
      [&factor, &orders](std::span<const double> z, std::span<double> out) {
        const double mx = detail::max_abs_lower(factor.chol, z);
        for (std::size_t q = 0; q < orders.size(); ++q) out[q] = pow_order(mx, orders[q]);
      });
  std::vector<MomentEstimate> result;
  for (std::size_t q = 0; q < orders.size(); ++q)
    result.push_back(detail::to_estimate(stats[q], orders[q], seed, c.dim(), factor.epsilon));
  return result;
}

inline MomentEstimate sample_max_abs(const CovarianceMatrix& c, std::uint64_t n, std::uint64_t seed,
                                     double m) {
  return sample_max_abs(c, n, seed, std::span<const double>(&m, 1)).front();
}

/// Theorem check: E[max|X_i|^m] vs E[max|Y_i|^m] with X = Lx z, Y = Ly z
/// drawn from one normal stream, for every order in `ms`.
inline std::vector<ComparisonVerdict> compare(const GaussianPair& p, std::span<const double> ms,
                                              std::uint64_t n, std::uint64_t seed) {
  detail::check_sampling_args(n, ms);
  const auto factor = detail::sampling_factor(p);
  const std::vector<double> orders(ms.begin(), ms.end());
  // channels per order: f(X), f(Y), f(X) - f(Y)
  const auto stats = parallel::monte_carlo(
      n, seed, kMomentStream, p.dim(), 3 * orders.size(),
      [&factor, &orders](std::span<const double> z, std::span<double> out) {
        const double mx = detail::max_abs_lower(factor.chol_x, z);
        const double my = detail::max_abs_lower(factor.chol_y, z);
        for (std::size_t q = 0; q < orders.size(); ++q) {
          const double fx = pow_order(mx, orders[q]);
          const double fy = pow_order(my, orders[q]);
          out[3 * q] = fx;
          out[3 * q + 1] = fy;
          out[3 * q + 2] = fx - fy;
        }
      });
  std::vector<ComparisonVerdict> result;
  for (std::size_t q = 0; q < orders.size(); ++q) {
    ComparisonVerdict v;
    v.lhs = detail::to_estimate(stats[3 * q], orders[q], seed, p.dim(), factor.epsilon);
    v.rhs = detail::to_estimate(stats[3 * q + 1], orders[q], seed, p.dim(), factor.epsilon);
    v.diff_std_error = stats[3 * q + 2].std_error();
    v.z_score = z_score(v.lhs.value - v.rhs.value, v.diff_std_error);
    v.verdict = classify(v.z_score);
    result.push_back(v);
  }
  return result;
}

inline ComparisonVerdict compare(const GaussianPair& p, double m, std::uint64_t n, std::uint64_t seed) {
  return compare(p, std::span<const double>(&m, 1), n, seed).front();
}

/// Checks E[max|X_i|^m] <= 2^(m-1) (sigma^m E|g|^m + E[max|Y_i|^m]) and, when
/// max Var X_i <= max Var Y_i, also E[max|X_i|^m] <= 2^(m-1)(2^(m/2)+1) E[max|Y_i|^m].
inline std::vector<CorollaryVerdict> corollary_bound_check(const GaussianPair& p, std::span<const double> ms,
                                                           std::uint64_t n, std::uint64_t seed) {
  detail::check_sampling_args(n, ms);
  const double sigma = augment(p).sigma;
  const bool remark = remark_precondition(p);
  const auto factor = detail::sampling_factor(p);
  const std::vector<double> orders(ms.begin(), ms.end());
  std::vector<double> factor_bound, factor_remark;
  for (double m : orders) {
    factor_bound.push_back(std::exp2(m - 1.0));
    factor_remark.push_back(std::exp2(m - 1.0) * (std::exp2(0.5 * m) + 1.0));
  }
  // channels per order: f(X), f(Y), f(X) - c1 f(Y), f(X) - c2 f(Y)
  const auto stats = parallel::monte_carlo(
      n, seed, kMomentStream, p.dim(), 4 * orders.size(),
      [&](std::span<const double> z, std::span<double> out) {
        const double mx = detail::max_abs_lower(factor.chol_x, z);
        const double my = detail::max_abs_lower(factor.chol_y, z);
        for (std::size_t q = 0; q < orders.size(); ++q) {
          const double fx = pow_order(mx, orders[q]);
          const double fy = pow_order(my, orders[q]);
          out[4 * q] = fx;
          out[4 * q + 1] = fy;
          out[4 * q + 2] = fx - factor_bound[q] * fy;
          out[4 * q + 3] = fx - factor_remark[q] * fy;
        }
      });

  std::vector<CorollaryVerdict> result;
  for (std::size_t q = 0; q < orders.size(); ++q) {
    const double m = orders[q];
    const auto lhs = detail::to_estimate(stats[4 * q], m, seed, p.dim(), factor.epsilon);
    const auto y = detail::to_estimate(stats[4 * q + 1], m, seed, p.dim(), factor.epsilon);

    CorollaryVerdict cv;
    cv.sigma = sigma;
    cv.remark_applies = remark;

    const double offset = factor_bound[q] * pow_order(sigma, m) * abs_normal_moment(m);
    cv.bound.lhs = lhs;
    cv.bound.rhs = y;
    cv.bound.rhs.value = offset + factor_bound[q] * y.value;
    cv.bound.rhs.std_error = factor_bound[q] * y.std_error;
    cv.bound.diff_std_error = stats[4 * q + 2].std_error();
    cv.bound.z_score = z_score(stats[4 * q + 2].mean - offset, cv.bound.diff_std_error);
    cv.bound.verdict = classify(cv.bound.z_score);

    if (remark) {
      ComparisonVerdict r;
      r.lhs = lhs;
      r.rhs = y;
      r.rhs.value = factor_remark[q] * y.value;
      r.rhs.std_error = factor_remark[q] * y.std_error;
      r.diff_std_error = stats[4 * q + 3].std_error();
      r.z_score = z_score(stats[4 * q + 3].mean, r.diff_std_error);
      r.verdict = classify(r.z_score);
      cv.remark = r;
    }
    result.push_back(cv);
  }
  return result;
}

inline CorollaryVerdict corollary_bound_check(const GaussianPair& p, double m, std::uint64_t n,
                                              std::uint64_t seed) {
  return corollary_bound_check(p, std::span<const double>(&m, 1), n, seed).front();
}

}  // namespace supmax
