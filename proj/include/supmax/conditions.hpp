#pragma once

// Covariance conditions for comparing moments of max |X_i| and max |Y_i|.
//
// With Delta = Sigma^Y - Sigma^X:
//   increment (Sudakov-Fernique) condition:  2 Delta_ij <= Delta_ii + Delta_jj
//   strong condition:                       2 |Delta_ij| <= Delta_ii + Delta_jj
// Both are checked for all index pairs with tolerance cond_tol.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "supmax/error.hpp"
#include "supmax/gaussian_core.hpp"

namespace supmax {

inline constexpr double kConditionTolerance = 1e-9;

struct IndexPair {
  std::size_t i = 0;
  std::size_t j = 0;
  bool operator==(const IndexPair&) const = default;
};

struct DeltaReport {
  SquareMatrix delta;  ///< Sigma^Y - Sigma^X
  double m_total = 0.0;  ///< sum over all (i, j) of |Delta_ij|
  /// Pairs i < j with E(X_i - X_j)^2 > E(Y_i - Y_j)^2 + cond_tol.
  std::vector<IndexPair> sf_failures;
  /// Pairs i <= j with 2|Delta_ij| > Delta_ii + Delta_jj + cond_tol.
  std::vector<IndexPair> strong_failures;
  SquareMatrix slack;  ///< Delta_ii + Delta_jj - 2|Delta_ij|
  double cond_tol = 0.0;

  bool sf_holds() const noexcept { return sf_failures.empty(); }
  bool strong_holds() const noexcept { return strong_failures.empty(); }
};

inline double condition_tolerance(const GaussianPair& p) { return kConditionTolerance * p.scale(); }

/// Computes Delta, M, the slack matrix and both failure lists.
inline DeltaReport analyze_conditions(const GaussianPair& p) {
  const std::size_t k = p.dim();
  DeltaReport r;
  r.cond_tol = condition_tolerance(p);
  r.delta = p.sigma_y.entries() - p.sigma_x.entries();
  r.slack = SquareMatrix(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double d = r.delta(i, j);
      r.m_total += std::abs(d);
      r.slack(i, j) = r.delta(i, i) + r.delta(j, j) - 2.0 * std::abs(d);
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      if (j > i && increment_variance(p.sigma_x, i, j) > increment_variance(p.sigma_y, i, j) + r.cond_tol)
        r.sf_failures.push_back({i, j});
      if (r.slack(i, j) < -r.cond_tol) r.strong_failures.push_back({i, j});
    }
  }
  return r;
}

inline DeltaReport check_sf_condition(const GaussianPair& p) { return analyze_conditions(p); }
inline DeltaReport check_strong_condition(const GaussianPair& p) { return analyze_conditions(p); }

/// Y~ = Y + sigma g with g ~ N(0,1) independent of Y, sigma^2 = max_i(Var X_i + Var Y_i).
struct AugmentedPair {
  double sigma = 0.0;
  CovarianceMatrix sigma_y_tilde;
};

/// Builds Y~ for a pair satisfying the increment condition. The result always
/// satisfies the strong condition against X; this is re-checked before return.
inline AugmentedPair augment(const GaussianPair& p) {
  if (!check_sf_condition(p).sf_holds())
    fail(ErrorKind::SfConditionViolated, "increment condition E(X_i-X_j)^2 <= E(Y_i-Y_j)^2 fails");
  const std::size_t k = p.dim();
  double sigma2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) sigma2 = std::max(sigma2, p.sigma_x(i, i) + p.sigma_y(i, i));
  SquareMatrix tilde = p.sigma_y.entries();
  for (double& v : tilde.data()) v += sigma2;
  AugmentedPair out{std::sqrt(sigma2), CovarianceMatrix::make(tilde)};
  if (!check_strong_condition(GaussianPair(p.sigma_x, out.sigma_y_tilde)).strong_holds())
    throw std::logic_error("augmented pair violates the strong condition");
  return out;
}

/// max_i Var X_i <= max_i Var Y_i, the case where the constant-factor bound
/// 2^(m-1) (2^(m/2) + 1) E[max|Y_i|^m] applies.
inline bool remark_precondition(const GaussianPair& p) {
  return p.sigma_x.max_diagonal() <= p.sigma_y.max_diagonal();
}

}  // namespace supmax
