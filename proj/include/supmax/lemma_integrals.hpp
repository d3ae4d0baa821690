#pragma once

// Deterministic expectations over a centered bivariate normal (X1, Y1).
//
// The pair is written as (X, cX + Y) with X ~ N(0, var_x) and Y ~ N(0,
// var_resid) independent, c = Cov(X1, Y1) / Var(X1). Integrals run in (x, y)
// with the product density, x over [0, 8 sd] (doubled by the symmetry
// (x, y) -> (-x, -y)) and y over [-8 sd, 8 sd] split where |cx + y| = x and
// where cx + y = 0, the places the min/max integrands have kinks.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "supmax/error.hpp"
#include "supmax/gaussian_core.hpp"
#include "supmax/quadrature.hpp"

namespace supmax {

inline constexpr double kTruncationSd = 8.0;
inline constexpr double kDegenerateCorrelation = 1e-12;
inline constexpr double kQuadratureRelTol = 1e-9;

struct BivariatePair {
  double var_x = 1.0;      ///< Var(X1) after the swap, the larger variance
  double var_y = 1.0;      ///< Var(Y1) after the swap
  double corr = 0.0;       ///< Corr(X1, Y1)
  double c = 0.0;          ///< Cov(X1, Y1) / Var(X1)
  double var_resid = 1.0;  ///< Var(Y1 - c X1) = var_y (1 - corr^2)
  double c1 = 0.5;         ///< 1 / (2 var_x)
  double c2 = 0.5;         ///< 1 / (2 var_resid)
  double c3 = 0.125;
  bool swapped = false;    ///< input variances were exchanged
};

inline BivariatePair decorrelate(double var_x, double var_y, double corr) {
  if (!(var_x > 0.0) || !(var_y > 0.0) || !std::isfinite(var_x) || !std::isfinite(var_y))
    fail(ErrorKind::InvalidParameter, "variances must be positive and finite");
  if (!std::isfinite(corr) || std::abs(corr) >= 1.0 - kDegenerateCorrelation)
    fail(ErrorKind::DegenerateCorrelation, "correlation magnitude must be below 1 - 1e-12");
  BivariatePair b;
  b.swapped = var_y > var_x;
  if (b.swapped) std::swap(var_x, var_y);
  b.var_x = var_x;
  b.var_y = var_y;
  b.corr = corr;
  b.c = corr * std::sqrt(var_y / var_x);
  b.var_resid = var_y * (1.0 - corr * corr);
  b.c1 = 1.0 / (2.0 * var_x);
  b.c2 = 1.0 / (2.0 * b.var_resid);
  b.c3 = b.c == 0.0 ? b.c2 / 4.0 : 0.25 * std::min(b.c1 / (b.c * b.c), b.c2);
  return b;
}

/// Pair for coordinates (i, j) of a covariance matrix.
inline BivariatePair decorrelate(const CovarianceMatrix& cov, std::size_t i = 0, std::size_t j = 1) {
  return decorrelate(cov(i, i), cov(j, j), correlation(cov, i, j));
}

/// c1 x^2 + c2 y^2 >= c3 (cx + y)^2, with 1e-12 relative slack.
inline bool density_domination_holds(const BivariatePair& b, double x, double y) {
  const double lhs = b.c1 * x * x + b.c2 * y * y;
  const double w = b.c * x + y;
  return b.c3 * w * w <= lhs * (1.0 + 1e-12);
}

namespace detail {

inline double normal_density(double x, double var) {
  return std::exp(-0.5 * x * x / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

/// Limits and breakpoints for the inner y-integral at fixed x. With
/// sharpness p > 0, the ridges |cx + y| = x (where (lo/hi)^p peaks with
/// width about x/p) are bracketed by points at relative offsets 2^j / p so the
/// first panels cannot step over them.
inline std::vector<double> y_breakpoints(const BivariatePair& b, double x, double sharpness) {
  const double ymax = kTruncationSd * std::sqrt(b.var_resid);
  const double ax = std::abs(x);
  std::vector<double> ws{-ax, 0.0, ax};
  if (sharpness > 0.0 && ax > 0.0) {
    for (double d = 1.0 / sharpness; d < 64.0; d *= 2.0) {
      for (double sign : {-1.0, 1.0}) {
        ws.push_back(sign * ax * (1.0 + d));
        if (d < 1.0) ws.push_back(sign * ax * (1.0 - d));
      }
    }
  }
  std::vector<double> ys{-ymax, ymax};
  for (double w : ws) {
    const double y = w - b.c * x;
    if (y > -ymax && y < ymax) ys.push_back(y);
  }
  std::sort(ys.begin(), ys.end());
  return ys;
}

}  // namespace detail

/// E[g(|X1|, |Y1|)] by 2-d quadrature. With `use_symmetry` only x >= 0 is
/// integrated and doubled; otherwise the full x-range is used. `sharpness`
/// is the exponent of a (lo/hi)^p factor in g, 0 if there is none.
template <class G>
quad::QuadratureResult bivariate_expectation(const BivariatePair& b, G&& g, bool use_symmetry = true,
                                             const quad::QuadratureOptions& opts = {}, double sharpness = 0.0) {
  const double xmax = kTruncationSd * std::sqrt(b.var_x);
  auto integrand = [&](double x, double y) {
    return g(std::abs(x), std::abs(b.c * x + y)) * detail::normal_density(x, b.var_x) *
           detail::normal_density(y, b.var_resid);
  };
  auto ys = [&](double x) { return detail::y_breakpoints(b, x, sharpness); };
  if (use_symmetry) {
    const std::vector<double> xs{0.0, xmax};
    auto r = quad::integrate_2d(integrand, std::span<const double>(xs), ys, opts);
    r.value *= 2.0;
    r.abs_error *= 2.0;
    return r;
  }
  const std::vector<double> xs{-xmax, 0.0, xmax};
  return quad::integrate_2d(integrand, std::span<const double>(xs), ys, opts);
}

namespace detail {

inline void check_ratio_args(double m, double p, double p_min) {
  if (!(m > 0.0) || !std::isfinite(m)) fail(ErrorKind::InvalidParameter, "m must be a positive real");
  if (!(p > p_min) || !std::isfinite(p))
    fail(ErrorKind::InvalidParameter, "p must exceed " + std::to_string(static_cast<int>(p_min)));
}

}  // namespace detail

/// E[hi^(m-2) (lo/hi)^(p-1)] with hi = max(|X1|,|Y1|), lo = min(|X1|,|Y1|).
inline quad::QuadratureResult ratio_moment_1(const BivariatePair& b, double m, double p,
                                             bool use_symmetry = true) {
  detail::check_ratio_args(m, p, 1.0);
  quad::QuadratureOptions opts;
  opts.rel_tol = kQuadratureRelTol;
  return bivariate_expectation(
      b,
      [m, p](double u, double v) {
        const double hi = std::max(u, v);
        const double lo = std::min(u, v);
        if (hi == 0.0) return 0.0;
        return std::exp((m - 2.0) * std::log(hi) + (p - 1.0) * std::log(lo / hi));
      },
      use_symmetry, opts, p);
}

/// E[hi^(m-2) (lo/hi)^(p-2) (1 - lo/hi)].
inline quad::QuadratureResult ratio_moment_2(const BivariatePair& b, double m, double p,
                                             bool use_symmetry = true) {
  detail::check_ratio_args(m, p, 2.0);
  quad::QuadratureOptions opts;
  opts.rel_tol = kQuadratureRelTol;
  return bivariate_expectation(
      b,
      [m, p](double u, double v) {
        const double hi = std::max(u, v);
        const double lo = std::min(u, v);
        if (hi == 0.0) return 0.0;
        const double t = lo / hi;
        return std::exp((m - 2.0) * std::log(hi) + (p - 2.0) * std::log(t)) * (1.0 - t);
      },
      use_symmetry, opts, p);
}

/// E[max(|X1|, |X2|)^m] for a 2x2 covariance with |corr| < 1.
inline quad::QuadratureResult bivariate_max_abs_moment(const CovarianceMatrix& cov, double m) {
  if (cov.dim() != 2) fail(ErrorKind::DimensionMismatch, "bivariate moment needs a 2x2 covariance");
  if (!(m >= 0.0)) fail(ErrorKind::NegativeOrder, "moment order must be >= 0");
  quad::QuadratureOptions opts;
  opts.rel_tol = kQuadratureRelTol;
  return bivariate_expectation(
      decorrelate(cov), [m](double u, double v) { return std::pow(std::max(u, v), m); }, true, opts);
}

/// Integral over {x > 0, |cx + y| <= x} of x^(m-2) (|cx+y|/x)^(p-1) e^{-c1 x^2},
/// the first piece of the decay argument. Substituting w = cx + y removes c.
inline quad::QuadratureResult sx_region_integral(const BivariatePair& b, double m, double p) {
  detail::check_ratio_args(m, p, 1.0);
  quad::QuadratureOptions opts;
  opts.rel_tol = kQuadratureRelTol;
  const std::vector<double> xs{0.0, kTruncationSd * std::sqrt(b.var_x)};
  return quad::integrate_2d(
      [&](double x, double w) {
        return std::exp((m - 2.0) * std::log(x) + (p - 1.0) * std::log(std::abs(w) / x) - b.c1 * x * x);
      },
      std::span<const double>(xs),
      [p](double x) {
        std::vector<double> ws{-x, 0.0, x};
        for (double d = 1.0 / p; d < 1.0; d *= 2.0) {
          ws.push_back(-x * (1.0 - d));
          ws.push_back(x * (1.0 - d));
        }
        std::sort(ws.begin(), ws.end());
        return ws;
      },
      opts);
}

/// 2 c(m) / (p c1^(m/2)) with c(m) = Gamma(m/2) / 2.
inline double sx_region_closed_form(const BivariatePair& b, double m, double p) {
  return std::tgamma(0.5 * m) / (p * std::pow(b.c1, 0.5 * m));
}

struct DecayReport {
  double m = 2.0;
  BivariatePair pair;
  std::vector<double> p_grid;
  std::vector<double> values_1;
  std::vector<double> values_2;
  std::vector<double> rel_errors_1;
  std::vector<double> rel_errors_2;
  std::vector<double> scaled_1;  ///< p * values_1
  std::vector<double> scaled_2;  ///< p (p-1) * values_2
  double fitted_slope_1 = 0.0;
  double fitted_slope_2 = 0.0;
  bool bounded_1 = false;
  bool bounded_2 = false;
  bool errors_ok = false;
  /// max(Var)^(m/2) / sqrt(Var X1 Var Y1 (1 - corr^2))
  double c_bound = 0.0;
  double fitted_c_1 = 0.0;
  double fitted_c_2 = 0.0;

  bool passed() const noexcept { return bounded_1 && bounded_2 && errors_ok; }
};

inline constexpr double kBoundednessFactor = 1.5;
inline constexpr double kMaxRelQuadError = 1e-8;

inline void validate_p_grid(std::span<const double> grid) {
  if (grid.size() < 4) fail(ErrorKind::InvalidParameter, "p-grid needs at least 4 points");
  for (double p : grid)
    if (!(p >= 4.0 && p <= 512.0)) fail(ErrorKind::InvalidParameter, "p-grid points must lie in [4, 512]");
  const double ratio = grid[1] / grid[0];
  if (!(ratio > 1.0)) fail(ErrorKind::InvalidParameter, "p-grid must be strictly increasing");
  for (std::size_t q = 1; q < grid.size(); ++q)
    if (std::abs(grid[q] / grid[q - 1] - ratio) > 1e-9 * ratio)
      fail(ErrorKind::InvalidParameter, "p-grid must be geometric");
}

/// {p_min, 2 p_min, 4 p_min, ...} up to p_max.
inline std::vector<double> doubling_grid(double p_min, double p_max) {
  std::vector<double> g;
  for (double p = p_min; p <= p_max * (1.0 + 1e-12); p *= 2.0) g.push_back(p);
  return g;
}

inline double loglog_slope(std::span<const double> p, std::span<const double> v) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(p.size());
  for (std::size_t q = 0; q < p.size(); ++q) {
    const double x = std::log(p[q]);
    const double y = std::log(v[q]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline DecayReport decay_check(const BivariatePair& b, double m, std::span<const double> p_grid) {
  validate_p_grid(p_grid);
  DecayReport r;
  r.m = m;
  r.pair = b;
  r.p_grid.assign(p_grid.begin(), p_grid.end());
  for (double p : p_grid) {
    const auto v1 = ratio_moment_1(b, m, p);
    const auto v2 = ratio_moment_2(b, m, p);
    if (!(v1.value > 0.0) || !(v2.value > 0.0))
      fail(ErrorKind::QuadratureNonconvergence, "decay integral is not positive");
    r.values_1.push_back(v1.value);
    r.values_2.push_back(v2.value);
    r.rel_errors_1.push_back(v1.abs_error / v1.value);
    r.rel_errors_2.push_back(v2.abs_error / v2.value);
    r.scaled_1.push_back(p * v1.value);
    r.scaled_2.push_back(p * (p - 1.0) * v2.value);
  }
  r.fitted_slope_1 = loglog_slope(r.p_grid, r.values_1);
  r.fitted_slope_2 = loglog_slope(r.p_grid, r.values_2);
  auto bounded = [](const std::vector<double>& s) {
    return std::all_of(s.begin(), s.end(), [&](double v) { return v <= kBoundednessFactor * s.front(); });
  };
  r.bounded_1 = bounded(r.scaled_1);
  r.bounded_2 = bounded(r.scaled_2);
  auto small = [](const std::vector<double>& e) {
    return std::all_of(e.begin(), e.end(), [](double v) { return v <= kMaxRelQuadError; });
  };
  r.errors_ok = small(r.rel_errors_1) && small(r.rel_errors_2);
  r.c_bound = std::pow(std::max(b.var_x, b.var_y), 0.5 * m) /
              std::sqrt(b.var_x * b.var_y * (1.0 - b.corr * b.corr));
  r.fitted_c_1 = *std::max_element(r.scaled_1.begin(), r.scaled_1.end()) / r.c_bound;
  r.fitted_c_2 = *std::max_element(r.scaled_2.begin(), r.scaled_2.end()) / r.c_bound;
  return r;
}

}  // namespace supmax
