#pragma once

// Smooth surrogate for (max_i |x_i|)^m:
//
//   f_p(x) = (x_1^p + ... + x_k^p + e^{-p^2})^{m/p},   p even.
//
// All evaluations factor out M = max_i |x_i|. With r_i = x_i / M and
// S = sum_i r_i^p + e^{-p^2} M^{-p} we have A = M^p S, so
//
//   f_p       = M^m S^{m/p}
//   df/dx_i   = m M^{m-1} S^{m/p-1} r_i^{p-1}
//   d2f/dxidxj = M^{m-2} [ m(m-p) S^{m/p-2} r_i^{p-1} r_j^{p-1}
//                          + m(p-1) S^{m/p-1} r_i^{p-2} [i=j] ]
//
// Every power of M and S is combined in log space, which keeps p up to 512
// free of overflow. For p >= 28, e^{-p^2} underflows and the floor term
// vanishes; the sandwich bound still holds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "supmax/error.hpp"
#include "supmax/gaussian_core.hpp"

namespace supmax {

struct SmoothMaxParams {
  int p = 2;
  double m = 2.0;
  std::size_t k = 1;

  SmoothMaxParams(int p_, double m_, std::size_t k_) : p(p_), m(m_), k(k_) {
    if (p < 2 || p % 2 != 0) fail(ErrorKind::InvalidParameter, "p must be an even integer >= 2");
    if (!(m >= 1.0) || !std::isfinite(m)) fail(ErrorKind::InvalidParameter, "m must be a finite real >= 1");
    if (!(static_cast<double>(p) > 0.5 * m)) fail(ErrorKind::InvalidParameter, "p must exceed m/2");
    if (k == 0) fail(ErrorKind::InvalidParameter, "dimension must be >= 1");
  }
};

namespace detail {

inline double log_add_exp(double a, double b) noexcept {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

/// r^n for integer n >= 0 by repeated squaring.
inline double ipow(double r, int n) noexcept {
  double result = 1.0;
  for (; n > 0; n >>= 1) {
    if (n & 1) result *= r;
    r *= r;
  }
  return result;
}

/// Shared pieces of f_p and its derivatives at one point. The power arrays
/// view thread-local scratch and stay valid until the next prepare() on the
/// same thread.
struct SmoothMaxPoint {
  bool zero = false;        // x == 0: A = e^{-p^2}
  double log_max = 0.0;     // log M
  double log_floor = 0.0;   // log(e^{-p^2} M^{-p})
  double log_s = 0.0;       // log S
  std::span<double> r_pm1;  // r_i^{p-1}
  std::span<double> r_pm2;  // r_i^{p-2}
};

inline SmoothMaxPoint prepare(const SmoothMaxParams& s, std::span<const double> x) {
  if (x.size() != s.k)
    fail(ErrorKind::DimensionMismatch, "vector has " + std::to_string(x.size()) + " entries, expected " +
                                           std::to_string(s.k));
  SmoothMaxPoint pt;
  double mx = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "f_p argument is not finite");
    mx = std::max(mx, std::abs(v));
  }
  thread_local std::vector<double> scratch;
  scratch.resize(2 * x.size());
  pt.r_pm1 = std::span<double>(scratch).first(x.size());
  pt.r_pm2 = std::span<double>(scratch).subspan(x.size());
  const double p = s.p;
  if (mx == 0.0) {
    pt.zero = true;
    std::fill(pt.r_pm1.begin(), pt.r_pm1.end(), 0.0);
    std::fill(pt.r_pm2.begin(), pt.r_pm2.end(), s.p == 2 ? 1.0 : 0.0);
    return pt;
  }
  double sum_rp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x[i] / mx;
    pt.r_pm2[i] = ipow(r, s.p - 2);
    pt.r_pm1[i] = pt.r_pm2[i] * r;
    sum_rp += pt.r_pm1[i] * r;
  }
  pt.log_max = std::log(mx);
  pt.log_floor = -p * p - p * pt.log_max;
  pt.log_s = log_add_exp(std::log(sum_rp), pt.log_floor);
  return pt;
}

/// M^{m-2} S^{m/p - e} in log space (e = 1 or 2).
inline double scaled_factor(const SmoothMaxParams& s, const SmoothMaxPoint& pt, double e) noexcept {
  return std::exp((s.m - 2.0) * pt.log_max + (s.m / s.p - e) * pt.log_s);
}

/// A^{m/p - e} at x = 0.
inline double zero_factor(const SmoothMaxParams& s, double e) noexcept {
  const double p = s.p;
  return std::exp(-p * p * (s.m / p - e));
}

}  // namespace detail

inline double f_p_eval(const SmoothMaxParams& s, std::span<const double> x) {
  if (x.size() != s.k)
    fail(ErrorKind::DimensionMismatch, "vector has " + std::to_string(x.size()) + " entries, expected " +
                                           std::to_string(s.k));
  double mx = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "f_p argument is not finite");
    mx = std::max(mx, std::abs(v));
  }
  const double p = s.p;
  if (mx == 0.0) return std::exp(-p * s.m);
  double sum_rp = 0.0;
  for (double v : x) sum_rp += detail::ipow(v / mx, s.p);
  const double log_max = std::log(mx);
  const double log_s = detail::log_add_exp(std::log(sum_rp), -p * p - p * log_max);
  return std::exp(s.m * log_max + (s.m / p) * log_s);
}

struct SmoothMaxDerivatives {
  double value = 0.0;
  std::vector<double> gradient;
  SquareMatrix hessian;
};

/// Value, gradient and Hessian of f_p from the closed-form partials.
inline SmoothMaxDerivatives f_p_hessian(const SmoothMaxParams& s, std::span<const double> x) {
  const auto pt = detail::prepare(s, x);
  const std::size_t k = s.k;
  const double m = s.m;
  const double p = s.p;
  SmoothMaxDerivatives d;
  d.gradient.assign(k, 0.0);
  d.hessian = SquareMatrix(k);
  if (pt.zero) {
    d.value = std::exp(-p * m);
    const double diag = detail::zero_factor(s, 1.0) * m * (p - 1.0);
    for (std::size_t i = 0; i < k; ++i) d.hessian(i, i) = diag * pt.r_pm2[i];
    return d;
  }
  d.value = std::exp(m * pt.log_max + (m / p) * pt.log_s);
  const double g = m * std::exp((m - 1.0) * pt.log_max + (m / p - 1.0) * pt.log_s);
  for (std::size_t i = 0; i < k; ++i) d.gradient[i] = g * pt.r_pm1[i];
  const double k2 = detail::scaled_factor(s, pt, 2.0) * m * (m - p);
  const double k1 = detail::scaled_factor(s, pt, 1.0) * m * (p - 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < i; ++j) d.hessian(i, j) = d.hessian(j, i) = k2 * pt.r_pm1[i] * pt.r_pm1[j];
    d.hessian(i, i) = k2 * pt.r_pm1[i] * pt.r_pm1[i] + k1 * pt.r_pm2[i];
  }
  return d;
}

/// sum_ij w_ij d2f/dx_i dx_j without forming the Hessian.
inline double f_p_hessian_contract(const SmoothMaxParams& s, std::span<const double> x, const SquareMatrix& w) {
  const auto pt = detail::prepare(s, x);
  const std::size_t k = s.k;
  const double m = s.m;
  const double p = s.p;
  double diag = 0.0;
  for (std::size_t i = 0; i < k; ++i) diag += w(i, i) * pt.r_pm2[i];
  if (pt.zero) return detail::zero_factor(s, 1.0) * m * (p - 1.0) * diag;
  double quad = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < k; ++j) row += w(i, j) * pt.r_pm1[j];
    quad += pt.r_pm1[i] * row;
  }
  return detail::scaled_factor(s, pt, 2.0) * m * (m - p) * quad +
         detail::scaled_factor(s, pt, 1.0) * m * (p - 1.0) * diag;
}

/// The three pieces of sum_ij (Sigma^X - Sigma^Y)_ij d2f_p/dx_i dx_j at one
/// point, plus the e^{-p^2} part of the third.
struct DecompositionTerms {
  double t1 = 0.0;        ///< off-diagonal part, weight m(m-1)
  double t2 = 0.0;        ///< diagonal part, weight m(m-1); <= 0 when Delta_ii >= 0
  double t3 = 0.0;        ///< weight m(p-1)
  double t3_minus = 0.0;  ///< -m(p-1) A^{m/p-2} e^{-p^2} sum_i Delta_ii x_i^{p-2}
};

/// `delta` is Sigma^Y - Sigma^X.
inline DecompositionTerms decomposition_terms(const SmoothMaxParams& s, std::span<const double> x,
                                              const SquareMatrix& delta) {
  const auto pt = detail::prepare(s, x);
  const std::size_t k = s.k;
  const double m = s.m;
  const double p = s.p;
  DecompositionTerms t;
  double diag_pm2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) diag_pm2 += delta(i, i) * pt.r_pm2[i];
  if (pt.zero) {
    // only x_i^{p-2} with p = 2 survives; t3 and t3_minus coincide
    t.t3 = -m * (p - 1.0) * detail::zero_factor(s, 1.0) * diag_pm2;
    t.t3_minus = t.t3;
    return t;
  }
  double off = 0.0;
  double diag_2p2 = 0.0;
  double full = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double term = delta(i, j) * pt.r_pm1[i] * pt.r_pm1[j];
      full += term;
      if (i == j)
        diag_2p2 += term;
      else
        off += term;
    }
  }
  const double f2 = detail::scaled_factor(s, pt, 2.0);
  const double f1 = detail::scaled_factor(s, pt, 1.0);
  const double f_floor = std::exp((m - 2.0) * pt.log_max + (m / p - 2.0) * pt.log_s + pt.log_floor);
  t.t1 = -m * (m - 1.0) * f2 * off;
  t.t2 = -m * (m - 1.0) * f2 * diag_2p2;
  t.t3 = m * (p - 1.0) * (-f1 * diag_pm2 + f2 * full);
  t.t3_minus = -m * (p - 1.0) * f_floor * diag_pm2;
  return t;
}

/// (max|x_i|)^m <= f_p(x) <= 2^{m/p} [k^{m/p} (max|x_i|)^m + e^{-pm}],
/// each side checked with 1e-12 relative slack.
inline bool sandwich_check(const SmoothMaxParams& s, std::span<const double> x) {
  constexpr double slack = 1e-12;
  const double f = f_p_eval(s, x);
  double mx = 0.0;
  for (double v : x) mx = std::max(mx, std::abs(v));
  const double p = s.p;
  const double lower = std::pow(mx, s.m);
  const double upper =
      std::exp2(s.m / p) * (std::pow(static_cast<double>(s.k), s.m / p) * lower + std::exp(-p * s.m));
  return lower <= f * (1.0 + slack) && f <= upper * (1.0 + slack);
}

}  // namespace supmax
