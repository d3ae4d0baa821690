#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "supmax/error.hpp"

namespace supmax {

/// Dense k x k matrix, row-major.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t k, double fill = 0.0) : k_(k), a_(k * k, fill) {}

  SquareMatrix(std::initializer_list<std::initializer_list<double>> rows) : k_(rows.size()) {
    a_.reserve(k_ * k_);
    for (const auto& row : rows) {
      if (row.size() != k_) fail(ErrorKind::DimensionError, "matrix literal is not square");
      a_.insert(a_.end(), row.begin(), row.end());
    }
  }

  static SquareMatrix identity(std::size_t k) {
    SquareMatrix m(k);
    for (std::size_t i = 0; i < k; ++i) m(i, i) = 1.0;
    return m;
  }

  static SquareMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    SquareMatrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size())
        fail(ErrorKind::DimensionError, "row " + std::to_string(i) + " has " +
                                            std::to_string(rows[i].size()) + " entries, expected " +
                                            std::to_string(rows.size()));
      std::copy(rows[i].begin(), rows[i].end(), m.a_.begin() + static_cast<std::ptrdiff_t>(i * m.k_));
    }
    return m;
  }

  static SquareMatrix from_row_major(std::size_t k, std::span<const double> data) {
    if (data.size() != k * k)
      fail(ErrorKind::DimensionError,
           "expected " + std::to_string(k * k) + " entries, got " + std::to_string(data.size()));
    SquareMatrix m(k);
    std::copy(data.begin(), data.end(), m.a_.begin());
    return m;
  }

  std::size_t dim() const noexcept { return k_; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return a_[i * k_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * k_ + j]; }
  std::span<const double> data() const noexcept { return a_; }
  std::span<double> data() noexcept { return a_; }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : a_) m = std::max(m, std::abs(v));
    return m;
  }

  bool operator==(const SquareMatrix&) const = default;

 private:
  std::size_t k_ = 0;
  std::vector<double> a_;
};

inline SquareMatrix operator-(const SquareMatrix& a, const SquareMatrix& b) {
  SquareMatrix r(a.dim());
  for (std::size_t i = 0; i < a.data().size(); ++i) r.data()[i] = a.data()[i] - b.data()[i];
  return r;
}

inline constexpr double kPsdTolerance = 1e-10;
inline constexpr double kAsymmetryTolerance = 1e-8;
inline constexpr double kSingularTolerance = 1e-12;

namespace detail {

inline double smallest_eigenvalue(const SquareMatrix& m) {
  const auto k = static_cast<Eigen::Index>(m.dim());
  Eigen::MatrixXd a(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      a(i, j) = m(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

/// Lower-triangular L with L L^T = a; nullopt when a pivot drops to or below
/// `pivot_floor`.
inline std::optional<SquareMatrix> try_cholesky(const SquareMatrix& a, double pivot_floor) {
  const std::size_t k = a.dim();
  SquareMatrix l(k);
  for (std::size_t j = 0; j < k; ++j) {
    double d = a(j, j);
    for (std::size_t t = 0; t < j; ++t) d -= l(j, t) * l(j, t);
    if (!(d > pivot_floor)) return std::nullopt;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < k; ++i) {
      double s = a(i, j);
      for (std::size_t t = 0; t < j; ++t) s -= l(i, t) * l(j, t);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

}  // namespace detail

/// Validated covariance matrix of a centered Gaussian vector.
///
/// Construction symmetrizes the input by averaging with its transpose and
/// rejects anything that is not PSD up to kPsdTolerance * scale(), where
/// scale() = 1 + max |entry|. A Cholesky factor is attached when the matrix
/// is strictly positive definite; the object is immutable afterwards.
class CovarianceMatrix {
 public:
  static CovarianceMatrix make(const SquareMatrix& raw) {
    const std::size_t k = raw.dim();
    if (k == 0) fail(ErrorKind::DimensionError, "covariance must have dimension >= 1");
    for (double v : raw.data())
      if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "covariance entry is NaN or infinite");

    const double scale = 1.0 + raw.max_abs();
    SquareMatrix sym(k);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        if (std::abs(raw(i, j) - raw(j, i)) > kAsymmetryTolerance * scale)
          fail(ErrorKind::NotSymmetric, "entries (" + std::to_string(i) + "," + std::to_string(j) +
                                            ") and its transpose differ");
        sym(i, j) = i == j ? raw(i, i) : 0.5 * (raw(i, j) + raw(j, i));
      }
    }
    for (std::size_t i = 0; i < k; ++i)
      if (sym(i, i) < 0.0) fail(ErrorKind::NotPSD, "negative variance at index " + std::to_string(i));

    const double lambda_min = detail::smallest_eigenvalue(sym);
    if (lambda_min < -kPsdTolerance * scale)
      fail(ErrorKind::NotPSD, "smallest eigenvalue " + std::to_string(lambda_min) + " below tolerance");

    CovarianceMatrix c;
    c.entries_ = std::move(sym);
    c.scale_ = scale;
    c.chol_ = detail::try_cholesky(c.entries_, kSingularTolerance * scale);
    return c;
  }

  std::size_t dim() const noexcept { return entries_.dim(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return entries_(i, j); }
  const SquareMatrix& entries() const noexcept { return entries_; }
  /// 1 + max |entry|; the unit for every relative tolerance.
  double scale() const noexcept { return scale_; }
  const std::optional<SquareMatrix>& cholesky_factor() const noexcept { return chol_; }
  bool strictly_pd() const noexcept { return chol_.has_value(); }

  double max_diagonal() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) m = std::max(m, entries_(i, i));
    return m;
  }

  bool operator==(const CovarianceMatrix& o) const { return entries_ == o.entries_; }

 private:
  CovarianceMatrix() = default;

  SquareMatrix entries_;
  double scale_ = 1.0;
  std::optional<SquareMatrix> chol_;
};

inline CovarianceMatrix make_covariance(const SquareMatrix& raw) { return CovarianceMatrix::make(raw); }

inline CovarianceMatrix make_covariance(std::initializer_list<std::initializer_list<double>> rows) {
  return CovarianceMatrix::make(SquareMatrix(rows));
}

inline CovarianceMatrix make_covariance(const std::vector<std::vector<double>>& rows) {
  return CovarianceMatrix::make(SquareMatrix::from_rows(rows));
}

/// Lower Cholesky factor. Throws SingularMatrix when a pivot falls below
/// 1e-12 * scale; callers are expected to regularize and retry.
inline SquareMatrix cholesky(const CovarianceMatrix& c) {
  if (!c.cholesky_factor())
    fail(ErrorKind::SingularMatrix, "covariance is not strictly positive definite; regularize first");
  return *c.cholesky_factor();
}

namespace detail {
inline void check_index(const CovarianceMatrix& c, std::size_t i, std::size_t j) {
  if (i >= c.dim() || j >= c.dim())
    fail(ErrorKind::IndexError, "index (" + std::to_string(i) + "," + std::to_string(j) +
                                    ") out of range for dimension " + std::to_string(c.dim()));
}
}  // namespace detail

/// E[(X_i - X_j)^2].
inline double increment_variance(const CovarianceMatrix& c, std::size_t i, std::size_t j) {
  detail::check_index(c, i, j);
  if (i == j) return 0.0;
  return c(i, i) + c(j, j) - 2.0 * c(i, j);
}

inline double correlation(const CovarianceMatrix& c, std::size_t i, std::size_t j) {
  detail::check_index(c, i, j);
  if (!(c(i, i) > 0.0) || !(c(j, j) > 0.0))
    fail(ErrorKind::ZeroVariance, "zero variance at index " + std::to_string(c(i, i) > 0.0 ? j : i));
  const double r = c(i, j) / std::sqrt(c(i, i) * c(j, j));
  constexpr double overshoot = 1e-12;
  if (std::abs(r) > 1.0 + overshoot)
    fail(ErrorKind::NotPSD, "correlation magnitude exceeds 1");
  return std::clamp(r, -1.0, 1.0);
}

/// Covariances of X and Y on a common index set.
struct GaussianPair {
  CovarianceMatrix sigma_x;
  CovarianceMatrix sigma_y;

  GaussianPair(CovarianceMatrix x, CovarianceMatrix y) : sigma_x(std::move(x)), sigma_y(std::move(y)) {
    if (sigma_x.dim() != sigma_y.dim())
      fail(ErrorKind::DimensionMismatch, "pair dimensions differ: " + std::to_string(sigma_x.dim()) +
                                             " vs " + std::to_string(sigma_y.dim()));
  }

  std::size_t dim() const noexcept { return sigma_x.dim(); }
  double scale() const noexcept { return std::max(sigma_x.scale(), sigma_y.scale()); }
  bool strictly_pd() const noexcept { return sigma_x.strictly_pd() && sigma_y.strictly_pd(); }
};

struct RegularizationParams {
  double epsilon;

  explicit RegularizationParams(double eps) : epsilon(eps) {
    if (!(eps > 0.0) || !std::isfinite(eps))
      fail(ErrorKind::InvalidParameter, "regularization epsilon must be positive and finite");
  }
};

/// Noise scale used when sampling needs strict positive definiteness and the
/// caller did not choose one: 1e-6 * sqrt(max diagonal), floored at 1e-6.
inline double default_epsilon(const GaussianPair& p) {
  const double d = std::max(p.sigma_x.max_diagonal(), p.sigma_y.max_diagonal());
  return d > 0.0 ? 1e-6 * std::sqrt(d) : 1e-6;
}

inline double default_epsilon(const CovarianceMatrix& c) {
  const double d = c.max_diagonal();
  return d > 0.0 ? 1e-6 * std::sqrt(d) : 1e-6;
}

inline CovarianceMatrix add_to_diagonal(const CovarianceMatrix& c, double shift) {
  SquareMatrix e = c.entries();
  for (std::size_t i = 0; i < e.dim(); ++i) e(i, i) += shift;
  return CovarianceMatrix::make(e);
}

/// X + eps*xi and Y + eps*xi with one shared xi ~ N(0, I): eps^2 is added to
/// every variance of both sides, off-diagonal entries are untouched.
inline GaussianPair regularize(const GaussianPair& p, const RegularizationParams& r) {
  const double shift = r.epsilon * r.epsilon;
  return GaussianPair(add_to_diagonal(p.sigma_x, shift), add_to_diagonal(p.sigma_y, shift));
}

}  // namespace supmax
