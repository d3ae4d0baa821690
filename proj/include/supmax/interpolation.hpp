#pragma once

// Gaussian interpolation between independent X ~ N(0, Sigma^X) and
// Y ~ N(0, Sigma^Y):  Z(u) = sqrt(u) X + sqrt(1-u) Y,  Cov Z(u) = u Sigma^X + (1-u) Sigma^Y.
//
// gi_check estimates d/du E f(Z(u)) by a central difference in u and compares
// it with (1/2) sum_ij (Sigma^X - Sigma^Y)_ij E[d2f/dx_i dx_j (Z(u))]. Z(u) is
// sampled as L(u) z with L(u) the Cholesky factor of Cov Z(u) and z shared
// across all u offsets (common random numbers).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "supmax/conditions.hpp"
#include "supmax/error.hpp"
#include "supmax/gaussian_core.hpp"
#include "supmax/moments.hpp"
#include "supmax/parallel.hpp"
#include "supmax/smooth_max.hpp"

namespace supmax {

inline constexpr double kDefaultFdStep = 1e-3;
inline constexpr std::uint32_t kInterpolationStream = 1;

/// u Sigma^X + (1-u) Sigma^Y.
inline CovarianceMatrix interp_cov(const GaussianPair& p, double u) {
  if (!(u >= 0.0 && u <= 1.0)) fail(ErrorKind::InvalidParameter, "interpolation parameter must lie in [0, 1]");
  if (u == 1.0) return p.sigma_x;
  if (u == 0.0) return p.sigma_y;
  const std::size_t k = p.dim();
  SquareMatrix e(k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) e(i, j) = u * p.sigma_x(i, j) + (1.0 - u) * p.sigma_y(i, j);
  return CovarianceMatrix::make(e);
}

/// Test functions for the interpolation identity.
struct Probe {
  enum class Kind { quadratic, smooth_max };

  Kind kind = Kind::smooth_max;
  // quadratic probe f(x) = x_i x_j
  std::size_t i = 0;
  std::size_t j = 1;
  std::optional<SmoothMaxParams> smooth;

  static Probe quadratic(std::size_t i, std::size_t j) { return Probe{Kind::quadratic, i, j, std::nullopt}; }
  static Probe smooth_max(const SmoothMaxParams& s) { return Probe{Kind::smooth_max, 0, 0, s}; }

  std::string name() const {
    if (kind == Kind::quadratic) return "quadratic(" + std::to_string(i) + "," + std::to_string(j) + ")";
    std::string m = std::to_string(smooth->m);
    m.erase(m.find_last_not_of('0') + 1);
    if (m.back() == '.') m.pop_back();
    return "f_p(p=" + std::to_string(smooth->p) + ",m=" + m + ")";
  }

  double eval(std::span<const double> x) const {
    if (kind == Kind::quadratic) return x[i] * x[j];
    return f_p_eval(*smooth, x);
  }

  /// sum_ab w_ab d2f/dx_a dx_b
  double hessian_contract(std::span<const double> x, const SquareMatrix& w) const {
    if (kind == Kind::quadratic) return w(i, j) + w(j, i);
    return f_p_hessian_contract(*smooth, x, w);
  }

  /// d/du E f(Z(u)) when it has a closed form: x_i x_j gives Sigma^X_ij - Sigma^Y_ij,
  /// f_p with p = 2, m = 2 (sum x_i^2 + e^{-4}) gives tr(Sigma^X - Sigma^Y).
  std::optional<double> closed_form_derivative(const GaussianPair& pair) const {
    if (kind == Kind::quadratic) return pair.sigma_x(i, j) - pair.sigma_y(i, j);
    if (smooth->p == 2 && smooth->m == 2.0) {
      double tr = 0.0;
      for (std::size_t a = 0; a < pair.dim(); ++a) tr += pair.sigma_x(a, a) - pair.sigma_y(a, a);
      return tr;
    }
    return std::nullopt;
  }
};

/// One probe evaluated over a u-grid.
struct InterpCheckReport {
  std::string probe;
  double fd_step = kDefaultFdStep;
  std::vector<double> u_grid;
  std::vector<double> lhs_fd;          ///< central difference of u -> E f(Z(u))
  std::vector<double> rhs_gi;          ///< (1/2) sum_ij (Sigma^X - Sigma^Y)_ij E H_ij(Z(u))
  std::vector<double> discrepancy;     ///< |lhs - rhs|
  std::vector<double> se_combined;     ///< SE of the paired lhs - rhs samples
  std::vector<double> fd_bias;         ///< |g'''| h^2 / 6 bound from a 5-point stencil
  std::vector<double> fd_rounding;     ///< 64 eps |E f| / h, floating-point floor of the difference quotient
  std::vector<double> tolerance_used;  ///< 3 se_combined + fd_bias + fd_rounding
  std::vector<double> se_lhs;
  std::vector<double> se_rhs;
  std::optional<double> closed_form;   ///< exact derivative where known (constant in u)
  std::vector<bool> closed_form_ok;    ///< lhs and rhs each within 4 SE of closed_form
  std::optional<double> regularization_epsilon;

  bool passed() const {
    for (std::size_t q = 0; q < u_grid.size(); ++q)
      if (discrepancy[q] > tolerance_used[q]) return false;
    return std::all_of(closed_form_ok.begin(), closed_form_ok.end(), [](bool b) { return b; });
  }
};

namespace detail {

inline void check_u_grid(std::span<const double> grid, double h) {
  if (!(h > 0.0 && h < 0.1)) fail(ErrorKind::InvalidParameter, "finite-difference step must lie in (0, 0.1)");
  if (grid.empty()) fail(ErrorKind::InvalidParameter, "u-grid is empty");
  for (std::size_t q = 0; q < grid.size(); ++q) {
    if (!(grid[q] >= 2.0 * h && grid[q] <= 1.0 - 2.0 * h))
      fail(ErrorKind::InvalidParameter, "u-grid points must lie in [2h, 1-2h]");
    if (q > 0 && !(grid[q] > grid[q - 1])) fail(ErrorKind::InvalidParameter, "u-grid must be strictly increasing");
  }
}

inline void lower_times(const SquareMatrix& l, std::span<const double> z, std::span<double> out) noexcept {
  const std::size_t k = l.dim();
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j) s += l(i, j) * z[j];
    out[i] = s;
  }
}

/// Pair made strictly PD with the default epsilon when necessary.
inline std::pair<GaussianPair, std::optional<double>> strictly_pd_pair(const GaussianPair& p) {
  if (p.strictly_pd()) return {p, std::nullopt};
  const double eps = default_epsilon(p);
  GaussianPair reg = regularize(p, RegularizationParams(eps));
  if (!reg.strictly_pd()) fail(ErrorKind::SingularAfterRegularize, "pair still singular");
  return {reg, eps};
}

}  // namespace detail

/// Evenly spaced interior grid {1/(n+1), ..., n/(n+1)}.
inline std::vector<double> interior_grid(std::size_t points) {
  std::vector<double> g;
  for (std::size_t q = 1; q <= points; ++q) g.push_back(static_cast<double>(q) / static_cast<double>(points + 1));
  return g;
}

/// Checks the interpolation identity for every probe on every grid point.
/// All probes share the same samples.
inline std::vector<InterpCheckReport> gi_check(const GaussianPair& pair, std::span<const Probe> probes,
                                               std::span<const double> u_grid, std::uint64_t n,
                                               std::uint64_t seed, double h = kDefaultFdStep) {
  detail::check_u_grid(u_grid, h);
  if (n < kMinSamples) fail(ErrorKind::InvalidParameter, "sample count must be at least 1000");
  const std::size_t k = pair.dim();
  for (const auto& pr : probes) {
    if (pr.kind == Probe::Kind::quadratic && (pr.i >= k || pr.j >= k))
      fail(ErrorKind::IndexError, "quadratic probe index out of range");
    if (pr.kind == Probe::Kind::smooth_max && pr.smooth->k != k)
      fail(ErrorKind::DimensionMismatch, "smooth-max probe dimension differs from pair");
  }
  const auto [pd_pair, eps] = detail::strictly_pd_pair(pair);
  const SquareMatrix weight = pd_pair.sigma_x.entries() - pd_pair.sigma_y.entries();
  const std::vector<Probe> probe_list(probes.begin(), probes.end());
  const std::size_t n_probes = probe_list.size();

  std::vector<InterpCheckReport> reports(n_probes);
  for (std::size_t a = 0; a < n_probes; ++a) {
    auto& r = reports[a];
    r.probe = probe_list[a].name();
    r.fd_step = h;
    r.u_grid.assign(u_grid.begin(), u_grid.end());
    r.closed_form = probe_list[a].closed_form_derivative(pd_pair);
    r.regularization_epsilon = eps;
  }

  constexpr std::array<double, 5> offsets{-2.0, -1.0, 0.0, 1.0, 2.0};
  for (double u : u_grid) {
    std::array<SquareMatrix, 5> chol;
    for (std::size_t o = 0; o < offsets.size(); ++o) chol[o] = cholesky(interp_cov(pd_pair, u + offsets[o] * h));

    // channels per probe: fd, rhs, fd - rhs, third-derivative stencil, f at u
    struct Kernel {
      const std::array<SquareMatrix, 5>* chol;
      const std::vector<Probe>* probes;
      const SquareMatrix* weight;
      double h;
      std::vector<double> zs;  // 5 x k
      void operator()(std::span<const double> z, std::span<double> out) {
        const std::size_t k = z.size();
        for (std::size_t o = 0; o < 5; ++o) detail::lower_times((*chol)[o], z, std::span<double>(zs).subspan(o * k, k));
        auto at = [&](std::size_t o) { return std::span<const double>(zs).subspan(o * k, k); };
        for (std::size_t a = 0; a < probes->size(); ++a) {
          const Probe& pr = (*probes)[a];
          const double fm2 = pr.eval(at(0));
          const double fm1 = pr.eval(at(1));
          const double f0 = pr.eval(at(2));
          const double fp1 = pr.eval(at(3));
          const double fp2 = pr.eval(at(4));
          const double fd = (fp1 - fm1) / (2.0 * h);
          const double rhs = 0.5 * pr.hessian_contract(at(2), *weight);
          out[5 * a] = fd;
          out[5 * a + 1] = rhs;
          out[5 * a + 2] = fd - rhs;
          out[5 * a + 3] = (fp2 - 2.0 * fp1 + 2.0 * fm1 - fm2) / (2.0 * h * h * h);
          out[5 * a + 4] = f0;
        }
      }
    };
    const Kernel kernel{&chol, &probe_list, &weight, h, std::vector<double>(5 * k)};
    const auto stats = parallel::monte_carlo(n, seed, kInterpolationStream, k, 5 * n_probes, kernel);

    for (std::size_t a = 0; a < n_probes; ++a) {
      auto& r = reports[a];
      const auto& fd = stats[5 * a];
      const auto& rhs = stats[5 * a + 1];
      const auto& diff = stats[5 * a + 2];
      const auto& third = stats[5 * a + 3];
      const auto& centre = stats[5 * a + 4];
      r.lhs_fd.push_back(fd.mean);
      r.rhs_gi.push_back(rhs.mean);
      r.discrepancy.push_back(std::abs(fd.mean - rhs.mean));
      r.se_combined.push_back(diff.std_error());
      r.se_lhs.push_back(fd.std_error());
      r.se_rhs.push_back(rhs.std_error());
      const double bias = (std::abs(third.mean) + 3.0 * third.std_error()) * h * h / 6.0;
      r.fd_bias.push_back(bias);
      const double rounding = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(centre.mean) / h;
      r.fd_rounding.push_back(rounding);
      r.tolerance_used.push_back(3.0 * diff.std_error() + bias + rounding);
      if (r.closed_form) {
        const double exact = *r.closed_form;
        const double floor = 1e-10 * pd_pair.scale();
        const bool lhs_ok = std::abs(fd.mean - exact) <= 4.0 * fd.std_error() + bias + rounding + floor;
        const bool rhs_ok = std::abs(rhs.mean - exact) <= 4.0 * rhs.std_error() + floor;
        r.closed_form_ok.push_back(lhs_ok && rhs_ok);
      }
    }
  }
  return reports;
}

inline InterpCheckReport gi_check(const GaussianPair& pair, const SmoothMaxParams& s, std::span<const double> u_grid,
                                  std::uint64_t n, std::uint64_t seed, double h = kDefaultFdStep) {
  const Probe probe = Probe::smooth_max(s);
  return gi_check(pair, std::span<const Probe>(&probe, 1), u_grid, n, seed, h).front();
}

/// Monte Carlo means of the decomposition pieces at Z(u).
struct DerivativeTerms {
  double u = 0.0;
  int p = 2;
  double m = 2.0;
  std::uint64_t n_samples = 0;
  double mean_t1 = 0.0, se_t1 = 0.0;
  double mean_t2 = 0.0, se_t2 = 0.0;
  double mean_t3 = 0.0, se_t3 = 0.0;
  double mean_t3_minus = 0.0, se_t3_minus = 0.0;
  /// T1 + T3 - T3_minus, the part whose mean is bounded by C/p.
  double mean_remainder = 0.0, se_remainder = 0.0;
  /// Mean of T1 + T2 + T3; equals sum_ij (Sigma^X - Sigma^Y)_ij E H_ij.
  double mean_total = 0.0;
  /// Samples with T2 > 0 (zero whenever the strong condition holds).
  std::uint64_t positive_t2 = 0;
  double max_t2 = 0.0;
};

inline DerivativeTerms derivative_terms(const GaussianPair& pair, const SmoothMaxParams& s, double u,
                                        std::uint64_t n, std::uint64_t seed) {
  if (!check_strong_condition(pair).strong_holds())
    fail(ErrorKind::StrongConditionViolated, "decomposition bounds need 2|Delta_ij| <= Delta_ii + Delta_jj");
  if (s.k != pair.dim()) fail(ErrorKind::DimensionMismatch, "smooth-max dimension differs from pair");
  if (n < kMinSamples) fail(ErrorKind::InvalidParameter, "sample count must be at least 1000");
  const auto [pd_pair, eps] = detail::strictly_pd_pair(pair);
  const SquareMatrix chol = cholesky(interp_cov(pd_pair, u));
  const SquareMatrix delta = pd_pair.sigma_y.entries() - pd_pair.sigma_x.entries();

  struct Kernel {
    const SquareMatrix* chol;
    const SquareMatrix* delta;
    SmoothMaxParams s;
    std::vector<double> x;
    void operator()(std::span<const double> z, std::span<double> out) {
      detail::lower_times(*chol, z, x);
      const auto t = decomposition_terms(s, x, *delta);
      out[0] = t.t1;
      out[1] = t.t2;
      out[2] = t.t3;
      out[3] = t.t3_minus;
      out[4] = t.t1 + t.t3 - t.t3_minus;
      out[5] = t.t1 + t.t2 + t.t3;
      out[6] = t.t2 > 0.0 ? 1.0 : 0.0;
    }
  };
  const Kernel kernel{&chol, &delta, s, std::vector<double>(pair.dim())};
  const auto st = parallel::monte_carlo(n, seed, kInterpolationStream, pair.dim(), 7, kernel);

  DerivativeTerms d;
  d.u = u;
  d.p = s.p;
  d.m = s.m;
  d.n_samples = n;
  d.mean_t1 = st[0].mean;
  d.se_t1 = st[0].std_error();
  d.mean_t2 = st[1].mean;
  d.se_t2 = st[1].std_error();
  d.mean_t3 = st[2].mean;
  d.se_t3 = st[2].std_error();
  d.mean_t3_minus = st[3].mean;
  d.se_t3_minus = st[3].std_error();
  d.mean_remainder = st[4].mean;
  d.se_remainder = st[4].std_error();
  d.mean_total = st[5].mean;
  d.positive_t2 = static_cast<std::uint64_t>(st[6].sum);
  d.max_t2 = st[1].max;
  return d;
}

/// Variance interval and correlation cap along the interpolation path of a
/// two-coordinate slice (i, j), evaluated in closed form.
struct PathBoundReport {
  std::size_t i = 0;
  std::size_t j = 1;
  std::vector<double> u_grid;
  std::vector<double> var_1;
  std::vector<double> var_2;
  std::vector<double> corr;
  double v_min = 0.0;
  double v_max = 0.0;
  double corr_cap = 0.0;
  std::vector<bool> var_ok;
  std::vector<bool> corr_ok;
  /// max over u of |(1 - ratio) - t(1-t)(sqrt(ad) - sqrt(bc))^2 / denom|
  double max_identity_residual = 0.0;

  std::size_t violations() const {
    std::size_t v = 0;
    for (std::size_t q = 0; q < u_grid.size(); ++q) v += (var_ok[q] ? 0 : 1) + (corr_ok[q] ? 0 : 1);
    return v;
  }
  bool all_ok() const { return violations() == 0; }
};

inline PathBoundReport lemma3_check(const GaussianPair& pair, std::size_t i, std::size_t j,
                                    std::span<const double> u_grid) {
  detail::check_index(pair.sigma_x, i, j);
  if (i == j) fail(ErrorKind::InvalidParameter, "path bounds need two distinct coordinates");
  for (double u : u_grid)
    if (!(u >= 0.0 && u <= 1.0)) fail(ErrorKind::InvalidParameter, "u-grid points must lie in [0, 1]");
  const double a = pair.sigma_x(i, i);  // Var X_1
  const double b = pair.sigma_y(i, i);  // Var Y_1
  const double c = pair.sigma_x(j, j);  // Var X_2
  const double d = pair.sigma_y(j, j);  // Var Y_2
  const double rho_x = correlation(pair.sigma_x, i, j);
  const double rho_y = correlation(pair.sigma_y, i, j);

  constexpr double slack = 1e-12;
  PathBoundReport r;
  r.i = i;
  r.j = j;
  r.u_grid.assign(u_grid.begin(), u_grid.end());
  r.v_min = std::min({a, b, c, d});
  r.v_max = std::max({a, b, c, d});
  r.corr_cap = std::max(std::abs(rho_x), std::abs(rho_y));
  const double sac = std::sqrt(a * c);
  const double sbd = std::sqrt(b * d);
  for (double t : u_grid) {
    const double v1 = t * a + (1.0 - t) * b;
    const double v2 = t * c + (1.0 - t) * d;
    const double denom = v1 * v2;
    const double rho = (t * rho_x * sac + (1.0 - t) * rho_y * sbd) / std::sqrt(denom);
    r.var_1.push_back(v1);
    r.var_2.push_back(v2);
    r.corr.push_back(rho);
    const double lo = r.v_min * (1.0 - slack);
    const double hi = r.v_max * (1.0 + slack);
    r.var_ok.push_back(v1 >= lo && v1 <= hi && v2 >= lo && v2 <= hi);
    r.corr_ok.push_back(std::abs(rho) <= r.corr_cap + slack);
    const double mix = t * sac + (1.0 - t) * sbd;
    const double gap = std::sqrt(a * d) - std::sqrt(b * c);
    const double residual = (1.0 - mix * mix / denom) - t * (1.0 - t) * gap * gap / denom;
    r.max_identity_residual = std::max(r.max_identity_residual, std::abs(residual));
  }
  return r;
}

inline PathBoundReport lemma3_check(const GaussianPair& pair, std::span<const double> u_grid) {
  if (pair.dim() != 2) fail(ErrorKind::DimensionMismatch, "path bounds are stated for two-dimensional pairs");
  return lemma3_check(pair, 0, 1, u_grid);
}

/// Path bounds for every coordinate pair i < j.
inline std::vector<PathBoundReport> lemma3_slices(const GaussianPair& pair, std::span<const double> u_grid) {
  std::vector<PathBoundReport> out;
  for (std::size_t i = 0; i < pair.dim(); ++i)
    for (std::size_t j = i + 1; j < pair.dim(); ++j) out.push_back(lemma3_check(pair, i, j, u_grid));
  return out;
}

/// {0, 1/(n-1), ..., 1}.
inline std::vector<double> closed_grid(std::size_t points) {
  std::vector<double> g;
  if (points == 1) return {0.5};
  for (std::size_t q = 0; q < points; ++q) g.push_back(static_cast<double>(q) / static_cast<double>(points - 1));
  return g;
}

}  // namespace supmax
