#pragma once

// Adaptive Gauss-Kronrod quadrature (15-point Kronrod, embedded 7-point
// Gauss rule) with global bisection of the panel carrying the largest error,
// and an iterated 2-d variant. All panels are processed in a deterministic
// order, so results are bit-reproducible.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "supmax/error.hpp"

namespace supmax::quad {

struct QuadratureOptions {
  double rel_tol = 1e-9;
  double abs_tol = 0.0;
  /// Total integrand evaluations allowed, shared by nested integrals.
  std::uint64_t max_evaluations = 10'000'000;
};

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  std::uint64_t evaluations = 0;
};

namespace detail {

inline constexpr std::array<double, 8> kXgk{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kWgk{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// weights of the 7-point Gauss rule at kXgk[1], kXgk[3], kXgk[5], kXgk[7]
inline constexpr std::array<double, 4> kWg{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a = 0.0;
  double b = 0.0;
  double value = 0.0;
  double error = 0.0;
  std::uint64_t order = 0;  // creation index; breaks ties deterministically

  bool operator<(const Panel& o) const {
    if (error != o.error) return error < o.error;
    return order > o.order;
  }
};

/// One 15-point Kronrod panel with the QUADPACK error estimate.
template <class F>
Panel gk15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double resk = fc * kWgk[7];
  double resg = fc * kWg[3];
  double resabs = std::abs(resk);
  std::array<double, 7> f1{}, f2{};
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    f1[j] = f(center - dx);
    f2[j] = f(center + dx);
    const double s = f1[j] + f2[j];
    resk += kWgk[j] * s;
    resabs += kWgk[j] * (std::abs(f1[j]) + std::abs(f2[j]));
    if (j % 2 == 1) resg += kWg[j / 2] * s;
  }
  const double mean = 0.5 * resk;
  double resasc = kWgk[7] * std::abs(fc - mean);
  for (std::size_t j = 0; j < 7; ++j) resasc += kWgk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));

  Panel p{a, b, resk * half, 0.0, 0};
  resabs *= std::abs(half);
  resasc *= std::abs(half);
  double err = std::abs((resk - resg) * half);
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
  p.error = err;
  return p;
}

}  // namespace detail

/// Evaluation budget shared by an integral and everything nested inside it.
class Budget {
 public:
  explicit Budget(std::uint64_t limit) : limit_(limit) {}

  void charge(std::uint64_t evals) {
    used_ += evals;
    if (used_ > limit_)
      fail(ErrorKind::QuadratureNonconvergence,
           "quadrature exceeded its budget of " + std::to_string(limit_) + " evaluations");
  }
  std::uint64_t used() const noexcept { return used_; }

 private:
  std::uint64_t limit_;
  std::uint64_t used_ = 0;
};

/// Integrates f over [points.front(), points.back()], starting from one panel
/// per consecutive pair of points (kinks and peaks belong there).
template <class F>
QuadratureResult integrate(F&& f, std::span<const double> points, const QuadratureOptions& opts, Budget& budget) {
  if (points.size() < 2) fail(ErrorKind::InvalidParameter, "integration needs at least two points");
  for (double x : points)
    if (!std::isfinite(x)) fail(ErrorKind::InvalidParameter, "integration limits must be finite");
  std::vector<double> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  constexpr std::uint64_t kPanelEvals = 15;
  constexpr std::size_t kMaxPanels = 20000;
  const std::uint64_t start = budget.used();
  std::priority_queue<detail::Panel> heap;
  std::vector<detail::Panel> done;  // panels too narrow to split further
  std::uint64_t order = 0;
  double total = 0.0;
  double error = 0.0;
  auto push = [&](detail::Panel p) {
    p.order = order++;
    total += p.value;
    error += p.error;
    heap.push(p);
  };
  for (std::size_t q = 0; q + 1 < pts.size(); ++q) {
    budget.charge(kPanelEvals);
    push(detail::gk15(f, pts[q], pts[q + 1]));
  }

  const double width = pts.back() - pts.front();
  while (!heap.empty()) {
    if (error <= std::max(opts.abs_tol, opts.rel_tol * std::abs(total))) break;
    if (heap.size() + done.size() > kMaxPanels)
      fail(ErrorKind::QuadratureNonconvergence, "quadrature panel limit reached");
    const detail::Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (worst.b - worst.a < 1e-13 * width || mid <= worst.a || mid >= worst.b) {
      done.push_back(worst);
      continue;
    }
    total -= worst.value;
    error -= worst.error;
    budget.charge(2 * kPanelEvals);
    push(detail::gk15(f, worst.a, mid));
    push(detail::gk15(f, mid, worst.b));
  }

  // Re-sum in position order so the running-total rounding does not leak out.
  std::vector<detail::Panel> all = std::move(done);
  while (!heap.empty()) {
    all.push_back(heap.top());
    heap.pop();
  }
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
  QuadratureResult r;
  for (const auto& p : all) {
    r.value += p.value;
    r.abs_error += p.error;
  }
  r.evaluations = budget.used() - start;
  return r;
}

template <class F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
  Budget budget(opts.max_evaluations);
  const std::array<double, 2> pts{a, b};
  return integrate(f, std::span<const double>(pts), opts, budget);
}

template <class F>
QuadratureResult integrate(F&& f, std::span<const double> points, const QuadratureOptions& opts = {}) {
  Budget budget(opts.max_evaluations);
  return integrate(f, points, opts, budget);
}

/// Iterated integral  int dx int dy f(x, y)  with x over `x_points` and, for
/// each x, y over `y_points(x)` (a sorted list of limits and breakpoints).
/// Inner integrals run at a tenth of the outer relative tolerance; the largest
/// inner error times the x-range is added to the reported bound.
template <class F, class YPoints>
QuadratureResult integrate_2d(F&& f, std::span<const double> x_points, YPoints&& y_points,
                              const QuadratureOptions& opts = {}) {
  Budget budget(opts.max_evaluations);
  QuadratureOptions inner = opts;
  inner.rel_tol = opts.rel_tol / 10.0;
  inner.abs_tol = opts.abs_tol / 10.0;
  double inner_error = 0.0;
  auto outer = [&](double x) {
    const std::vector<double> ys = y_points(x);
    const auto r = integrate([&](double y) { return f(x, y); }, std::span<const double>(ys), inner, budget);
    inner_error = std::max(inner_error, r.abs_error);
    return r.value;
  };
  QuadratureResult r = integrate(outer, x_points, opts, budget);
  const auto [lo, hi] = std::minmax_element(x_points.begin(), x_points.end());
  r.abs_error += inner_error * (*hi - *lo);
  r.evaluations = budget.used();
  return r;
}

}  // namespace supmax::quad
