#pragma once

// Randomized instance families and the end-to-end verification suite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "supmax/conditions.hpp"
#include "supmax/error.hpp"
#include "supmax/gaussian_core.hpp"
#include "supmax/interpolation.hpp"
#include "supmax/moments.hpp"
#include "supmax/rng.hpp"
#include "supmax/smooth_max.hpp"

namespace supmax {

enum class Family { strong_pair, sf_only_pair, random_psd };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::strong_pair: return "strong_pair";
    case Family::sf_only_pair: return "sf_only_pair";
    case Family::random_psd: return "random_psd";
  }
  return "unknown";
}

struct InstanceSpec {
  std::size_t k = 2;
  Family family = Family::strong_pair;
  double scale = 1.0;
  std::uint64_t seed = 0;
  double slack_factor = 1.0;
};

namespace detail {
inline constexpr std::uint32_t kPsdStream = 16;
inline constexpr std::uint32_t kDeltaStream = 17;
inline constexpr std::uint32_t kInstanceStream = 18;
inline constexpr std::uint32_t kSpotStream = 19;
}  // namespace detail

/// G G^T * scale / k with G a k x k matrix of standard normals.
inline CovarianceMatrix gen_psd(std::size_t k, double scale, std::uint64_t seed) {
  if (k == 0) fail(ErrorKind::InvalidParameter, "dimension must be >= 1");
  if (!(scale > 0.0) || !std::isfinite(scale)) fail(ErrorKind::InvalidParameter, "scale must be positive");
  rng::CounterRng gen(seed, detail::kPsdStream);
  SquareMatrix g(k);
  for (double& v : g.data()) v = gen.normal();
  SquareMatrix s(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += g(i, t) * g(j, t);
      s(i, j) = s(j, i) = acc * scale / static_cast<double>(k);
    }
  }
  return CovarianceMatrix::make(s);
}

namespace detail {

inline void check_spec(const InstanceSpec& spec, Family expected) {
  if (spec.family != expected) fail(ErrorKind::InvalidParameter, "instance family does not match generator");
  if (spec.k == 0) fail(ErrorKind::InvalidParameter, "dimension must be >= 1");
  if (!(spec.slack_factor >= 1.0)) fail(ErrorKind::InvalidParameter, "slack factor must be >= 1");
}

}  // namespace detail

/// Sigma^Y = Sigma^X + S + D with S symmetric, zero diagonal, random sparsity,
/// and D_ii = slack * sum_j |S_ij|. Delta is diagonally dominant, so it is
/// PSD and satisfies 2|Delta_ij| <= Delta_ii + Delta_jj.
inline GaussianPair gen_strong_pair(const InstanceSpec& spec) {
  detail::check_spec(spec, Family::strong_pair);
  const std::size_t k = spec.k;
  const CovarianceMatrix sx = gen_psd(k, spec.scale, spec.seed);
  rng::CounterRng gen(spec.seed, detail::kDeltaStream);
  const double density = gen.uniform(0.2, 1.0);
  const double magnitude = spec.scale * gen.uniform(0.0, 0.5);
  SquareMatrix delta(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const bool keep = gen.uniform() <= density;
      const double v = magnitude * gen.normal();
      if (keep) delta(i, j) = delta(j, i) = v;
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      if (j != i) row += std::abs(delta(i, j));
    delta(i, i) = spec.slack_factor * row;
  }
  SquareMatrix sy = sx.entries();
  for (std::size_t q = 0; q < sy.data().size(); ++q) sy.data()[q] += delta.data()[q];
  GaussianPair pair(sx, CovarianceMatrix::make(sy));
  if (!check_strong_condition(pair).strong_holds())
    throw std::logic_error("strong-pair generator produced a pair violating the strong condition");
  return pair;
}

/// Pair satisfying the increment condition but not the strong one.
///
/// Delta_ij = (D_i + D_j)/2 - w_ij with w_ij >= 0 keeps every increment from
/// shrinking; w_01 > D_0 + D_1 forces 2|Delta_01| > Delta_00 + Delta_11.
/// Delta is shrunk until Sigma^X + Delta is PSD; draws are repeated until
/// both properties survive the shrinking.
inline GaussianPair gen_sf_only_pair(const InstanceSpec& spec) {
  detail::check_spec(spec, Family::sf_only_pair);
  if (spec.k < 2) fail(ErrorKind::InvalidParameter, "an increment-only pair needs k >= 2");
  const std::size_t k = spec.k;
  const CovarianceMatrix sx = gen_psd(k, spec.scale, spec.seed);
  rng::CounterRng gen(spec.seed, detail::kDeltaStream);
  constexpr int kMaxAttempts = 1000;
  double widen = 1.0;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    if (attempt > 0 && attempt % 100 == 0) widen *= 2.0;
    std::vector<double> d(k);
    for (double& v : d) v = spec.scale * widen * gen.uniform(-0.1, 0.5);
    SquareMatrix delta(k);
    for (std::size_t i = 0; i < k; ++i) {
      delta(i, i) = d[i];
      for (std::size_t j = i + 1; j < k; ++j) {
        double w = spec.scale * widen * gen.uniform(0.0, 0.5);
        if (i == 0 && j == 1) w = std::abs(d[0] + d[1]) + spec.scale * widen * gen.uniform(0.1, 0.6);
        delta(i, j) = delta(j, i) = 0.5 * (d[i] + d[j]) - w;
      }
    }
    // Shrinking keeps both properties (they are invariant under positive
    // scaling) until the strong-condition gap drops toward the tolerance.
    const double gap = std::abs(delta(0, 1)) * 2.0 - delta(0, 0) - delta(1, 1);
    const double min_t = 1e3 * kConditionTolerance * (1.0 + sx.entries().max_abs()) / gap;
    for (double t = 1.0; t > min_t; t *= 0.7) {
      SquareMatrix sy = sx.entries();
      for (std::size_t q = 0; q < sy.data().size(); ++q) sy.data()[q] += t * delta.data()[q];
      if (detail::smallest_eigenvalue(sy) < 1e-9 * (1.0 + sy.max_abs())) continue;
      GaussianPair pair(sx, CovarianceMatrix::make(sy));
      const auto report = analyze_conditions(pair);
      if (report.sf_holds() && !report.strong_holds()) return pair;
      break;
    }
  }
  fail(ErrorKind::GenerationExhausted, "no increment-only pair found after 1000 draws");
}

/// Two independent random covariances; no condition is guaranteed.
inline GaussianPair gen_random_pair(const InstanceSpec& spec) {
  detail::check_spec(spec, Family::random_psd);
  return GaussianPair(gen_psd(spec.k, spec.scale, spec.seed),
                      gen_psd(spec.k, spec.scale, rng::derive_seed(spec.seed, 1)));
}

inline GaussianPair generate(const InstanceSpec& spec) {
  switch (spec.family) {
    case Family::strong_pair: return gen_strong_pair(spec);
    case Family::sf_only_pair: return gen_sf_only_pair(spec);
    case Family::random_psd: return gen_random_pair(spec);
  }
  fail(ErrorKind::InvalidParameter, "unknown family");
}

struct SuiteConfig {
  std::uint64_t seed = 20240601;
  std::size_t strong_pairs = 200;
  std::size_t sf_only_pairs = 200;
  std::size_t k_min = 2;
  std::size_t k_max = 8;
  std::vector<double> m_values{1.0, 2.0, 3.0, 4.0};
  std::uint64_t n = kDefaultSamples;
  double scale = 1.0;
  double slack_factor = 1.0;
  /// Run the comparison with X and Y swapped on strong pairs and measure how
  /// often the decision layer flags the reversed ordering.
  bool adversarial = false;
  std::size_t lemma3_points = 101;
  std::size_t sandwich_points = 100;

  void validate() const {
    if (k_min < 1 || k_max < k_min) fail(ErrorKind::InvalidParameter, "need 1 <= k_min <= k_max");
    if (sf_only_pairs > 0 && k_min < 2) fail(ErrorKind::InvalidParameter, "increment-only pairs need k_min >= 2");
    if (!(scale > 0.0)) fail(ErrorKind::InvalidParameter, "scale must be positive");
    if (!(slack_factor >= 1.0)) fail(ErrorKind::InvalidParameter, "slack_factor must be >= 1");
    if (n < kMinSamples) fail(ErrorKind::InvalidParameter, "n must be at least 1000");
    if (m_values.empty()) fail(ErrorKind::InvalidParameter, "m_values is empty");
    for (double m : m_values)
      if (!(m >= 1.0) || !std::isfinite(m)) fail(ErrorKind::InvalidParameter, "every m must be >= 1");
    if (lemma3_points < 2) fail(ErrorKind::InvalidParameter, "lemma3_points must be >= 2");
  }
};

struct CheckTally {
  std::size_t instances = 0;
  std::size_t passed = 0;
  std::size_t failed = 0;
};

struct SuiteFailure {
  std::size_t index = 0;
  InstanceSpec spec;
  std::string check;
  std::string details;
};

struct SuiteReport {
  std::size_t n_instances = 0;
  std::map<std::string, CheckTally> checks;
  /// Largest z-score over all theorem comparisons (unswapped pairs).
  double worst_z = -std::numeric_limits<double>::infinity();
  /// Largest z-score over all increment-condition bound checks.
  double worst_corollary_z = -std::numeric_limits<double>::infinity();
  /// Adversarial mode: swapped comparisons whose gap, measured on an
  /// independent seed, exceeds 5 standard errors, and how many were flagged.
  std::size_t adversarial_powered = 0;
  std::size_t adversarial_detected = 0;
  std::vector<SuiteFailure> failures;

  double adversarial_power() const {
    return adversarial_powered == 0 ? 1.0
                                    : static_cast<double>(adversarial_detected) /
                                          static_cast<double>(adversarial_powered);
  }
  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& kv) { return kv.second.failed == 0; });
  }
};

/// Instance `index` of a suite: family from the index, dimension from the
/// derived seed.
inline InstanceSpec instance_spec(const SuiteConfig& config, std::size_t index) {
  InstanceSpec s;
  s.seed = rng::derive_seed(config.seed, index);
  s.family = index < config.strong_pairs ? Family::strong_pair : Family::sf_only_pair;
  rng::CounterRng gen(s.seed, detail::kInstanceStream);
  s.k = static_cast<std::size_t>(gen.uniform_int(config.k_min, config.k_max));
  if (s.family == Family::sf_only_pair) s.k = std::max<std::size_t>(s.k, 2);
  s.scale = config.scale;
  s.slack_factor = config.slack_factor;
  return s;
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

inline void record(SuiteReport& r, const std::string& check, bool ok, std::size_t index, const InstanceSpec& spec,
                   const std::string& details) {
  auto& t = r.checks[check];
  ++t.instances;
  if (ok) {
    ++t.passed;
  } else {
    ++t.failed;
    r.failures.push_back({index, spec, check, details});
  }
}

/// Sandwich bound at random points drawn at three radii.
inline std::string sandwich_spot_check(const SuiteConfig& config, const InstanceSpec& spec) {
  rng::CounterRng gen(spec.seed, kSpotStream);
  std::vector<double> x(spec.k);
  for (std::size_t q = 0; q < config.sandwich_points; ++q) {
    const double radius = std::pow(10.0, gen.uniform(-2.0, 2.0));
    for (double& v : x) v = radius * gen.normal();
    for (int p = 2; p <= 64; p *= 2) {
      for (double m : config.m_values) {
        if (!(p > 0.5 * m)) continue;
        const SmoothMaxParams s(p, m, spec.k);
        if (!sandwich_check(s, x)) return "sandwich bound fails at p=" + std::to_string(p) + " m=" + fmt(m);
      }
    }
  }
  return {};
}

inline std::string lemma3_all_slices(const GaussianPair& pair, std::size_t points) {
  const auto grid = closed_grid(points);
  for (const auto& r : lemma3_slices(pair, grid))
    if (!r.all_ok())
      return "path bound violated on slice (" + std::to_string(r.i) + "," + std::to_string(r.j) + ")";
  return {};
}

}  // namespace detail

/// Runs every check on every instance, in index order.
inline SuiteReport run_suite(const SuiteConfig& config) {
  config.validate();
  SuiteReport r;
  const std::size_t total = config.strong_pairs + config.sf_only_pairs;
  r.n_instances = total;
  for (std::size_t index = 0; index < total; ++index) {
    const InstanceSpec spec = instance_spec(config, index);
    std::optional<GaussianPair> pair;
    try {
      pair = generate(spec);
    } catch (const std::exception& e) {
      detail::record(r, spec.family == Family::strong_pair ? "strong_generator" : "sf_only_generator", false,
                     index, spec, e.what());
      continue;
    }
    const auto cond = analyze_conditions(*pair);

    if (spec.family == Family::strong_pair) {
      detail::record(r, "strong_generator", cond.strong_holds(), index, spec, "strong condition fails");
      detail::record(r, "strong_implies_sf", !cond.strong_holds() || cond.sf_holds(), index, spec,
                     "strong condition holds but increment condition fails");

      const auto verdicts = compare(*pair, config.m_values, config.n, spec.seed);
      std::string bad;
      for (const auto& v : verdicts) {
        r.worst_z = std::max(r.worst_z, v.z_score);
        if (v.verdict == Verdict::violation) bad += "m=" + detail::fmt(v.lhs.m) + " z=" + detail::fmt(v.z_score) + "; ";
      }
      detail::record(r, "theorem", bad.empty(), index, spec, bad);

      if (config.adversarial) {
        const GaussianPair swapped(pair->sigma_y, pair->sigma_x);
        const auto primary = compare(swapped, config.m_values, config.n, spec.seed);
        const auto reference = compare(swapped, config.m_values, config.n, rng::derive_seed(spec.seed, 0xAD));
        for (std::size_t q = 0; q < primary.size(); ++q) {
          if (reference[q].z_score < 5.0) continue;
          ++r.adversarial_powered;
          const bool flagged = primary[q].verdict == Verdict::violation;
          if (flagged) ++r.adversarial_detected;
          detail::record(r, "adversarial_detection", flagged, index, spec,
                         "gap not flagged at m=" + detail::fmt(primary[q].lhs.m) +
                             " z=" + detail::fmt(primary[q].z_score));
        }
      }
    } else {
      detail::record(r, "sf_only_generator", cond.sf_holds() && !cond.strong_holds(), index, spec,
                     "pair does not separate the two conditions");
      const auto verdicts = corollary_bound_check(*pair, config.m_values, config.n, spec.seed);
      std::string bad, bad_remark;
      for (const auto& v : verdicts) {
        r.worst_corollary_z = std::max(r.worst_corollary_z, v.bound.z_score);
        if (v.bound.verdict == Verdict::violation)
          bad += "m=" + detail::fmt(v.bound.lhs.m) + " z=" + detail::fmt(v.bound.z_score) + "; ";
        if (v.remark && v.remark->verdict == Verdict::violation)
          bad_remark += "m=" + detail::fmt(v.remark->lhs.m) + " z=" + detail::fmt(v.remark->z_score) + "; ";
      }
      detail::record(r, "corollary", bad.empty(), index, spec, bad);
      if (!verdicts.empty() && verdicts.front().remark_applies)
        detail::record(r, "remark", bad_remark.empty(), index, spec, bad_remark);
    }

    if (spec.k >= 2) {
      const auto lemma3 = detail::lemma3_all_slices(*pair, config.lemma3_points);
      detail::record(r, "lemma3", lemma3.empty(), index, spec, lemma3);
    }
    const auto sandwich = detail::sandwich_spot_check(config, spec);
    detail::record(r, "sandwich", sandwich.empty(), index, spec, sandwich);
  }
  return r;
}

}  // namespace supmax
