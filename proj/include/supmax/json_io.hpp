#pragma once

// JSON wire format. Covariances are {"k": <int>, "data": [k*k reals, row-major]};
// every report carries "schema_version": 1.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "supmax/conditions.hpp"
#include "supmax/error.hpp"
#include "supmax/gaussian_core.hpp"
#include "supmax/harness.hpp"
#include "supmax/interpolation.hpp"
#include "supmax/lemma_integrals.hpp"
#include "supmax/moments.hpp"

namespace supmax::io {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// ---- covariance -------------------------------------------------------------

inline CovarianceMatrix covariance_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::ParseError, "covariance must be a JSON object");
  if (!j.contains("k") || !j["k"].is_number_integer() || j["k"].get<long long>() < 1)
    fail(ErrorKind::ParseError, "covariance needs a positive integer \"k\"");
  if (!j.contains("data") || !j["data"].is_array()) fail(ErrorKind::ParseError, "covariance needs a \"data\" array");
  const auto k = static_cast<std::size_t>(j["k"].get<long long>());
  const auto& data = j["data"];
  if (data.size() != k * k)
    fail(ErrorKind::DimensionError,
         "\"data\" has " + std::to_string(data.size()) + " entries, expected " + std::to_string(k * k));
  std::vector<double> values;
  values.reserve(data.size());
  for (const auto& v : data) {
    if (!v.is_number()) fail(ErrorKind::ParseError, "covariance entries must be numbers");
    values.push_back(v.get<double>());
  }
  return CovarianceMatrix::make(SquareMatrix::from_row_major(k, values));
}

inline json to_json(const SquareMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.dim(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.dim(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json covariance_to_json(const CovarianceMatrix& c) {
  json data = json::array();
  for (double v : c.entries().data()) data.push_back(v);
  return json{{"k", c.dim()}, {"data", std::move(data)}};
}

inline json parse_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ParseError, origin + ": " + e.what());
  }
}

inline json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ParseError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

inline CovarianceMatrix read_covariance(const std::string& path) { return covariance_from_json(read_file(path)); }

// ---- reports ----------------------------------------------------------------

/// Non-finite doubles become null (JSON has no infinities).
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

inline json pairs_json(const std::vector<IndexPair>& pairs) {
  json out = json::array();
  for (const auto& p : pairs) out.push_back(json::array({p.i, p.j}));
  return out;
}

inline json to_json(const DeltaReport& r) {
  return json{{"schema_version", kSchemaVersion},
              {"sf", r.sf_holds()},
              {"strong", r.strong_holds()},
              {"sf_failures", pairs_json(r.sf_failures)},
              {"strong_failures", pairs_json(r.strong_failures)},
              {"M", r.m_total},
              {"cond_tol", r.cond_tol},
              {"delta", to_json(r.delta)},
              {"slack", to_json(r.slack)}};
}

inline json estimate_body(const MomentEstimate& e) {
  return json{{"value", e.value},
              {"std_error", e.std_error},
              {"n_samples", e.n_samples},
              {"m", e.m},
              {"seed", e.seed},
              {"k", e.k},
              {"regularization_epsilon", optional_number(e.regularization_epsilon)}};
}

inline json to_json(const MomentEstimate& e) {
  json j{{"schema_version", kSchemaVersion}};
  j.update(estimate_body(e));
  return j;
}

inline json verdict_body(const ComparisonVerdict& v) {
  return json{{"lhs", estimate_body(v.lhs)},
              {"rhs", estimate_body(v.rhs)},
              {"z_score", number(v.z_score)},
              {"diff_std_error", v.diff_std_error},
              {"verdict", to_string(v.verdict)}};
}

inline json to_json(const ComparisonVerdict& v) {
  json j{{"schema_version", kSchemaVersion}};
  j.update(verdict_body(v));
  return j;
}

inline json to_json(const CorollaryVerdict& v) {
  json j{{"schema_version", kSchemaVersion}};
  j.update(verdict_body(v.bound));
  j["sigma"] = v.sigma;
  j["remark_applies"] = v.remark_applies;
  j["remark"] = v.remark ? verdict_body(*v.remark) : json(nullptr);
  return j;
}

inline json to_json(const InterpCheckReport& r) {
  json closed = json::array();
  for (bool b : r.closed_form_ok) closed.push_back(b);
  return json{{"schema_version", kSchemaVersion},
              {"probe", r.probe},
              {"fd_step", r.fd_step},
              {"u_grid", r.u_grid},
              {"lhs_fd", r.lhs_fd},
              {"rhs_gi", r.rhs_gi},
              {"discrepancy", r.discrepancy},
              {"tolerance_used", r.tolerance_used},
              {"se_combined", r.se_combined},
              {"fd_bias", r.fd_bias},
              {"fd_rounding", r.fd_rounding},
              {"se_lhs", r.se_lhs},
              {"se_rhs", r.se_rhs},
              {"closed_form", optional_number(r.closed_form)},
              {"closed_form_ok", closed},
              {"regularization_epsilon", optional_number(r.regularization_epsilon)},
              {"passed", r.passed()}};
}

inline json to_json(const PathBoundReport& r) {
  json var_ok = json::array(), corr_ok = json::array();
  for (bool b : r.var_ok) var_ok.push_back(b);
  for (bool b : r.corr_ok) corr_ok.push_back(b);
  return json{{"schema_version", kSchemaVersion},
              {"i", r.i},
              {"j", r.j},
              {"u_grid", r.u_grid},
              {"var_1", r.var_1},
              {"var_2", r.var_2},
              {"corr", r.corr},
              {"v_min", r.v_min},
              {"v_max", r.v_max},
              {"corr_cap", r.corr_cap},
              {"var_ok", var_ok},
              {"corr_ok", corr_ok},
              {"max_identity_residual", r.max_identity_residual},
              {"violations", r.violations()}};
}

inline json to_json(const DerivativeTerms& d) {
  return json{{"schema_version", kSchemaVersion},
              {"u", d.u},
              {"p", d.p},
              {"m", d.m},
              {"n_samples", d.n_samples},
              {"t1", {{"mean", d.mean_t1}, {"std_error", d.se_t1}}},
              {"t2", {{"mean", d.mean_t2}, {"std_error", d.se_t2}, {"max", number(d.max_t2)}}},
              {"t3", {{"mean", d.mean_t3}, {"std_error", d.se_t3}}},
              {"t3_minus", {{"mean", d.mean_t3_minus}, {"std_error", d.se_t3_minus}}},
              {"remainder", {{"mean", d.mean_remainder}, {"std_error", d.se_remainder}}},
              {"total", d.mean_total},
              {"positive_t2", d.positive_t2}};
}

inline json to_json(const BivariatePair& b) {
  return json{{"var_x", b.var_x}, {"var_y", b.var_y}, {"corr", b.corr}, {"c", b.c},       {"var_resid", b.var_resid},
              {"c1", b.c1},       {"c2", b.c2},       {"c3", b.c3},     {"swapped", b.swapped}};
}

inline json to_json(const DecayReport& r) {
  return json{{"schema_version", kSchemaVersion},
              {"m", r.m},
              {"pair", to_json(r.pair)},
              {"p_grid", r.p_grid},
              {"values_1", r.values_1},
              {"values_2", r.values_2},
              {"rel_errors_1", r.rel_errors_1},
              {"rel_errors_2", r.rel_errors_2},
              {"scaled_1", r.scaled_1},
              {"scaled_2", r.scaled_2},
              {"fitted_slope_1", r.fitted_slope_1},
              {"fitted_slope_2", r.fitted_slope_2},
              {"bounded_1", r.bounded_1},
              {"bounded_2", r.bounded_2},
              {"errors_ok", r.errors_ok},
              {"c_bound", r.c_bound},
              {"fitted_c_1", r.fitted_c_1},
              {"fitted_c_2", r.fitted_c_2},
              {"passed", r.passed()}};
}

inline json to_json(const InstanceSpec& s) {
  return json{{"k", s.k},
              {"family", to_string(s.family)},
              {"scale", s.scale},
              {"seed", s.seed},
              {"slack_factor", s.slack_factor}};
}

inline json to_json(const SuiteConfig& c) {
  return json{{"seed", c.seed},
              {"strong_pairs", c.strong_pairs},
              {"sf_only_pairs", c.sf_only_pairs},
              {"k_min", c.k_min},
              {"k_max", c.k_max},
              {"m_values", c.m_values},
              {"n", c.n},
              {"scale", c.scale},
              {"slack_factor", c.slack_factor},
              {"adversarial", c.adversarial},
              {"lemma3_points", c.lemma3_points},
              {"sandwich_points", c.sandwich_points}};
}

/// Reads a suite config; absent keys keep their defaults, unknown keys are errors.
inline SuiteConfig suite_config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::ParseError, "suite config must be a JSON object");
  SuiteConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "strong_pairs") c.strong_pairs = v.get<std::size_t>();
      else if (key == "sf_only_pairs") c.sf_only_pairs = v.get<std::size_t>();
      else if (key == "k_min") c.k_min = v.get<std::size_t>();
      else if (key == "k_max") c.k_max = v.get<std::size_t>();
      else if (key == "m_values") c.m_values = v.get<std::vector<double>>();
      else if (key == "n") c.n = v.get<std::uint64_t>();
      else if (key == "scale") c.scale = v.get<double>();
      else if (key == "slack_factor") c.slack_factor = v.get<double>();
      else if (key == "adversarial") c.adversarial = v.get<bool>();
      else if (key == "lemma3_points") c.lemma3_points = v.get<std::size_t>();
      else if (key == "sandwich_points") c.sandwich_points = v.get<std::size_t>();
      else if (key == "schema_version") continue;
      else fail(ErrorKind::ParseError, "unknown suite config key \"" + key + "\"");
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, std::string("suite config: ") + e.what());
  }
  c.validate();
  return c;
}

inline json to_json(const SuiteReport& r, const SuiteConfig& config) {
  json checks = json::object();
  for (const auto& [name, t] : r.checks)
    checks[name] = json{{"instances", t.instances}, {"passed", t.passed}, {"failed", t.failed}};
  json failures = json::array();
  for (const auto& f : r.failures)
    failures.push_back(json{{"index", f.index}, {"spec", to_json(f.spec)}, {"check", f.check}, {"details", f.details}});
  return json{{"schema_version", kSchemaVersion},
              {"config", to_json(config)},
              {"n_instances", r.n_instances},
              {"checks", checks},
              {"worst_z", number(r.worst_z)},
              {"worst_corollary_z", number(r.worst_corollary_z)},
              {"adversarial_powered", r.adversarial_powered},
              {"adversarial_detected", r.adversarial_detected},
              {"adversarial_power", r.adversarial_power()},
              {"failures", failures},
              {"all_passed", r.all_passed()}};
}

}  // namespace supmax::io
