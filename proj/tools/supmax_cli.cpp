// supmax: command-line front end.
//
// Exit codes: 0 success, 1 usage/parse/input error, 2 strong condition
// fails, 3 increment condition fails, 4 moment violation, 5 interpolation
// discrepancy, 6 decay bound failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "supmax/json_io.hpp"
#include "supmax/supmax.hpp"

namespace {

using supmax::io::json;

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kStrongFails = 2,
  kSfFails = 3,
  kViolation = 4,
  kGiDiscrepancy = 5,
  kDecayFailure = 6,
};

struct Globals {
  int threads = 0;
  std::string output;
  std::string format = "json";
  std::optional<double> epsilon;
};

void emit(const Globals& g, const json& j) {
  const std::string text = (g.format == "pretty" ? j.dump(2) : j.dump()) + "\n";
  if (g.output.empty()) {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(g.output, std::ios::binary);
  if (!out) supmax::fail(supmax::ErrorKind::ParseError, "cannot write " + g.output);
  out << text;
}

supmax::GaussianPair read_pair(const std::vector<std::string>& paths) {
  return supmax::GaussianPair(supmax::io::read_covariance(paths.at(0)), supmax::io::read_covariance(paths.at(1)));
}

supmax::GaussianPair maybe_regularize(const supmax::GaussianPair& p, const Globals& g) {
  if (!g.epsilon) return p;
  return supmax::regularize(p, supmax::RegularizationParams(*g.epsilon));
}

std::string summary_table(const supmax::SuiteReport& r) {
  std::string s;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %10s %10s %10s\n", "check", "instances", "passed", "failed");
  s += line;
  for (const auto& [name, t] : r.checks) {
    std::snprintf(line, sizeof line, "%-24s %10zu %10zu %10zu\n", name.c_str(), t.instances, t.passed, t.failed);
    s += line;
  }
  std::snprintf(line, sizeof line, "instances: %zu  worst theorem z: %.3f  worst corollary z: %.3f\n",
                r.n_instances, r.worst_z, r.worst_corollary_z);
  s += line;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moment comparison checks for maxima of Gaussian vectors"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (0 = SUPMAX_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--output,-o", g.output, "Write the JSON report to this file");
  app.add_option("--format", g.format, "json (compact) or pretty")->check(CLI::IsMember({"json", "pretty"}));
  app.add_option("--epsilon", g.epsilon, "Regularize both covariances with this noise scale")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> files;
  double m = 2.0;
  std::uint64_t n = supmax::kDefaultSamples;
  std::uint64_t seed = 0;

  auto* check = app.add_subcommand("check", "Check the increment and strong conditions");
  check->add_option("files", files, "X.json Y.json")->required()->expected(2)->check(CLI::ExistingFile);

  auto* estimate = app.add_subcommand("estimate", "Estimate E[max|X_i|^m]");
  std::string single;
  estimate->add_option("file", single, "X.json")->required()->check(CLI::ExistingFile);

  auto* compare = app.add_subcommand("compare", "Compare E[max|X_i|^m] with E[max|Y_i|^m]");
  compare->add_option("files", files, "X.json Y.json")->required()->expected(2)->check(CLI::ExistingFile);

  auto* corollary = app.add_subcommand("corollary", "Check the increment-condition moment bound");
  corollary->add_option("files", files, "X.json Y.json")->required()->expected(2)->check(CLI::ExistingFile);

  for (auto* sub : {estimate, compare, corollary}) {
    sub->add_option("--m", m, "Moment order (>= 1)")->check(CLI::Range(1.0, 1e6));
    sub->add_option("--n", n, "Sample count (>= 1000)")->check(CLI::Range(std::uint64_t{1000}, std::uint64_t{1} << 40));
    sub->add_option("--seed", seed, "Random seed");
  }

  auto* interpolate = app.add_subcommand("interpolate", "Check the interpolation identity and path bounds");
  interpolate->add_option("files", files, "X.json Y.json")->required()->expected(2)->check(CLI::ExistingFile);
  int p = 2;
  std::size_t grid_points = 9;
  double fd_step = supmax::kDefaultFdStep;
  interpolate->add_option("--p", p, "Even smooth-max exponent")->check(CLI::Range(2, 512));
  interpolate->add_option("--m", m, "Moment order (>= 1)")->check(CLI::Range(1.0, 1e6));
  interpolate->add_option("--grid-points", grid_points, "Interior u-grid points")->check(CLI::Range(1, 10000));
  interpolate->add_option("--n", n, "Sample count (>= 1000)")->check(CLI::Range(std::uint64_t{1000}, std::uint64_t{1} << 40));
  interpolate->add_option("--seed", seed, "Random seed");
  interpolate->add_option("--fd-step", fd_step, "Finite-difference step in u")->check(CLI::Range(1e-6, 0.05));

  auto* decay = app.add_subcommand("decay", "Decay of the bivariate ratio integrals in p");
  double var_x = 1.0, var_y = 1.0, corr = 0.0, p_min = 4.0, p_max = 64.0;
  decay->add_option("--var-x", var_x, "Var(X1)")->check(CLI::PositiveNumber);
  decay->add_option("--var-y", var_y, "Var(Y1)")->check(CLI::PositiveNumber);
  decay->add_option("--corr", corr, "Corr(X1, Y1)")->check(CLI::Range(-1.0, 1.0));
  decay->add_option("--m", m, "Moment order (> 0)")->check(CLI::PositiveNumber);
  decay->add_option("--p-min", p_min, "Smallest p")->check(CLI::Range(4.0, 512.0));
  decay->add_option("--p-max", p_max, "Largest p")->check(CLI::Range(4.0, 512.0));

  auto* suite = app.add_subcommand("suite", "Run the randomized verification suite");
  std::string config_path;
  suite->add_option("--config", config_path, "Suite config JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (g.threads > 0) supmax::parallel::set_max_threads(g.threads);

  try {
    if (*check) {
      const auto report = supmax::analyze_conditions(read_pair(files));
      emit(g, supmax::io::to_json(report));
      if (!report.sf_holds()) return kSfFails;
      return report.strong_holds() ? kOk : kStrongFails;
    }
    if (*estimate) {
      auto cov = supmax::io::read_covariance(single);
      if (g.epsilon) cov = supmax::add_to_diagonal(cov, *g.epsilon * *g.epsilon);
      auto est = supmax::sample_max_abs(cov, n, seed, m);
      if (g.epsilon) est.regularization_epsilon = g.epsilon;
      emit(g, supmax::io::to_json(est));
      return kOk;
    }
    if (*compare) {
      auto v = supmax::compare(maybe_regularize(read_pair(files), g), m, n, seed);
      if (g.epsilon) v.lhs.regularization_epsilon = v.rhs.regularization_epsilon = g.epsilon;
      emit(g, supmax::io::to_json(v));
      return v.verdict == supmax::Verdict::violation ? kViolation : kOk;
    }
    if (*corollary) {
      auto v = supmax::corollary_bound_check(maybe_regularize(read_pair(files), g), m, n, seed);
      emit(g, supmax::io::to_json(v));
      const bool remark_bad = v.remark && v.remark->verdict == supmax::Verdict::violation;
      return v.bound.verdict == supmax::Verdict::violation || remark_bad ? kViolation : kOk;
    }
    if (*interpolate) {
      const auto pair = maybe_regularize(read_pair(files), g);
      const supmax::SmoothMaxParams s(p, m, pair.dim());
      std::vector<supmax::Probe> probes{supmax::Probe::smooth_max(s)};
      if (pair.dim() >= 2) probes.push_back(supmax::Probe::quadratic(0, 1));
      const auto grid = supmax::interior_grid(grid_points);
      if (grid.front() < 2.0 * fd_step || grid.back() > 1.0 - 2.0 * fd_step)
        supmax::fail(supmax::ErrorKind::InvalidParameter, "grid too fine for the finite-difference step");
      const auto reports = supmax::gi_check(pair, probes, grid, n, seed, fd_step);
      json gi = json::array();
      bool ok = true;
      for (const auto& r : reports) {
        gi.push_back(supmax::io::to_json(r));
        ok = ok && r.passed();
      }
      json paths = json::array();
      bool paths_ok = true;
      if (pair.dim() >= 2) {
        for (const auto& r : supmax::lemma3_slices(pair, grid)) {
          paths.push_back(supmax::io::to_json(r));
          paths_ok = paths_ok && r.all_ok();
        }
      }
      emit(g, json{{"schema_version", supmax::io::kSchemaVersion},
                   {"gi", gi},
                   {"path_bounds", paths},
                   {"gi_passed", ok},
                   {"path_bounds_passed", paths_ok}});
      return ok && paths_ok ? kOk : kGiDiscrepancy;
    }
    if (*decay) {
      if (p_max < p_min) supmax::fail(supmax::ErrorKind::InvalidParameter, "--p-max must be >= --p-min");
      const auto b = supmax::decorrelate(var_x, var_y, corr);
      const auto grid = supmax::doubling_grid(p_min, p_max);
      const auto report = supmax::decay_check(b, m, grid);
      emit(g, supmax::io::to_json(report));
      return report.passed() ? kOk : kDecayFailure;
    }
    if (*suite) {
      const auto config = supmax::io::suite_config_from_json(supmax::io::read_file(config_path));
      const auto report = supmax::run_suite(config);
      emit(g, supmax::io::to_json(report, config));
      (g.output.empty() ? std::cerr : std::cout) << summary_table(report);
      return report.all_passed() ? kOk : kViolation;
    }
  } catch (const supmax::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case supmax::ErrorKind::SfConditionViolated: return kSfFails;
      case supmax::ErrorKind::StrongConditionViolated: return kStrongFails;
      default: return kUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
