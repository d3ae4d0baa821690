#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include <json.hpp>

#include "cli_runner.hpp"
#include "supmax/json_io.hpp"
#include "supmax/lemma_integrals.hpp"

using namespace supmax;
using testutil::data_file;
using testutil::run_cli;

namespace {

io::json parse(const std::string& s) { return io::json::parse(s); }

std::string write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / (name + "_" + std::to_string(::getpid()));
  std::ofstream(path) << text;
  return path.string();
}

}  // namespace

TEST(Cli, CheckStrongPairExitsZero) {
  const auto r = run_cli({"check", data_file("corollary_x.json"), data_file("corollary_y.json")});
  EXPECT_EQ(r.exit_code, 0) << r.err;
  const auto j = parse(r.out);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_TRUE(j["sf"].get<bool>());
  EXPECT_TRUE(j["strong"].get<bool>());
  EXPECT_NEAR(j["delta"][0][1].get<double>(), 0.1, 1e-15);
}

TEST(Cli, CheckExitCodesForFailingConditions) {
  // X = 2I, Y = I: increments shrink
  EXPECT_EQ(run_cli({"check", data_file("two_id2.json"), data_file("id2.json")}).exit_code, 3);
  // X = I, Y = [[1, .5], [.5, 1]]: increments shrink as well
  EXPECT_EQ(run_cli({"check", data_file("id2.json"), data_file("rho_half.json")}).exit_code, 3);
  // X = [[1, .5], [.5, 1]], Y = I: increments grow, but the strong condition fails
  const auto r = run_cli({"check", data_file("rho_half.json"), data_file("id2.json")});
  EXPECT_EQ(r.exit_code, 2);
  const auto j = parse(r.out);
  EXPECT_TRUE(j["sf"].get<bool>());
  EXPECT_EQ(j["strong_failures"].size(), 1u);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({"check", data_file("id2.json")}).exit_code, 1);
  EXPECT_EQ(run_cli({}).exit_code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).exit_code, 1);
  EXPECT_EQ(run_cli({"estimate", "--m", "0.5", data_file("id2.json")}).exit_code, 1);
  EXPECT_EQ(run_cli({"estimate", "--n", "10", data_file("id2.json")}).exit_code, 1);
  EXPECT_EQ(run_cli({"estimate", "/nonexistent/file.json"}).exit_code, 1);
  EXPECT_EQ(run_cli({"check", data_file("id2.json"), data_file("var4.json")}).exit_code, 1);
  EXPECT_EQ(run_cli({"interpolate", "--p", "3", data_file("id2.json"), data_file("id2.json")}).exit_code, 1);
}

TEST(Cli, MalformedInputNeverCrashes) {
  const std::vector<std::string> bad{"", "{", "[]", "{\"k\": 2}", "{\"k\": 2, \"data\": [1, 2, 3]}",
                                     "{\"k\": 2, \"data\": [1, 0, 0, \"x\"]}", "{\"k\": 2, \"data\": [1, 2, 0, 1]}",
                                     "{\"k\": 2, \"data\": [-1, 0, 0, 1]}", "{\"k\": -3, \"data\": []}",
                                     "{\"k\": 1, \"data\": [1e999]}"};
  int q = 0;
  for (const auto& text : bad) {
    const auto path = write_temp("bad" + std::to_string(q++), text);
    const auto r = run_cli({"estimate", "--n", "1000", path});
    EXPECT_EQ(r.exit_code, 1) << text;
    EXPECT_FALSE(r.err.empty());
    std::filesystem::remove(path);
  }
}

TEST(Cli, EstimateMatchesQuadratureOracle) {
  const auto r = run_cli({"estimate", "--m", "2", "--n", "1000000", "--seed", "7", data_file("id2.json")});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = parse(r.out);
  const double oracle = bivariate_max_abs_moment(make_covariance({{1, 0}, {0, 1}}), 2.0).value;
  EXPECT_NEAR(oracle, 1.0 + 2.0 / std::numbers::pi, 1e-9);
  EXPECT_LE(std::abs(j["value"].get<double>() - oracle), 4.0 * j["std_error"].get<double>());
  EXPECT_EQ(j["n_samples"], 1000000);
  EXPECT_EQ(j["seed"], 7);
  EXPECT_TRUE(j["regularization_epsilon"].is_null());
}

TEST(Cli, CompareAndCorollaryExitCodes) {
  const auto ok = run_cli({"compare", "--n", "20000", data_file("id2.json"), data_file("two_id2.json")});
  EXPECT_EQ(ok.exit_code, 0) << ok.err;
  EXPECT_EQ(parse(ok.out)["verdict"], "consistent");
  const auto bad = run_cli({"compare", "--n", "20000", data_file("two_id2.json"), data_file("id2.json")});
  EXPECT_EQ(bad.exit_code, 4);
  EXPECT_EQ(parse(bad.out)["verdict"], "violation");

  const auto cor = run_cli({"corollary", "--n", "20000", data_file("corollary_x.json"), data_file("corollary_y.json")});
  EXPECT_EQ(cor.exit_code, 0) << cor.err;
  const auto j = parse(cor.out);
  EXPECT_TRUE(j["remark_applies"].get<bool>());
  EXPECT_TRUE(j["remark"].is_object());
  EXPECT_EQ(run_cli({"corollary", "--n", "20000", data_file("two_id2.json"), data_file("id2.json")}).exit_code, 3);
}

TEST(Cli, InterpolateAndDecay) {
  // Sigma^Y = 2 Sigma^X makes every u-point reuse the same samples, so a 3-sigma
  // excursion would fail all points at once; seed 0 happens to be one (z = 3.3)
  const auto r = run_cli({"interpolate", "--p", "4", "--n", "20000", "--seed", "1", "--grid-points", "5",
                          data_file("id2.json"), data_file("two_id2.json")});
  EXPECT_EQ(r.exit_code, 0) << r.err;
  const auto j = parse(r.out);
  ASSERT_EQ(j["gi"].size(), 2u);
  EXPECT_EQ(j["gi"][0]["u_grid"].size(), 5u);
  EXPECT_EQ(j["path_bounds"].size(), 1u);

  const auto d = run_cli({"decay", "--m", "2", "--p-min", "4", "--p-max", "64"});
  EXPECT_EQ(d.exit_code, 0) << d.err;
  const auto dj = parse(d.out);
  EXPECT_EQ(dj["p_grid"].size(), 5u);
  EXPECT_TRUE(dj["passed"].get<bool>());
  EXPECT_EQ(run_cli({"decay", "--p-min", "64", "--p-max", "8"}).exit_code, 1);
  EXPECT_EQ(run_cli({"decay", "--corr", "0.9999999999999"}).exit_code, 1);
}

TEST(Cli, EpsilonRegularizesSingularInput) {
  const auto path = write_temp("singular", "{\"k\": 2, \"data\": [1, 1, 1, 1]}");
  const auto r = run_cli({"--epsilon", "0.001", "estimate", "--n", "5000", path});
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_DOUBLE_EQ(parse(r.out)["regularization_epsilon"].get<double>(), 0.001);
  std::filesystem::remove(path);
}

TEST(Cli, OutputFileAndPrettyFormat) {
  const auto path = std::filesystem::temp_directory_path() / ("supmax_report_" + std::to_string(::getpid()));
  const auto r = run_cli({"--output", path.string(), "--format", "pretty", "estimate", "--n", "5000",
                          data_file("var4.json")});
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto text = testutil::slurp(path);
  EXPECT_NE(text.find("\n  \"value\""), std::string::npos);
  EXPECT_EQ(parse(text)["k"], 1);
  std::filesystem::remove(path);
}

TEST(Cli, EmittedJsonRoundTrips) {
  const std::vector<std::vector<std::string>> invocations{
      {"check", data_file("id2.json"), data_file("two_id2.json")},
      {"estimate", "--n", "5000", data_file("rho_half.json")},
      {"compare", "--n", "5000", data_file("id2.json"), data_file("two_id2.json")},
      {"corollary", "--n", "5000", data_file("id2.json"), data_file("two_id2.json")},
      {"interpolate", "--n", "5000", "--grid-points", "3", data_file("id2.json"), data_file("two_id2.json")},
      {"decay", "--p-max", "32"},
  };
  for (const auto& args : invocations) {
    const auto r = run_cli(args);
    ASSERT_EQ(r.exit_code, 0) << args.front() << ": " << r.err;
    const auto j = parse(r.out);
    EXPECT_EQ(j.dump() + "\n", r.out) << args.front();
    if (j.contains("schema_version")) {
      EXPECT_EQ(j["schema_version"], 1);
    }
  }
  // the check report carries the covariance difference in the documented layout
  const auto c = parse(run_cli(invocations[0]).out);
  EXPECT_EQ(c["delta"].size(), 2u);
  EXPECT_EQ(c["delta"][0][0].get<double>(), 1.0);
}

TEST(Cli, SeedDeterminesOutputBytes) {
  const std::vector<std::string> args{"compare", "--n", "50000", "--seed", "11", data_file("rho_half.json"),
                                      data_file("two_id2.json")};
  const auto a = run_cli(args);
  const auto b = run_cli(args);
  EXPECT_EQ(a.out, b.out);
  auto threaded = args;
  threaded.insert(threaded.begin(), {"--threads", "3"});
  EXPECT_EQ(run_cli(threaded).out, a.out);
  EXPECT_EQ(run_cli(args, "SUPMAX_THREADS=2").out, a.out);
  auto other = args;
  other[4] = "12";
  EXPECT_NE(run_cli(other).out, a.out);
}

TEST(Cli, SuiteRunsSmallConfig) {
  const auto cfg = write_temp("suite", R"({"seed": 3, "strong_pairs": 3, "sf_only_pairs": 3, "k_max": 4,
                                          "n": 5000, "sandwich_points": 5, "lemma3_points": 11})");
  const auto r = run_cli({"suite", "--config", cfg});
  EXPECT_EQ(r.exit_code, 0) << r.err;
  const auto j = parse(r.out);
  EXPECT_EQ(j["n_instances"], 6);
  EXPECT_TRUE(j["all_passed"].get<bool>());
  EXPECT_NE(r.err.find("theorem"), std::string::npos);
  std::filesystem::remove(cfg);

  const auto bad = write_temp("suite_bad", R"({"seed": 3, "bogus": 1})");
  EXPECT_EQ(run_cli({"suite", "--config", bad}).exit_code, 1);
  std::filesystem::remove(bad);
}
