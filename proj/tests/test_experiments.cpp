#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "islab/experiments.hpp"

using namespace islab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("islab-test-" + tag);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool contains(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) {
    return s.find(needle) != std::string::npos;
  });
}

}  // namespace

TEST_CASE("parse_real handles decimals and the power shorthand") {
  CHECK(parse_real("0.25") == 0.25);
  CHECK(parse_real("1e-3") == 1e-3);
  CHECK(parse_real("2^-8") == std::pow(2.0, -8));
  CHECK(parse_real("2^-27") == std::pow(2.0, -27));
  CHECK(parse_real("-2^3") == -8.0);
  CHECK_THROWS_AS((void)parse_real("abc"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_real("2^"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_real(""), std::invalid_argument);
}

TEST_CASE("every preset advertises a summary and validates its defaults") {
  auto names = preset_names();
  CHECK(names.size() == 8);
  for (const auto& n : names) CHECK_FALSE(preset_summary(n).empty());
  for (const auto& n : names) {
    ExperimentConfig cfg;
    cfg.preset = n;
    auto v = validate(cfg);
    CHECK(v.ok());
    CHECK_FALSE(v.params.empty());
  }
}

TEST_CASE("validate rejects unknown presets and unknown keys") {
  ExperimentConfig cfg;
  cfg.preset = "no-such-preset";
  auto v = validate(cfg);
  CHECK_FALSE(v.ok());
  CHECK(contains(v.errors, "unknown preset"));

  cfg.preset = "ex52";
  cfg.overrides["no-such-key"] = "1";
  auto v2 = validate(cfg);
  CHECK_FALSE(v2.ok());
  CHECK(contains(v2.errors, "no-such-key"));
  CHECK(contains(v2.errors, "known:"));
}

TEST_CASE("validate enforces the documented parameter domains") {
  ExperimentConfig cfg;
  cfg.preset = "ex52";
  cfg.overrides["eps"] = "0.5";
  auto v = validate(cfg);
  CHECK_FALSE(v.ok());
  CHECK(contains(v.errors, "eps must be < 2^-7"));

  ExperimentConfig chain;
  chain.preset = "ex53";
  chain.overrides["eps2"] = "2^-10";  // violates eps2 < eps1^3 / 4
  auto vc = validate(chain);
  CHECK_FALSE(vc.ok());

  ExperimentConfig growth;
  growth.preset = "thm46-growth";
  growth.overrides["dim"] = "12";  // too small for the kernel supply
  auto vg = validate(growth);
  CHECK_FALSE(vg.ok());
  CHECK(contains(vg.errors, "dim"));
}

TEST_CASE("validate resolves auto parameters and emits warnings, not errors") {
  ExperimentConfig cfg;
  cfg.preset = "sola-backward-growth";
  cfg.overrides["t-end"] = "5";
  auto v = validate(cfg);
  CHECK(v.ok());
  REQUIRE(v.params.count("t-min"));
  CHECK(parse_real(v.params.at("t-min")) == doctest::Approx(1.5));  // 0.3 * t_end

  cfg.overrides["dt"] = "0.5";  // above the stability gate, allowed but flagged
  auto v2 = validate(cfg);
  CHECK(v2.ok());
  CHECK_FALSE(v2.warnings.empty());
}

TEST_CASE("run_preset writes the advertised artifacts and is reproducible") {
  auto dir1 = fresh_dir("ex52-a");
  auto dir2 = fresh_dir("ex52-b");
  ExperimentConfig cfg;
  cfg.preset = "ex52";
  cfg.overrides["trials"] = "3";
  cfg.overrides["steps"] = "300";
  cfg.seed = 7;

  cfg.output_dir = dir1.string();
  auto r1 = run_preset(cfg);
  CHECK(r1.pass());
  CHECK(r1.preset == "ex52");
  CHECK_FALSE(r1.checks.empty());
  for (const auto& c : r1.checks) {
    CHECK_FALSE(c.anchor.empty());
    CHECK(c.pass == (c.margin >= 0));
  }
  for (const char* f : {"effective_config.json", "summary.json", "report.txt", "plot.gp",
                        "trials.csv", "stability_trace.csv"}) {
    CHECK(std::count(r1.files.begin(), r1.files.end(), f) == 1);
    CHECK(fs::exists(dir1 / f));
  }
  CHECK(std::is_sorted(r1.files.begin(), r1.files.end()));

  cfg.output_dir = dir2.string();
  auto r2 = run_preset(cfg);
  for (const char* f : {"summary.json", "trials.csv", "stability_trace.csv", "report.txt"})
    CHECK(slurp(dir1 / f) == slurp(dir2 / f));  // byte-identical reruns

  std::string report = slurp(dir1 / "report.txt");
  CHECK(report.find("[PASS]") != std::string::npos);
  CHECK(report.find("result: PASS") != std::string::npos);

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("run_preset seeds change the data but not the layout") {
  auto dir1 = fresh_dir("seed-a");
  auto dir2 = fresh_dir("seed-b");
  ExperimentConfig cfg;
  cfg.preset = "ex52";
  cfg.overrides["trials"] = "2";
  cfg.overrides["steps"] = "200";
  cfg.output_dir = dir1.string();
  cfg.seed = 1;
  auto r1 = run_preset(cfg);
  cfg.output_dir = dir2.string();
  cfg.seed = 2;
  auto r2 = run_preset(cfg);
  CHECK(r1.files == r2.files);
  CHECK(slurp(dir1 / "trials.csv") != slurp(dir2 / "trials.csv"));
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("run_preset refuses an invalid configuration") {
  ExperimentConfig cfg;
  cfg.preset = "ex52";
  cfg.overrides["eps"] = "0.5";
  cfg.output_dir = fresh_dir("invalid").string();
  CHECK_THROWS_AS((void)run_preset(cfg), std::invalid_argument);
  CHECK_FALSE(fs::exists(cfg.output_dir));  // nothing written for a rejected config
}

TEST_CASE("constructed growth preset passes at reduced size") {
  auto dir = fresh_dir("growth");
  ExperimentConfig cfg;
  cfg.preset = "thm46-growth";
  cfg.output_dir = dir.string();
  auto r = run_preset(cfg);
  CHECK(r.pass());
  REQUIRE(r.metrics.count("certified_horizon"));
  CHECK(r.metrics.at("certified_horizon") >= 25);
  REQUIRE(r.metrics.count("min_slack"));
  CHECK(r.metrics.at("min_slack") >= 0.0);
  CHECK(fs::exists(dir / "margins.csv"));
  CHECK(fs::exists(dir / "construction.txt"));
  fs::remove_all(dir);
}

TEST_CASE("consolidate_report merges runs and flags missing directories") {
  auto dir1 = fresh_dir("cons-a");
  auto dir2 = fresh_dir("cons-b");
  ExperimentConfig cfg;
  cfg.preset = "thm44-ensemble";
  cfg.overrides["samples"] = "10";
  cfg.overrides["steps"] = "20";
  cfg.output_dir = dir1.string();
  auto r1 = run_preset(cfg);
  CHECK(r1.pass());

  cfg.preset = "thm46-growth";
  cfg.overrides.clear();
  cfg.output_dir = dir2.string();
  auto r2 = run_preset(cfg);

  std::ostringstream out;
  int failed = consolidate_report({dir1.string(), dir2.string(), "/no/such/dir"}, out);
  CHECK(failed == 0);
  std::string text = out.str();
  CHECK(text.find("thm44-ensemble") != std::string::npos);
  CHECK(text.find("thm46-growth") != std::string::npos);
  CHECK(text.find("/no/such/dir") != std::string::npos);
  CHECK(text.find("2 run(s)") != std::string::npos);

  std::ostringstream empty_out;
  CHECK(consolidate_report({}, empty_out) == 0);
  CHECK_FALSE(empty_out.str().empty());

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("summary.json carries the check table verbatim") {
  auto dir = fresh_dir("summary");
  ExperimentConfig cfg;
  cfg.preset = "thm44-ensemble";
  cfg.overrides["samples"] = "5";
  cfg.overrides["steps"] = "20";
  cfg.output_dir = dir.string();
  auto r = run_preset(cfg);
  std::string s = slurp(dir / "summary.json");
  CHECK(s.find("\"preset\": \"thm44-ensemble\"") != std::string::npos);
  CHECK(s.find("\"pass\": true") != std::string::npos);
  for (const auto& c : r.checks) CHECK(s.find("\"" + c.anchor + "\"") != std::string::npos);
  fs::remove_all(dir);
}
