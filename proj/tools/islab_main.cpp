#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "islab/experiments.hpp"

namespace {

// leftover tokens after the named options: --key value or --key=value pairs
int parse_overrides(const std::vector<std::string>& tokens,
                    std::map<std::string, std::string>& overrides) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string tok = tokens[i];
    if (tok.rfind("--", 0) != 0) {
      std::cerr << "unexpected token '" << tok << "'; overrides look like --key value\n";
      return 2;
    }
    tok = tok.substr(2);
    const auto eq = tok.find('=');
    if (eq != std::string::npos) {
      overrides[tok.substr(0, eq)] = tok.substr(eq + 1);
      continue;
    }
    if (i + 1 == tokens.size()) {
      std::cerr << "override '--" << tok << "' is missing a value\n";
      return 2;
    }
    overrides[tok] = tokens[++i];
  }
  return 0;
}

struct CommonOpts {
  std::string out;
  std::uint64_t seed = 1;
  bool validate_only = false;
  int jobs = 1;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical growth and instability laboratory"};
  app.require_subcommand(1);

  std::map<std::string, std::shared_ptr<CommonOpts>> commons;
  for (const auto& name : islab::preset_names()) {
    auto opts = std::make_shared<CommonOpts>();
    CLI::App* sub = app.add_subcommand(name, islab::preset_summary(name));
    sub->add_option("--out", opts->out, "output directory for the run artifacts");
    sub->add_option("--seed", opts->seed, "seed for all randomized pieces")->capture_default_str();
    sub->add_flag("--validate", opts->validate_only,
                  "print the effective parameter ledger and exit");
    sub->add_option("--jobs", opts->jobs, "accepted for compatibility; runs are sequential")
        ->capture_default_str();
    sub->allow_extras();
    commons[name] = opts;
  }

  std::vector<std::string> report_dirs;
  CLI::App* report = app.add_subcommand("report", "consolidate summaries from earlier runs");
  report->add_option("dirs", report_dirs, "run output directories")->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  CLI::App* sub = app.get_subcommands().front();

  if (sub == report) {
    const int fails = islab::consolidate_report(report_dirs, std::cout);
    return fails > 0 ? 1 : 0;
  }

  const std::string preset = sub->get_name();
  islab::ExperimentConfig cfg;
  cfg.preset = preset;
  cfg.seed = commons[preset]->seed;
  cfg.output_dir = commons[preset]->out;
  std::vector<std::string> extras = sub->remaining();
  if (int rc = parse_overrides(extras, cfg.overrides); rc != 0) return rc;

  if (commons[preset]->validate_only) {
    const islab::ValidationResult v = islab::validate(cfg);
    std::cout << "preset: " << preset << "\n";
    for (const auto& [key, value] : v.params) std::cout << "  --" << key << " " << value << "\n";
    for (const auto& w : v.warnings) std::cout << "warning: " << w << "\n";
    for (const auto& e : v.errors) std::cout << "error: " << e << "\n";
    return v.ok() ? 0 : 2;
  }

  if (cfg.output_dir.empty()) {
    std::cerr << "missing --out DIR (or use --validate for a dry run)\n";
    return 2;
  }

  try {
    const islab::RunResult result = islab::run_preset(cfg);
    std::ifstream rep(cfg.output_dir + "/report.txt");
    std::cout << rep.rdbuf();
    return result.pass() ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}
