#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace islab {

// One requested run: a named preset plus key/value overrides. Every key has a
// preset default, so a bare preset name is already a complete request.
struct ExperimentConfig {
  std::string preset;
  std::map<std::string, std::string> overrides;
  std::uint64_t seed = 1;
  std::string output_dir;
};

// A single pass/fail check inside a run. `margin` is oriented so that
// nonnegative means pass, whatever the direction of the underlying bound.
struct CheckResult {
  std::string anchor;
  double value = 0;
  double bound = 0;
  double margin = 0;
  bool pass = false;
  std::string note;
};

struct RunResult {
  std::string preset;
  std::vector<CheckResult> checks;
  std::map<std::string, double> metrics;  // named scalars, mirrored in summary.json
  std::vector<std::string> files;         // artifact names relative to the run dir
  bool pass() const;
};

std::vector<std::string> preset_names();
std::string preset_summary(const std::string& preset);

// Effective parameter ledger after overrides land on the preset defaults.
// Collects every problem instead of stopping at the first; ok() means the
// preset is runnable. Warnings flag allowed-but-dubious settings, e.g. a dt
// above the stability gate of the assembled system.
struct ValidationResult {
  std::map<std::string, std::string> params;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

ValidationResult validate(const ExperimentConfig& cfg);

// Runs the preset and writes its artifacts (CSV series, effective_config.json,
// summary.json, report.txt, plot.gp) under cfg.output_dir. Throws
// std::invalid_argument when validate() fails; errors from the numerics
// propagate wrapped with the preset name.
RunResult run_preset(const ExperimentConfig& cfg);

// Merges summary.json files of earlier runs into one text report on `out`.
// Directories without a readable summary are listed as warnings and the rest
// is still consolidated. Returns the number of failed checks found.
int consolidate_report(const std::vector<std::string>& dirs, std::ostream& out);

// Plain decimals plus the power shorthand "2^-8" used by the stability presets.
double parse_real(const std::string& text);

}  // namespace islab
