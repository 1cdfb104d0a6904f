// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria that mirror a preset run the same library path as the
// CLI (run_preset into a scratch directory); the energy and property
// criteria drive the modules directly.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "islab/core.hpp"
#include "islab/counterexamples.hpp"
#include "islab/dynamics.hpp"
#include "islab/experiments.hpp"
#include "islab/operator_model.hpp"
#include "islab/serialize.hpp"
#include "islab/spectral.hpp"
#include "islab/wave.hpp"

using namespace islab;
namespace fs = std::filesystem;

namespace {

std::string fmtg(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Line {
  std::string id;
  bool pass = false;
  std::string detail;
  double seconds = 0;
  double budget = 0;  // 0: untimed criterion
};

fs::path scratch_root() {
  static fs::path p = fs::temp_directory_path() / "islab-acceptance";
  return p;
}

Line timed(const std::string& id, double budget,
           const std::function<std::pair<bool, std::string>()>& body) {
  Line line;
  line.id = id;
  line.budget = budget;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto [ok, detail] = body();
    line.pass = ok;
    line.detail = detail;
  } catch (const std::exception& e) {
    line.pass = false;
    line.detail = std::string("exception: ") + e.what();
  }
  line.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget > 0 && line.seconds > budget) {
    line.pass = false;
    line.detail += "; time budget exceeded";
  }
  return line;
}

RunResult preset_run(const std::string& preset,
                     const std::map<std::string, std::string>& overrides = {}) {
  ExperimentConfig cfg;
  cfg.preset = preset;
  cfg.overrides = overrides;
  cfg.seed = 1;
  cfg.output_dir = (scratch_root() / preset).string();
  return run_preset(cfg);
}

std::string check_roll(const RunResult& r) {
  std::ostringstream os;
  int pass = 0;
  for (const auto& c : r.checks) pass += c.pass ? 1 : 0;
  os << pass << "/" << r.checks.size() << " checks";
  for (const auto& c : r.checks)
    if (!c.pass) os << "; FAIL " << c.anchor << " value " << fmtg(c.value) << " vs "
                    << fmtg(c.bound);
  return os.str();
}

DampingSpec const_damping(double b) {
  DampingSpec d;
  d.kind = DampingSpec::Kind::Constant;
  d.constant = b;
  return d;
}

// --- criterion bodies -----------------------------------------------------

std::pair<bool, std::string> two_bump_stability() {
  auto r = preset_run("ex52");
  std::ostringstream os;
  os << "100 starts, sup_y " << fmtg(r.metrics.at("sup_y")) << " vs 16 eps^3 "
     << fmtg(16.0 * std::pow(2.0, -24)) << ", sup_x " << fmtg(r.metrics.at("sup_x"))
     << " vs eps " << fmtg(std::pow(2.0, -8)) << "; " << check_roll(r);
  return {r.pass() && r.metrics.at("trials") == 100.0, os.str()};
}

std::pair<bool, std::string> scale_family_stability() {
  auto r = preset_run("ex53");
  std::ostringstream os;
  os << "50 starts per scale, k in {1,2}, certificate ratio "
     << fmtg(r.metrics.at("g_max_ratio")) << "; " << check_roll(r);
  return {r.pass(), os.str()};
}

std::pair<bool, std::string> constructed_growth() {
  auto r = preset_run("thm46-growth");
  bool margins_ok = r.pass() && r.metrics.at("min_slack") >= 0.0 &&
                    r.metrics.at("certified_horizon") >= 25.0;
  std::ostringstream os;
  os << "certified horizon " << fmtg(r.metrics.at("certified_horizon")) << ", min slack "
     << fmtg(r.metrics.at("min_slack")) << " (no tolerance); " << check_roll(r);
  return {margins_ok, os.str()};
}

std::pair<bool, std::string> ensemble_growth() {
  auto r = preset_run("thm44-ensemble");
  std::ostringstream os;
  os << "hit fraction " << fmtg(r.metrics.at("fraction")) << " of 200 samples; "
     << check_roll(r);
  return {r.pass() && r.metrics.at("fraction") == 1.0, os.str()};
}

std::pair<bool, std::string> damping_spectrum_scan() {
  auto r = preset_run("sR-scan");
  std::ostringstream os;
  os << "spectrum deviation " << fmtg(r.metrics.at("spectrum_deviation"))
     << " (tol 1e-10), scan estimate " << fmtg(r.metrics.at("s_R_estimate"))
     << " vs 0.5 within grid step 0.01; " << check_roll(r);
  return {r.pass(), os.str()};
}

std::pair<bool, std::string> step_damping_trend() {
  auto r = preset_run("cox-eigs");
  std::ostringstream os;
  os << "mean Re top-20% " << fmtg(r.metrics.at("mean_re_128")) << " @128, "
     << fmtg(r.metrics.at("mean_re_256")) << " @256 vs -0.5 (10%/5%); " << check_roll(r);
  return {r.pass(), os.str()};
}

std::pair<bool, std::string> time_reversed_rate() {
  auto r = preset_run("sola-backward-growth");
  const double w = r.metrics.at("omega_hat");
  bool window = w >= 0.475 && w <= 0.525;
  std::ostringstream os;
  os << "linear omega_hat " << fmtg(w) << " in [0.475, 0.525], semilinear "
     << fmtg(r.metrics.at("omega_hat_semilinear")) << " >= scan "
     << fmtg(r.metrics.at("s_R_estimate")) << " - 0.05; " << check_roll(r);
  return {r.pass() && window, os.str()};
}

std::pair<bool, std::string> energy_identities() {
  const int M = 32;
  auto sys = assemble(M, const_damping(0.0), -1);
  sys.nonlin = make_nonlinearity("cubic", 1.0);
  const double t_end = 5.0;
  auto drift_rate = [&](double dt) {
    sys.dt = dt;
    auto traj = integrate(sys, mode_state(M, 1, 0.3), t_end);
    const double e0 = traj.records.front().e_full;
    double worst = 0;
    for (const auto& rec : traj.records) worst = std::max(worst, std::abs(rec.e_full - e0));
    return worst / (e0 * t_end);
  };
  const double d1 = drift_rate(1e-3);
  const double d2 = drift_rate(5e-4);
  const bool drift_ok = d1 <= 1e-6;
  const bool order_ok = d1 / d2 >= 3.0;

  auto esys = assemble(64, const_damping(1.0), +1);  // f = 0
  auto etraj = integrate(esys, mode_pair_state(64, 3, 1.0, +1, 1.0), 10.0);
  double min_inc = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n + 1 < etraj.records.size(); ++n)
    min_inc = std::min(min_inc, etraj.records[n + 1].e0 - etraj.records[n].e0);
  const bool mono_ok = min_inc >= 0.0;

  std::ostringstream os;
  os << "conservative drift " << fmtg(d1) << "/unit time (tol 1e-6), halving gain "
     << fmtg(d1 / d2) << " (>= 3), excited min E0 increment " << fmtg(min_inc) << " (>= 0)";
  return {drift_ok && order_ok && mono_ok, os.str()};
}

std::pair<bool, std::string> shift_optimality() {
  auto r = preset_run("shift-optimality");
  std::ostringstream os;
  os << "axis level ratio vs 1.7, estimate " << fmtg(r.metrics.at("s_R_estimate"))
     << " within one grid step of 0, t=60 orbit norm " << fmtg(r.metrics.at("final_norm"))
     << " <= 1e-10; " << check_roll(r);
  return {r.pass(), os.str()};
}

std::pair<bool, std::string> algebra_properties() {
  int checked = 0, failed = 0;
  auto expect = [&](bool ok) {
    ++checked;
    if (!ok) ++failed;
  };

  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    auto rng = substream(seed, 0);

    // linearity of the operator action, every kind
    std::vector<OperatorModel> models;
    models.push_back(make_diagonal(random_in_ball(rng, 6, 2.0)));
    {
      MatrixXcd a(5, 5);
      for (int j = 0; j < 5; ++j) a.col(j) = random_in_ball(rng, 5, 1.0);
      models.push_back(make_dense(a));
    }
    models.push_back(make_weighted_shift(random_in_ball(rng, 6, 1.0), true, cplx(0.2, 0.1)));
    models.push_back(
        make_scaled_identity_block(2.0, 3, 0.4 * random_in_ball(rng, 4, 1.0)));
    models.push_back(make_wave_blocks(5, const_damping(1.0), -1));
    for (const auto& m : models) {
      VectorXcd x = random_in_ball(rng, m.dim(), 1.0);
      VectorXcd y = random_in_ball(rng, m.dim(), 1.0);
      const cplx al(1.3, -0.4), be(-0.7, 2.1);
      VectorXcd lhs = apply_op(m, al * x + be * y);
      VectorXcd rhs = al * apply_op(m, x) + be * apply_op(m, y);
      expect((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    // semigroup law, group and semigroup-only flavors
    {
      auto wave = make_wave_blocks(6, const_damping(1.0), -1);
      VectorXcd x = random_in_ball(rng, wave.dim(), 1.0);
      VectorXcd two = propagate(wave, 0.7, propagate(wave, 0.5, x));
      VectorXcd one = propagate(wave, 1.2, x);
      expect((two - one).norm() <= 1e-9 * (1.0 + one.norm()));

      auto shift = make_left_shift_generator(40, 0.5);
      VectorXcd z = random_in_ball(rng, 40, 1.0);
      VectorXcd s2 = propagate(shift, 0.8, propagate(shift, 0.4, z));
      VectorXcd s1 = propagate(shift, 1.2, z);
      expect((s2 - s1).norm() <= 1e-9 * (1.0 + s1.norm()));

      auto e1 = wave_block_exp(3.0 * pi, -1.0, 0.3);
      auto e2 = wave_block_exp(3.0 * pi, -1.0, 0.9);
      expect(((e1 * e1 * e1) - e2).norm() <= 1e-12 * e2.norm());
    }

    // orthogonal split of the norm across a Gram-Schmidt extension
    {
      std::vector<State> basis;
      for (int i = 0; i < 3; ++i) (void)gs_extend(basis, random_in_ball(rng, 8, 1.0));
      expect(basis.size() == 3);
      State x = random_in_ball(rng, 8, 1.0);
      State proj = State::Zero(8);
      for (const auto& b : basis) proj += b.dot(x) * b;
      const double lhs = x.squaredNorm();
      const double rhs = proj.squaredNorm() + (x - proj).squaredNorm();
      expect(std::abs(lhs - rhs) <= 1e-12 * (1.0 + lhs));
    }

    // compact perturbations deviate from the linear flow only inside the
    // accumulated range span
    {
      auto a = make_scaled_identity_block(2.0, 8, VectorXcd::Constant(24, 0.5));
      std::vector<CompactMap> ks;
      for (int n = 0; n < 8; ++n) {
        State e = State::Zero(32);
        e[(n % 5 == 0) ? 7 : 8 + (n % 16)] = 1.0;
        ks.push_back(quadratic_rank_one(e, 1.0));
      }
      State x = random_in_ball(rng, 32, 0.5);
      for (int j = 2; j <= 6; ++j) expect(compact_deviation_residual(a, ks, x, j) <= 1e-10);

      // determinism of the growing-vector construction, bit for bit
      auto g1 = construct_growing(a, ks, harmonic_sequence(), State::Zero(32), 1.0, 2, 8);
      auto g2 = construct_growing(a, ks, harmonic_sequence(), State::Zero(32), 1.0, 2, 8);
      expect((g1.x - g2.x).norm() == 0.0);

      // scale equivariance of the linear iteration
      State x0 = random_in_ball(rng, 32, 1.0);
      auto t1 = iterate(a, {}, x0, 12);
      auto tc = iterate(a, {}, cplx(0.0, 2.0) * x0, 12);
      bool equi = true;
      for (int n = 0; n <= 12; ++n)
        equi = equi && std::abs(tc.norms[n] - 2.0 * t1.norms[n]) <= 1e-12 * (1.0 + t1.norms[n]);
      expect(equi);
    }
  }

  std::ostringstream os;
  os << (checked - failed) << "/" << checked << " property checks across seeds {1,2,3}";
  return {failed == 0, os.str()};
}

}  // namespace

int main() {
  fs::remove_all(scratch_root());

  std::vector<Line> lines;
  lines.push_back(timed("01 two-bump-stability", 10.0, two_bump_stability));
  lines.push_back(timed("02 scale-family-stability", 20.0, scale_family_stability));
  lines.push_back(timed("03 constructed-growth", 5.0, constructed_growth));
  lines.push_back(timed("04 ensemble-growth", 10.0, ensemble_growth));
  lines.push_back(timed("05 damping-spectrum-scan", 30.0, damping_spectrum_scan));
  lines.push_back(timed("06 step-damping-trend", 120.0, step_damping_trend));
  lines.push_back(timed("07 time-reversed-rate", 60.0, time_reversed_rate));
  lines.push_back(timed("08 energy-identities", 60.0, energy_identities));
  lines.push_back(timed("09 shift-optimality", 30.0, shift_optimality));
  lines.push_back(timed("10 algebra-properties", 0.0, algebra_properties));

  int failures = 0;
  for (const auto& l : lines) {
    failures += l.pass ? 0 : 1;
    std::printf("[%s] %s: %s (%.1fs", l.pass ? "PASS" : "FAIL", l.id.c_str(),
                l.detail.c_str(), l.seconds);
    if (l.budget > 0) std::printf(" / budget %.0fs", l.budget);
    std::printf(")\n");
  }
  std::printf("acceptance: %d/%d criteria passed\n", static_cast<int>(lines.size()) - failures,
              static_cast<int>(lines.size()));

  fs::remove_all(scratch_root());
  return failures == 0 ? 0 : 1;
}
