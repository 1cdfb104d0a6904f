#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "islab/core.hpp"
#include "islab/operator_model.hpp"
#include "islab/spectral.hpp"
#include "islab/wave.hpp"

using namespace islab;

namespace {

DampingSpec const_damping(double b) {
  DampingSpec d;
  d.kind = DampingSpec::Kind::Constant;
  d.constant = b;
  return d;
}

DampingSpec zero_damping() { return const_damping(0.0); }

}  // namespace

TEST_CASE("nonlinearity with psi = 1 maps u to (0, -u) in coordinates") {
  // f = psi(|u|^2) u = u, so K(w) = (0, -u-hat/sqrt(2)) exactly
  const int M = 8;
  auto spec = make_nonlinearity("linear", 1.0);
  for (int mode : {1, 3, 7}) {
    const double amp = 0.9;
    State w = mode_state(M, mode, amp);
    State k = nonlinearity_apply(spec, 0.0, w);
    for (int n = 0; n < M; ++n) {
      CHECK(std::abs(k[n]) <= 1e-14);  // no forcing in the p slots
      double expect = (n == mode - 1) ? -amp / std::sqrt(2.0) : 0.0;
      CHECK(std::abs(k[M + n] - expect) <= 1e-12);
    }
  }
}

TEST_CASE("cubic nonlinearity on a pure mode matches the sine product formula") {
  // -a^3 sin^3(pi x) = -(3 a^3/4) sin(pi x) + (a^3/4) sin(3 pi x); the
  // collocation grid resolves both products exactly (dealiased by default)
  const int M = 8;
  const double a = 0.7;
  auto spec = make_nonlinearity("cubic", 1.0);
  State w = mode_state(M, 1, a);
  State k = nonlinearity_apply(spec, 0.0, w);
  const double c1 = -3.0 * a * a * a / 4.0 / std::sqrt(2.0);
  const double c3 = a * a * a / 4.0 / std::sqrt(2.0);
  CHECK(std::abs(k[M + 0] - c1) <= 1e-10);
  CHECK(std::abs(k[M + 2] - c3) <= 1e-10);
  for (int n = 0; n < M; ++n) {
    CHECK(std::abs(k[n]) <= 1e-14);
    if (n != 0 && n != 2) CHECK(std::abs(k[M + n]) <= 1e-10);
  }
}

TEST_CASE("the recorded potential integral matches closed-form quadrature") {
  // phi = c u^4 / 4 for the cubic psi; int_0^1 a^4 sin^4(pi x) dx = 3 a^4 / 8
  const int M = 16;
  const double a = 0.5;
  auto sys = assemble(M, zero_damping(), -1);
  sys.nonlin = make_nonlinearity("cubic", 1.0);
  auto traj = integrate(sys, mode_state(M, 1, a), 10.0 * sys.dt);
  const double phi_int = traj.records.front().e_full - traj.records.front().e0;
  CHECK(phi_int == doctest::Approx(std::pow(a, 4) * 3.0 / 32.0).epsilon(1e-10));
  const double e0 = traj.records.front().e0;
  CHECK(e0 == doctest::Approx(0.25 * pi * pi * a * a).epsilon(1e-12));
}

TEST_CASE("block exponential satisfies the group law and determinant identity") {
  for (double om : {pi, 5.0 * pi}) {
    for (double sb : {-1.0, 0.0, 1.5}) {
      auto e1 = wave_block_exp(om, sb, 0.3);
      auto e2 = wave_block_exp(om, sb, 0.45);
      auto e3 = wave_block_exp(om, sb, 0.75);
      CHECK(((e1 * e2) - e3).norm() <= 1e-12 * e3.norm());
      CHECK(std::abs(e3.determinant()) ==
            doctest::Approx(std::exp(sb * 0.75)).epsilon(1e-12));
    }
  }
}

TEST_CASE("linear integration agrees with the closed semigroup") {
  const int M = 12;
  auto rngv = substream(6, 0);
  for (auto damping : {const_damping(1.0), const_damping(0.0)}) {
    auto sys = assemble(M, damping, -1);
    State w0 = random_in_ball(rngv, 2 * M, 1.0);
    auto traj = integrate(sys, w0, 1.0);
    State ref = propagate(sys.op, 1.0, w0);
    CHECK((traj.final_state - ref).norm() <= 1e-11 * (1.0 + ref.norm()));
  }
  // step damping goes through the dense exponential; same contract
  DampingSpec st;
  st.kind = DampingSpec::Kind::Step;
  st.pieces = {{2.0, 0.0, 0.5}, {0.0, 0.5, 1.0}};
  auto sys = assemble(M, st, -1);
  State w0 = random_in_ball(rngv, 2 * M, 1.0);
  auto traj = integrate(sys, w0, 1.0);
  State ref = propagate(sys.op, 1.0, w0);
  CHECK((traj.final_state - ref).norm() <= 1e-9 * (1.0 + ref.norm()));
}

TEST_CASE("damped and excited generators are conjugate up to time reversal") {
  // J (p,q) = (p,-q) intertwines: A_excited = J (-A_damped) J
  const int M = 10;
  auto damped = make_wave_blocks(M, const_damping(1.0), -1);
  auto excited = make_wave_blocks(M, const_damping(1.0), +1);
  MatrixXcd j = MatrixXcd::Identity(2 * M, 2 * M);
  for (int n = 0; n < M; ++n) j(M + n, M + n) = -1.0;
  MatrixXcd lhs = dense(excited);
  MatrixXcd rhs = j * (-dense(damped)) * j;
  CHECK((lhs - rhs).norm() <= 1e-12 * lhs.norm());
}

TEST_CASE("backward transform is an involution and matches the reversed group") {
  const int M = 10;
  auto sys = assemble(M, const_damping(1.0), -1);
  sys.nonlin = make_nonlinearity("cubic", -1.0);
  auto rng = substream(12, 0);
  State w0 = random_in_ball(rng, 2 * M, 0.5);

  auto bp = backward_transform(sys, w0);
  CHECK(bp.system.sign == +1);
  CHECK(bp.system.nonlin.time_reversed);
  auto bp2 = backward_transform(bp.system, bp.w0);
  CHECK(bp2.system.sign == -1);
  CHECK_FALSE(bp2.system.nonlin.time_reversed);
  CHECK((bp2.w0 - w0).norm() == 0.0);

  // with f = 0 the reversed run is J e^{-tA} w0 evaluated by the group
  auto lin = assemble(M, const_damping(1.0), -1);
  auto blin = backward_transform(lin, w0);
  const double T = 2.0;
  auto traj = integrate(blin.system, blin.w0, T);
  State ref = propagate(lin.op, -T, w0);
  for (int n = 0; n < M; ++n) ref[M + n] = -ref[M + n];
  CHECK((traj.final_state - ref).norm() <= 1e-9 * (1.0 + ref.norm()));
}

TEST_CASE("conservative drift is tiny and shrinks like dt^2") {
  const int M = 16;
  auto sys = assemble(M, zero_damping(), -1);
  sys.nonlin = make_nonlinearity("linear", 0.01);
  const double t_end = 2.0;
  auto drift = [&](double dt) {
    sys.dt = dt;
    auto traj = integrate(sys, mode_state(M, 1, 1.0), t_end);
    const double e0 = traj.records.front().e_full;
    double worst = 0;
    for (const auto& r : traj.records) worst = std::max(worst, std::abs(r.e_full - e0));
    return worst / (e0 * t_end);
  };
  const double d1 = drift(1e-3);
  const double d2 = drift(5e-4);
  CHECK(d1 <= 1e-8);        // unit-time relative drift budget at dt = 1e-3
  CHECK(d1 / d2 >= 3.0);    // halving dt cuts the drift ~4x
}

TEST_CASE("energy bookkeeping respects the damping sign when f = 0") {
  const int M = 16;
  auto rng = substream(14, 0);
  State w0 = random_in_ball(rng, 2 * M, 1.0);
  auto damped = assemble(M, const_damping(1.0), -1);
  auto dt = integrate(damped, w0, 2.0);
  for (size_t n = 1; n < dt.records.size(); ++n)
    CHECK(dt.records[n].e0 <= dt.records[n - 1].e0 * (1.0 + 1e-12));

  auto excited = assemble(M, const_damping(1.0), +1);
  auto et = integrate(excited, mode_pair_state(M, 2, 1.0, +1), 2.0);
  for (size_t n = 1; n < et.records.size(); ++n)
    CHECK(et.records[n].e0 >= et.records[n - 1].e0 * (1.0 - 1e-12));
}

TEST_CASE("energy certificate validates a conservative nonlinear run") {
  const int M = 12;
  auto sys = assemble(M, zero_damping(), -1);
  sys.nonlin = make_nonlinearity("cubic", 1.0);
  auto traj = integrate(sys, mode_state(M, 1, 0.4), 1.0);
  auto cert = energy_certificate(sys, traj);
  CHECK(cert.ordering_ok);     // phi >= 0, so e_full >= e0 >= 0
  CHECK(cert.min_gap >= 0.0);
  CHECK(cert.gronwall_ok);
  CHECK(cert.increment_checked);
  CHECK(cert.increment_ok);
  CHECK(cert.max_increment_mismatch <= 1e-6);
}

TEST_CASE("energy certificate tracks the damping power balance") {
  const int M = 12;
  auto sys = assemble(M, const_damping(1.0), -1);
  auto rng = substream(15, 0);
  auto traj = integrate(sys, random_in_ball(rng, 2 * M, 1.0), 1.0);
  auto cert = energy_certificate(sys, traj);
  CHECK(cert.ordering_ok);
  CHECK(cert.gronwall_ok);
  CHECK(cert.increment_checked);
  CHECK(cert.increment_ok);
  for (double p : traj.damping_power) CHECK(p <= 0.0);
}

TEST_CASE("growth rate fit recovers an exact exponential slope") {
  std::vector<EnergyRecord> recs;
  for (int n = 0; n <= 1000; ++n) {
    EnergyRecord r;
    r.t = n * 0.01;
    r.state_norm = 2.0 * std::exp(0.5 * r.t);
    r.e0 = 0.5 * r.state_norm * r.state_norm;
    r.e_full = r.e0;
    recs.push_back(r);
  }
  auto fit = fit_growth_rate(recs, 3.0);
  CHECK(fit.omega_hat == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.t_lo >= 3.0);
  CHECK(fit.n_used == 701);
  CHECK_THROWS_AS((void)fit_growth_rate(recs, 10.5), std::invalid_argument);
}

TEST_CASE("nonlinearity catalogue exposes the declared structure") {
  CHECK_THROWS_AS((void)make_nonlinearity("no-such-psi"), std::invalid_argument);
  CHECK_THROWS_AS((void)make_nonlinearity("power", 1.0, 0.5), std::invalid_argument);

  auto cubic = make_nonlinearity("cubic", 1.0);
  CHECK(cubic.sign_condition_flag);
  CHECK(cubic.time_independent());
  CHECK(potential_nonnegative(cubic));
  auto anti = make_nonlinearity("cubic", -1.0);
  CHECK_FALSE(potential_nonnegative(anti));
  CHECK(potential_nonnegative(anti, /*reversed_orientation=*/true));

  auto tm = make_nonlinearity("time-modulated", 1.0, 3.0, 2.0);
  CHECK_FALSE(tm.time_independent());
  CHECK(tm.modulus_bound(0.0) == 0.0);
  CHECK(tm.modulus_bound(0.1) > 0.0);

  auto zero = make_nonlinearity("zero");
  CHECK(zero.zero());
  CHECK(zero.phi(0.0, 4.0) == 0.0);
}

TEST_CASE("nonlinearity time reversal evaluates psi at -t") {
  auto tm = make_nonlinearity("time-modulated", 1.0, 3.0, 2.0);
  auto rev = tm;
  rev.time_reversed = true;
  for (double t : {0.3, 1.7}) {
    CHECK(rev.psi(t, 0.5) == tm.psi(-t, 0.5));
    CHECK(rev.phi(t, 0.5) == tm.phi(-t, 0.5));
  }
}

TEST_CASE("integration guards against unstable step sizes") {
  const int M = 8;
  auto sys = assemble(M, zero_damping(), -1);
  CHECK(recommended_dt_max(sys) == doctest::Approx(1.0 / (M * pi)).epsilon(1e-6));
  sys.nonlin = make_nonlinearity("cubic", 1e3);
  sys.dt = 0.5;
  CHECK_THROWS_AS((void)integrate(sys, mode_state(M, 1, 10.0), 5.0), std::runtime_error);
}

TEST_CASE("integration is deterministic") {
  const int M = 12;
  auto sys = assemble(M, const_damping(1.0), -1);
  sys.nonlin = make_nonlinearity("cubic", -1.0);
  auto rng = substream(21, 0);
  State w0 = random_in_ball(rng, 2 * M, 0.5);
  auto t1 = integrate(sys, w0, 1.0);
  auto t2 = integrate(sys, w0, 1.0);
  CHECK((t1.final_state - t2.final_state).norm() == 0.0);
  REQUIRE(t1.records.size() == t2.records.size());
  for (size_t n = 0; n < t1.records.size(); ++n)
    CHECK(t1.records[n].e_full == t2.records[n].e_full);
}

TEST_CASE("mode states carry the advertised norm and support") {
  const int M = 16;
  State w = mode_state(M, 3, 0.8);
  CHECK(std::abs(w[2] - 3.0 * pi * 0.8 / std::sqrt(2.0)) <= 1e-14);
  for (int n = 0; n < 2 * M; ++n)
    if (n != 2) CHECK(std::abs(w[n]) == 0.0);

  State pair = mode_pair_state(M, 3, 1.0, +1, 2.5);
  CHECK(pair.norm() == doctest::Approx(2.5).epsilon(1e-12));
  for (int n = 0; n < 2 * M; ++n)
    if (n != 2 && n != M + 2) CHECK(std::abs(pair[n]) == 0.0);
}
