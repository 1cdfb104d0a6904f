#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "islab/core.hpp"
#include "islab/counterexamples.hpp"
#include "islab/dynamics.hpp"

using namespace islab;

namespace {
const double kEps = std::pow(2.0, -8);
}

TEST_CASE("bump f is the hat with plateau eps/2 and support (eps^3, eps)") {
  auto bp = build_bumps(kEps);
  const double e3 = kEps * kEps * kEps;
  CHECK(bp.f(0.0) == 0.0);
  CHECK(bp.f(e3) == 0.0);
  CHECK(bp.f(kEps) == 0.0);
  CHECK(bp.f(2.0 * kEps) == 0.0);
  CHECK(bp.f(4.0 * e3) == kEps / 2.0);   // plateau endpoints exact for dyadic eps
  CHECK(bp.f(kEps / 2.0) == kEps / 2.0);
  CHECK(bp.f(8.0 * e3) == kEps / 2.0);
  for (double s : {1.5 * e3, 3.0 * e3, 0.6 * kEps, 0.9 * kEps}) {
    CHECK(bp.f(s) > 0.0);
    CHECK(bp.f(s) <= kEps / 2.0);
  }
}

TEST_CASE("bump g respects the quadratic envelope s + t^2/s") {
  auto bp = build_bumps(kEps);
  const double e3 = kEps * kEps * kEps;
  for (double s : {0.5 * e3, 2.0 * e3, 8.0 * e3, kEps / 4.0, kEps / 2.0, 2.0 * kEps}) {
    for (double t : {0.0, kEps / 8.0, kEps / 4.0, kEps / 2.0, kEps, 2.0 * kEps}) {
      double v = bp.g(s, t);
      CHECK(v >= 0.0);
      if (s > 0) CHECK(v <= s + t * t / s + 1e-15);
      CHECK(v <= 2.0);  // capped by the product of unit-height hats times 2
    }
  }
  // on the joint plateau the cutoff saturates: the damping factor becomes 2 - 2 = 0
  CHECK(bp.g(8.0 * e3, kEps / 2.0) == 2.0);
  // outside either support g vanishes
  CHECK(bp.g(2.0 * kEps, kEps / 2.0) == 0.0);
  CHECK(bp.g(8.0 * e3, kEps / 100.0) == 0.0);
}

TEST_CASE("step_ex52 agrees bit for bit with the operator plus perturbation split") {
  const int dim_y = 6;
  auto bp = build_bumps(kEps);
  auto op = ex52_operator(dim_y);
  auto k = ex52_perturbation(bp, dim_y);
  auto rng = substream(1, 0);
  VectorXcd z0 = random_in_ball(rng, dim_y + 1, kEps * kEps * kEps);

  Ex52State x{z0.head(dim_y), z0[dim_y]};
  auto traj = iterate(op, {k}, z0, 50);
  for (int n = 1; n <= 50; ++n) {
    x = step_ex52(bp, x);
    VectorXcd flat(dim_y + 1);
    flat.head(dim_y) = x.y;
    flat[dim_y] = x.a;
    CHECK((flat - traj.states[n]).norm() == 0.0);
  }
}

TEST_CASE("verify_ex52 certifies the stability bounds on seeded starts") {
  auto bp = build_bumps(kEps);
  const double e3 = kEps * kEps * kEps;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    for (int trial = 0; trial < 5; ++trial) {
      auto rng = substream(seed, trial);
      VectorXcd z = random_in_ball(rng, 7, e3);
      Ex52State x0{z.head(6), z[6]};
      auto rep = verify_ex52(bp, x0, 2000);
      CHECK(rep.pass);
      CHECK(rep.sup_y <= 16.0 * e3);
      CHECK(rep.sup_slot <= kEps / 2.0 * (1 + 1e-12));
      CHECK(rep.sup_x <= kEps);
    }
  }
}

TEST_CASE("verify_ex52 keeps a consistent trace") {
  auto bp = build_bumps(kEps);
  const double e3 = kEps * kEps * kEps;
  auto rng = substream(4, 0);
  VectorXcd z = random_in_ball(rng, 7, e3);
  Ex52State x0{z.head(6), z[6]};
  auto rep = verify_ex52(bp, x0, 200, /*keep_trace=*/true);
  REQUIRE(rep.trace.size() == 201);
  for (const auto& row : rep.trace) {
    double expect = std::sqrt(row[1] * row[1] + row[2] * row[2]);
    CHECK(row[3] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(rep.trace[0][0] == 0.0);
  CHECK(rep.trace[200][0] == 200.0);
}

TEST_CASE("verify_ex52 rejects starts outside the smallness region") {
  auto bp = build_bumps(kEps);
  Ex52State big{State::Constant(6, kEps), 0.0};
  CHECK_THROWS_AS((void)verify_ex52(bp, big, 10), std::invalid_argument);
}

TEST_CASE("bump family construction enforces the scale recursion") {
  const double e1 = kEps;
  const double e2 = std::pow(2.0, -27);
  const double e3 = std::pow(2.0, -84);
  CHECK_NOTHROW((void)build_bump_family({e1, e2, e3}));
  CHECK_THROWS_AS((void)build_bump_family({e1, e1 * e1 * e1}), std::invalid_argument);
  CHECK_THROWS_AS((void)build_bump_family({0.5}), std::invalid_argument);
  CHECK_THROWS_AS((void)build_bump_family({e2, e1, e3}), std::invalid_argument);
}

TEST_CASE("verify_ex53 holds each scale with no cross-scale activity") {
  auto family = build_bump_family({kEps, std::pow(2.0, -27), std::pow(2.0, -84)});
  for (int k : {1, 2}) {
    const double ek = family[k - 1].eps;
    const double r = ek * ek * ek / 4.0;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
      auto rng = substream(seed, 100 + k);
      VectorXcd z = random_in_ball(rng, 6 + 3, r);
      Ex53State x0{z.head(6), z.tail(3)};
      auto rep = verify_ex53(family, k, x0, 2000);
      CHECK(rep.pass);
      CHECK(rep.sup_x <= ek);
      CHECK(rep.multi_active_events == 0);
    }
  }
  Ex53State x0{State::Zero(6), VectorXcd::Zero(3)};
  CHECK_THROWS_AS((void)verify_ex53(family, 4, x0, 10), std::invalid_argument);
}

TEST_CASE("the nonlinear part is quadratically bounded by certificate sampling") {
  auto family = build_bump_family({kEps, std::pow(2.0, -27)});
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    auto cert = g_certificate(family, 6, 300, seed);
    CHECK(cert.n_samples == 300);
    CHECK(cert.pass);
    CHECK(cert.max_ratio <= 1.0 + 1e-12);
    CHECK(cert.max_ratio > 0.0);
  }
}

TEST_CASE("ex52 trajectories peak at the slot plateau and then collapse to zero") {
  // the slot climbs to the plateau value eps/2, the plateau saturates the
  // cutoff (2 - g = 0), and from the exact zero the whole state stays zero
  auto bp = build_bumps(kEps);
  const double e3 = kEps * kEps * kEps;
  auto rng = substream(8, 0);
  VectorXcd z = random_in_ball(rng, 7, e3);
  Ex52State x0{z.head(6), z[6]};
  auto rep = verify_ex52(bp, x0, 5000, true);
  CHECK(rep.sup_slot == kEps / 2.0);  // dyadic plateau value, exact
  CHECK(rep.trace.back()[1] == 0.0);
  CHECK(rep.trace.back()[2] == 0.0);
  CHECK(rep.trace.back()[3] == 0.0);
}
