#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "islab/dynamics.hpp"
#include "islab/operator_model.hpp"

namespace islab {

// Canonical piecewise-linear realization of the cutoff pair (f, g) at scale
// eps. f is the hat with plateau value eps/2 on [4 eps^3, eps/2], supported
// on (eps^3, eps). g = min{2 hat_s hat_t, s + t^2/s} where hat_s has plateau
// [4 eps^3, 16 eps^3] inside (eps^3, eps) and hat_t has plateau
// [eps/4, 3 eps/4] inside (eps/8, eps). Plateau values are exact for dyadic
// eps.
struct BumpPair {
  double eps = 0;
  double f(double s) const;
  double g(double s, double t) const;
};

// requires 0 < eps < 2^-7
BumpPair build_bumps(double eps);

// requires strictly decreasing, eps_1 < 2^-7 and eps_{j+1} < eps_j^3 / 4,
// which keeps the supports of consecutive scales disjoint
std::vector<BumpPair> build_bump_family(const std::vector<double>& eps_seq);

struct Ex52State {
  State y;
  cplx a{0.0, 0.0};
  double norm() const;
};

struct Ex53State {
  State y;
  VectorXcd slots;  // one per scale in the family
  double norm() const;
};

// (y, a) -> ((2 - g(||y||, |a|)) y, f(||y||)), evaluated as
// 2y + (-g)y so the trajectory agrees bit for bit with iterating the
// operator/perturbation split below.
Ex52State step_ex52(const BumpPair& bp, const Ex52State& x);

// (y, (a_j)) -> ((2 - sum_j g_j(||y||, |a_j|)) y, (f_j(||y||))_j). The scale
// recursion makes at most one summand active at a time.
Ex53State step_ex53(const std::vector<BumpPair>& family, const Ex53State& x);

struct StabilityReport {
  int steps = 0;
  double sup_y = 0;
  double sup_slot = 0;  // sup over n and j of |a_j|
  double sup_x = 0;
  double bound_y = 0;
  double bound_slot = 0;
  double bound_x = 0;
  bool pass = false;
  int multi_active_events = 0;  // steps where two scales were active at once
  std::vector<std::array<double, 4>> trace;  // n, ||y||, |a_active|, ||x||
  std::string message;
};

// requires ||y0|| <= eps^3 and |a0| <= eps^3; checks the stability bounds
// sup||y|| <= 16 eps^3, sup|a| <= eps/2, sup||x|| <= eps
StabilityReport verify_ex52(const BumpPair& bp, const Ex52State& x0, int n_steps,
                            bool keep_trace = false);

// requires ||x0|| <= eps_k^3 / 4 (k is 1-based); checks sup||x|| <= eps_k
StabilityReport verify_ex53(const std::vector<BumpPair>& family, int k, const Ex53State& x0,
                            int n_steps, bool keep_trace = false);

// max over samples of ||G(x)|| / ||x||^2 for the purely nonlinear part
// G(y,(a_j)) = (-sum_j g_j(||y||,|a_j|) y, 0); the cutoff cap makes the
// ratio at most 1
struct QuadraticCertificate {
  int n_samples = 0;
  double max_ratio = 0;
  bool pass = false;
};
QuadraticCertificate g_certificate(const std::vector<BumpPair>& family, int dim_y,
                                   int n_samples, std::uint64_t seed);

// The linear part (y, a) -> (2y, 0) as an operator model (dim_y + 1 slots,
// the scalar slot last).
OperatorModel ex52_operator(int dim_y);

// The perturbation as a finite-rank map on the truncation: coefficient
// f(||y||) in the scalar slot, plus (optionally) the -g(||y||,|a|) y part
// spread over the y slots.
CompactMap ex52_perturbation(const BumpPair& bp, int dim_y, bool include_g = true);

}  // namespace islab
