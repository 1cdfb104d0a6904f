#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "islab/operator_model.hpp"

namespace islab {

// Finite-rank perturbation K: x -> sum_i coeff_i(x) * range_basis[i].
// Finite rank makes the map compact; the coefficient function is expected to
// be bounded on bounded sets (sample_bounded records the evidence).
struct CompactMap {
  std::vector<State> range_basis;  // orthonormal
  std::function<VectorXcd(const State&)> coefficient_fn;
  std::optional<int> time_index;
  std::optional<double> lipschitz_hint;
};

State apply_op(const CompactMap& k, const State& x);

CompactMap zero_map();
// rank-1 map x -> gamma * <e,x>^2 * e
CompactMap quadratic_rank_one(const State& e, double gamma, std::optional<double> lip = {});

// Rescaled sequence entry n (0-based): z -> rho^-(n+1) K_{n+1}(rho^n z).
// Iterating (A/rho) with the rescaled maps reproduces the original norms
// times rho^-n.
std::vector<CompactMap> scaled_sequence(const std::vector<CompactMap>& ks, double rho);

struct MapSampleReport {
  double sup_norm = 0;          // sup of ||K(x)|| over the sample
  double max_span_residual = 0; // distance of outputs to span(range_basis)
};
MapSampleReport sample_bounded(const CompactMap& k, int dim, double radius, int n_samples,
                               std::uint64_t seed);

// Orbit of x_{n+1} = A x_n + K_n(x_n). States are stored verbatim while the
// norm stays below 1e100; past that the representation switches to
// (log-norm, unit direction) so exponential growth can be followed far beyond
// double range. `norms` saturates to +inf where needed; `log_norms` stays
// finite. If even the guarded step produces non-finite data (a nonlinear K
// evaluated outside representable range) the trajectory is cut short and
// `truncated` is set.
struct Trajectory {
  std::vector<State> states;  // full states, unit directions once guarded
  std::vector<double> norms;
  std::vector<double> log_norms;
  std::vector<double> lower_bound;  // optional companion data for reports
  int start_index = 0;
  bool guarded = false;
  int guard_index = -1;
  bool truncated = false;
};

// K_seq must have length >= N, or length 1 (a time-independent map reused),
// or length 0 (pure linear iteration).
Trajectory iterate(const OperatorModel& a, const std::vector<CompactMap>& k_seq,
                   const State& x0, int n_steps);

struct BoundReport {
  std::vector<double> margins;      // norms[n] - a_n * rate^n, saturating
  std::vector<double> log_margins;  // log norms[n] - log(a_n rate^n)
  int n0 = 0;
  int first_violation = -1;  // -1: bound holds on [n0, N]
  bool pass = true;
  double min_slack = 0;  // min over n of norms[n]/(a_n rate^n) - 1
};
BoundReport check_lower_bound(const Trajectory& traj, const std::vector<double>& a_seq,
                              double rate, int n0);

// Parameter ledger of the growing-vector construction. F_list[k] is the
// orthonormal basis of the k-th obstruction space; the bases are nested by
// prefix, so the orthogonal complements M_k shrink as k grows.
struct SubspaceChain {
  std::vector<std::vector<State>> F_list;
  std::vector<double> eps_list;
  std::vector<double> c_list;
  std::vector<int> n_list;  // n_0, n_1, ..., n_depth
};

struct GrowingConstruction {
  State x;
  std::vector<State> kernel_vectors;  // chosen x_k, mutually orthogonal
  SubspaceChain chain;
  int depth = 0;
  int certified_horizon = 0;  // bound certified on [n0, certified_horizon]
  bool truncated = false;     // kernel supply ran out before the horizon
  std::string log;
};

// Builds x = y + sum_k c_k x_k with ||x - y|| < r such that the orbit under
// x_{n+1} = A x_n + K_n(x_n) satisfies ||x_n|| >= a(n) * r_e^n on
// [n0, certified_horizon]. The model must expose a peripheral kernel block
// (ScaledIdentityBlock); the construction works in the rescaled picture
// A/mu, where the block becomes the identity, and exploits that the
// rescaled perturbations keep the same range spaces. Deterministic: reruns
// reproduce x bit for bit.
GrowingConstruction construct_growing(const OperatorModel& a,
                                      const std::vector<CompactMap>& k_seq,
                                      const std::function<double(int)>& a_seq, const State& y,
                                      double r, int n0, int horizon,
                                      std::optional<double> c1 = {});

struct EnsembleStats {
  int n_samples = 0;
  double fraction = 0;         // share of samples with at least one hit
  std::vector<int> first_hit;  // per sample, -1 when no index qualifies
};

// Samples x0 uniformly in the ball B(y, radius) and reports how often the
// orbit reaches ||x_n|| >= a(n) * mu_bound(n) for some n in `indices`.
// Randomness is split per sample, so the result does not depend on
// evaluation order.
EnsembleStats residual_growth_ensemble(const OperatorModel& a,
                                       const std::vector<CompactMap>& k_seq,
                                       const std::function<double(int)>& a_seq,
                                       const std::vector<int>& indices, int n_samples,
                                       const State& y, double radius, int n_steps,
                                       std::uint64_t seed);

// Distance of f_j(x) - A^j x to the accumulated perturbation range
// span{A^(j-s-1) range(K_(s+1))}, relative to max(1, ||deviation||).
double compact_deviation_residual(const OperatorModel& a, const std::vector<CompactMap>& k_seq,
                                  const State& x, int j);

// Appends v's component orthogonal to `basis` (two-pass modified
// Gram-Schmidt); returns false when v is numerically inside the span.
bool gs_extend(std::vector<State>& basis, State v, double tol = 1e-12);

inline std::function<double(int)> harmonic_sequence() {
  return [](int n) { return 1.0 / (n + 1); };
}

}  // namespace islab
