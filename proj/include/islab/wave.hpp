#pragma once

#include <string>
#include <vector>

#include "islab/core.hpp"
#include "islab/operator_model.hpp"

namespace islab {

// Scalar nonlinearity f(t,zeta) = psi(t,|zeta|^2) zeta acting pointwise on the
// displacement, with potential phi(t,s) = (1/2) int_0^s psi(t,r) dr so that
// grad_zeta phi = f under the C = R^2 identification. No explicit x dependence.
struct NonlinearitySpec {
  enum class Kind { Zero, Linear, Cubic, Power, TimeModulated };
  Kind kind = Kind::Zero;
  double coeff = 0.0;
  double exponent = 3.0;  // p in f = c|zeta|^{p-1} zeta (Power only)
  double omega_t = 1.0;   // modulation frequency (TimeModulated only)
  double alpha = 1.0;     // declared growth exponent: |f| <= kappa(t)(1+|zeta|^alpha)
  bool sign_condition_flag = false;
  // Evaluate the base psi at -t. Set by backward_transform; toggling twice is
  // the identity.
  bool time_reversed = false;

  bool zero() const { return kind == Kind::Zero || coeff == 0.0; }
  bool time_independent() const;
  double psi(double t, double s) const;
  double phi(double t, double s) const;
  double kappa(double t) const;
  // omega(tau) with |f(t,zeta) - f(s,zeta)| <= omega(|t-s|) (1+|zeta|^alpha).
  double modulus_bound(double tau) const;
};

// psi_id: "zero", "linear" (psi = c), "cubic" (psi = c s), "power"
// (psi = c s^{(p-1)/2}), "time-modulated" (psi = c (1+sin(omega_t t)) s).
NonlinearitySpec make_nonlinearity(const std::string& psi_id, double coeff = 1.0,
                                   double exponent = 3.0, double omega_t = 1.0);

// Sampled check that the potential keeps one sign. With reversed_orientation
// the forcing enters the time-reversed first-order problem with the opposite
// sign, so the relevant potential is -phi(-t, s).
bool potential_nonnegative(const NonlinearitySpec& spec, bool reversed_orientation = false);

// Sine-Galerkin wave system on [0,1] in energy coordinates (see WaveData).
struct WaveSystem {
  int n_modes = 0;
  DampingSpec damping;
  int sign = -1;  // -1 damped, +1 excited
  OperatorModel op;
  NonlinearitySpec nonlin;
  double dt = 1e-3;
  std::string integrator = "exp-euler";
  int grid_points = 0;  // collocation size; 0 or too small -> 2*n_modes
};

WaveSystem assemble(int n_modes, DampingSpec damping, int sign);

// dt above this makes the fastest mode rotate more than one radian per step.
double recommended_dt_max(const WaveSystem& sys);

// K(t,w) = (0, -f(t,.,u)): displacement from the p slots to the collocation
// grid, pointwise -f, projected back into the q slots. Finite rank by
// construction (range inside the resolved modes).
State nonlinearity_apply(const NonlinearitySpec& spec, double t, const State& w,
                         int grid_points = 0);

struct EnergyRecord {
  double t = 0.0;
  double e0 = 0.0;      // (1/2)|w|^2 = (1/2) int |u_x|^2 + |u_t|^2 dx
  double e_full = 0.0;  // e0 + int phi dx
  double state_norm = 0.0;
};

struct WaveTrajectory {
  std::vector<EnergyRecord> records;  // one per step boundary, starting at t = 0
  // sign * int b |u_t|^2 dx at each record; e_full'(t) matches this when f is
  // time independent.
  std::vector<double> damping_power;
  State final_state;
  std::vector<State> snapshots;
  int snapshot_stride = 0;
};

// Exponential Euler on the mild form,
//   w <- e^{dt A} w + dt phi1(dt A) K(t + dt/2, e^{dt A / 2} w),
// with the forcing sampled at the freely rotated midpoint so the conservative
// energy drift is second order in practice. Constant damping uses exact
// per-mode block exponentials; step and sampled damping go through a dense
// matrix exponential computed once.
WaveTrajectory integrate(const WaveSystem& sys, const State& w0, double t_end,
                         int snapshot_stride = 0);

// u~(t) := u(-t) swaps damped and excited forms: negate the velocity slots,
// flip the damping sign, evaluate the nonlinearity at -t. An involution.
struct BackwardProblem {
  WaveSystem system;
  State w0;
};
BackwardProblem backward_transform(const WaveSystem& sys, const State& w0);

struct RateFit {
  double omega_hat = 0.0;
  double r2 = 0.0;
  int n_used = 0;
  double t_lo = 0.0;
  double t_hi = 0.0;
};

// Least-squares slope of log(state_norm) over records with t >= t_min.
RateFit fit_growth_rate(const std::vector<EnergyRecord>& records, double t_min);

struct EnergyCertificate {
  bool ordering_ok = false;  // e_full >= e0 >= 0 throughout
  double min_gap = 0.0;      // min over records of e_full - e0
  double gronwall_c = 0.0;   // smallest c with E(t) <= (E(0) + c t) e^{c t}
  bool gronwall_ok = false;
  bool increment_checked = false;  // per-step energy balance ran (f time independent)
  double max_increment_mismatch = 0.0;
  bool increment_ok = true;
  std::string message;
};

EnergyCertificate energy_certificate(const WaveSystem& sys, const WaveTrajectory& traj);

// Real part of the eigenvector pair of one 2x2 block: (p,q) = (omega, sb/2)
// in the given mode, scaled to norm `amplitude`.
State mode_pair_state(int n_modes, int mode, double b, int sign, double amplitude = 1.0);

// u = amplitude sin(mode pi x), u_t = 0.
State mode_state(int n_modes, int mode, double amplitude);

}  // namespace islab
