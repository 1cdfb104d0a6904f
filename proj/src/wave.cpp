#include "islab/wave.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace islab {

namespace {

const double kSqrt2 = std::sqrt(2.0);

double base_time(const NonlinearitySpec& s, double t) { return s.time_reversed ? -t : t; }

// Collocation grid x_j = (j+1)/(P+1), j = 0..P-1, with the discrete sine
// transform pair. P >= 2*n_modes keeps cubic products of resolved modes from
// aliasing back into the resolved band.
struct SineGrid {
  int n_modes = 0;
  int grid = 0;
  Eigen::MatrixXd s;  // grid x n_modes
};

SineGrid make_grid(int n_modes, int requested) {
  SineGrid g;
  g.n_modes = n_modes;
  g.grid = std::max(requested, 2 * n_modes);
  g.s.resize(g.grid, n_modes);
  for (int j = 0; j < g.grid; ++j) {
    const double x = static_cast<double>(j + 1) / (g.grid + 1);
    for (int m = 0; m < n_modes; ++m) g.s(j, m) = std::sin((m + 1) * pi * x);
  }
  return g;
}

// K(t,w) in energy coordinates; optionally also the trapezoid value of
// int_0^1 phi(t,|u|^2) dx on the same grid pass.
State eval_nonlin(const NonlinearitySpec& nl, double t, const State& w, const SineGrid& g,
                  double* phi_int) {
  const int m_count = g.n_modes;
  const int p_count = g.grid;
  Eigen::VectorXd pr(m_count), pim(m_count);
  for (int m = 0; m < m_count; ++m) {
    const double scale = kSqrt2 / ((m + 1) * pi);  // p -> sine coefficient of u
    pr[m] = scale * w[m].real();
    pim[m] = scale * w[m].imag();
  }
  const Eigen::VectorXd ur = g.s * pr;
  const Eigen::VectorXd ui = g.s * pim;
  Eigen::VectorXd fr(p_count), fi(p_count);
  double acc = 0.0;
  for (int j = 0; j < p_count; ++j) {
    const double s2 = ur[j] * ur[j] + ui[j] * ui[j];
    const double ps = nl.psi(t, s2);
    fr[j] = -ps * ur[j];
    fi[j] = -ps * ui[j];
    if (phi_int) acc += nl.phi(t, s2);
  }
  if (phi_int) *phi_int = acc / (p_count + 1);
  const double forward = 2.0 / (p_count + 1);
  const Eigen::VectorXd gr = g.s.transpose() * fr;
  const Eigen::VectorXd gi = g.s.transpose() * fi;
  State out = State::Zero(2 * m_count);
  for (int m = 0; m < m_count; ++m)
    out[m_count + m] = forward / kSqrt2 * cplx(gr[m], gi[m]);
  return out;
}

}  // namespace

bool NonlinearitySpec::time_independent() const {
  return kind != Kind::TimeModulated || coeff == 0.0;
}

double NonlinearitySpec::psi(double t, double s) const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Linear: return coeff;
    case Kind::Cubic: return coeff * s;
    case Kind::Power: return coeff * std::pow(s, (exponent - 1.0) / 2.0);
    case Kind::TimeModulated:
      return coeff * (1.0 + std::sin(omega_t * base_time(*this, t))) * s;
  }
  throw std::logic_error("unreachable");
}

double NonlinearitySpec::phi(double t, double s) const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Linear: return coeff * s / 2.0;
    case Kind::Cubic: return coeff * s * s / 4.0;
    case Kind::Power: return coeff * std::pow(s, (exponent + 1.0) / 2.0) / (exponent + 1.0);
    case Kind::TimeModulated:
      return coeff * (1.0 + std::sin(omega_t * base_time(*this, t))) * s * s / 4.0;
  }
  throw std::logic_error("unreachable");
}

double NonlinearitySpec::kappa(double t) const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Linear:
    case Kind::Cubic:
    case Kind::Power: return std::abs(coeff);
    case Kind::TimeModulated:
      return std::abs(coeff) * (1.0 + std::sin(omega_t * base_time(*this, t)));
  }
  throw std::logic_error("unreachable");
}

double NonlinearitySpec::modulus_bound(double tau) const {
  if (time_independent()) return 0.0;
  return std::abs(coeff) * std::abs(omega_t) * tau;
}

NonlinearitySpec make_nonlinearity(const std::string& psi_id, double coeff, double exponent,
                                   double omega_t) {
  NonlinearitySpec s;
  s.coeff = coeff;
  s.exponent = exponent;
  s.omega_t = omega_t;
  if (psi_id == "zero") {
    s.kind = NonlinearitySpec::Kind::Zero;
    s.coeff = 0.0;
    s.alpha = 1.0;
  } else if (psi_id == "linear") {
    s.kind = NonlinearitySpec::Kind::Linear;
    s.alpha = 1.0;
  } else if (psi_id == "cubic") {
    s.kind = NonlinearitySpec::Kind::Cubic;
    s.alpha = 3.0;
  } else if (psi_id == "power") {
    if (!(exponent >= 1.0)) throw std::invalid_argument("power nonlinearity needs exponent >= 1");
    s.kind = NonlinearitySpec::Kind::Power;
    s.alpha = exponent;
  } else if (psi_id == "time-modulated") {
    s.kind = NonlinearitySpec::Kind::TimeModulated;
    s.alpha = 3.0;
  } else {
    throw std::invalid_argument("unknown nonlinearity id: " + psi_id);
  }
  s.sign_condition_flag = potential_nonnegative(s);
  return s;
}

bool potential_nonnegative(const NonlinearitySpec& spec, bool reversed_orientation) {
  static const double times[] = {0.0, 0.37, 1.9, 5.0, 12.3, -0.37, -1.9, -5.0, -12.3};
  for (double t : times) {
    for (int k = -8; k <= 8; ++k) {
      const double s = std::pow(10.0, 0.5 * k);
      const double v = reversed_orientation ? -spec.phi(-t, s) : spec.phi(t, s);
      if (v < -1e-12 * (1.0 + s * s)) return false;
    }
  }
  return true;
}

WaveSystem assemble(int n_modes, DampingSpec damping, int sign) {
  OperatorModel op = make_wave_blocks(n_modes, damping, sign);
  return WaveSystem{n_modes, std::move(damping), sign, std::move(op),
                    make_nonlinearity("zero")};
}

double recommended_dt_max(const WaveSystem& sys) {
  double b_sup = 0.0;
  switch (sys.damping.kind) {
    case DampingSpec::Kind::Constant: b_sup = std::abs(sys.damping.constant); break;
    case DampingSpec::Kind::Step:
      for (const auto& p : sys.damping.pieces) b_sup = std::max(b_sup, std::abs(p.value));
      break;
    case DampingSpec::Kind::Sampled:
      for (double v : sys.damping.samples) b_sup = std::max(b_sup, std::abs(v));
      break;
  }
  return 1.0 / (sys.n_modes * pi + b_sup);
}

State nonlinearity_apply(const NonlinearitySpec& spec, double t, const State& w,
                         int grid_points) {
  if (w.size() < 2 || w.size() % 2 != 0)
    throw std::invalid_argument("state must have even dimension 2*n_modes");
  const int m_count = static_cast<int>(w.size()) / 2;
  if (spec.zero()) return State::Zero(w.size());
  const SineGrid g = make_grid(m_count, grid_points);
  return eval_nonlin(spec, t, w, g, nullptr);
}

WaveTrajectory integrate(const WaveSystem& sys, const State& w0, double t_end,
                         int snapshot_stride) {
  const int m_count = sys.n_modes;
  if (w0.size() != 2 * m_count) throw std::invalid_argument("state dimension mismatch");
  if (!(t_end > 0.0) || !(sys.dt > 0.0))
    throw std::invalid_argument("need positive dt and t_end");
  if (sys.integrator != "exp-euler")
    throw std::invalid_argument("unknown integrator: " + sys.integrator);
  const double dt = sys.dt;
  const long n_steps = std::max<long>(1, std::lround(t_end / dt));
  const bool constant_b = sys.damping.kind == DampingSpec::Kind::Constant;
  const bool has_f = !sys.nonlin.zero();

  std::vector<Eigen::Matrix2cd> eblk, ehalf;
  std::vector<Eigen::Vector2cd> pcol;  // phi1 column hitting the q slot
  MatrixXcd emat, ehalf_mat, pmat;
  if (constant_b) {
    const double sb = sys.sign * sys.damping.constant;
    eblk.resize(m_count);
    if (has_f) {
      pcol.resize(m_count);
      ehalf.resize(m_count);
    }
    for (int k = 0; k < m_count; ++k) {
      const double om = (k + 1) * pi;
      eblk[k] = wave_block_exp(om, sb, dt);
      if (has_f) {
        ehalf[k] = wave_block_exp(om, sb, 0.5 * dt);
        Eigen::Matrix2cd ainv;
        ainv << cplx(sb), cplx(-om), cplx(om), cplx(0.0);
        ainv /= om * om;
        pcol[k] = (ainv * (eblk[k] - Eigen::Matrix2cd::Identity())).col(1);
      }
    }
  } else {
    const MatrixXcd ad = dense(sys.op);
    emat = expm(dt * ad);
    if (has_f) {
      ehalf_mat = expm(0.5 * dt * ad);
      pmat = ad.partialPivLu().solve(emat - MatrixXcd::Identity(2 * m_count, 2 * m_count));
    }
  }

  SineGrid grid;
  if (has_f) grid = make_grid(m_count, sys.grid_points);

  const MatrixXcd* bmat = constant_b ? nullptr : &sys.op.wave_damping_matrix();
  auto damping_power = [&](const State& w) -> double {
    const auto q = w.tail(m_count);
    if (constant_b) return sys.sign * sys.damping.constant * q.squaredNorm();
    return sys.sign * ((q.adjoint() * (*bmat) * q)(0, 0)).real();
  };

  WaveTrajectory out;
  out.snapshot_stride = snapshot_stride;
  out.records.reserve(n_steps + 1);
  out.damping_power.reserve(n_steps + 1);
  State w = w0;
  for (long n = 0; n <= n_steps; ++n) {
    const double t = n * dt;
    double phi_int = 0.0;
    if (has_f) eval_nonlin(sys.nonlin, t, w, grid, &phi_int);
    const double e0 = 0.5 * w.squaredNorm();
    out.records.push_back({t, e0, e0 + phi_int, w.norm()});
    out.damping_power.push_back(damping_power(w));
    if (snapshot_stride > 0 && n % snapshot_stride == 0) out.snapshots.push_back(w);
    if (n == n_steps) break;
    // forcing sampled at the freely rotated midpoint: formally still first
    // order in K, but the leading secular energy error cancels
    State k;
    if (has_f) {
      State whalf(2 * m_count);
      if (constant_b) {
        for (int kk = 0; kk < m_count; ++kk) {
          Eigen::Vector2cd v(w[kk], w[m_count + kk]);
          Eigen::Vector2cd r = ehalf[kk] * v;
          whalf[kk] = r[0];
          whalf[m_count + kk] = r[1];
        }
      } else {
        whalf = ehalf_mat * w;
      }
      k = eval_nonlin(sys.nonlin, t + 0.5 * dt, whalf, grid, nullptr);
    }
    State next(2 * m_count);
    if (constant_b) {
      for (int kk = 0; kk < m_count; ++kk) {
        Eigen::Vector2cd v(w[kk], w[m_count + kk]);
        Eigen::Vector2cd r = eblk[kk] * v;
        if (has_f) r += pcol[kk] * k[m_count + kk];
        next[kk] = r[0];
        next[m_count + kk] = r[1];
      }
    } else {
      next = emat * w;
      if (has_f) next += pmat * k;
    }
    const double from = out.records.back().state_norm;
    const double to = next.norm();
    if (!std::isfinite(to) || (from > 0.0 && to > 10.0 * from)) {
      std::ostringstream msg;
      msg << "integration unstable at t = " << fmt17(t) << ": |w| jumped " << fmt17(from)
          << " -> " << fmt17(to) << " in one step of dt = " << fmt17(dt);
      throw std::runtime_error(msg.str());
    }
    w = std::move(next);
  }
  out.final_state = std::move(w);
  return out;
}

BackwardProblem backward_transform(const WaveSystem& sys, const State& w0) {
  const int m_count = sys.n_modes;
  if (w0.size() != 2 * m_count) throw std::invalid_argument("state dimension mismatch");
  WaveSystem flipped = sys;
  flipped.sign = -sys.sign;
  flipped.op = make_wave_blocks(m_count, sys.damping, flipped.sign);
  flipped.nonlin.time_reversed = !sys.nonlin.time_reversed;
  State v = w0;
  v.tail(m_count) = -w0.tail(m_count);
  return BackwardProblem{std::move(flipped), std::move(v)};
}

RateFit fit_growth_rate(const std::vector<EnergyRecord>& records, double t_min) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : records) {
    if (r.t < t_min - 1e-12) continue;
    if (!(r.state_norm > 0.0))
      throw std::invalid_argument("non-positive state norm in fit window");
    pts.emplace_back(r.t, std::log(r.state_norm));
  }
  if (pts.size() < 10)
    throw std::invalid_argument("need at least 10 records with t >= t_min");
  double mt = 0.0, my = 0.0;
  for (auto& [t, y] : pts) {
    mt += t;
    my += y;
  }
  mt /= pts.size();
  my /= pts.size();
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (auto& [t, y] : pts) {
    stt += (t - mt) * (t - mt);
    sty += (t - mt) * (y - my);
    syy += (y - my) * (y - my);
  }
  RateFit fit;
  fit.omega_hat = sty / stt;
  const double ss_res = syy - sty * sty / stt;
  fit.r2 = syy <= 1e-30 ? 1.0 : std::max(0.0, 1.0 - ss_res / syy);
  fit.n_used = static_cast<int>(pts.size());
  fit.t_lo = pts.front().first;
  fit.t_hi = pts.back().first;
  return fit;
}

EnergyCertificate energy_certificate(const WaveSystem& sys, const WaveTrajectory& traj) {
  if (!sys.nonlin.sign_condition_flag)
    throw std::invalid_argument("energy certificate needs the sign condition");
  const auto& rec = traj.records;
  if (rec.size() < 2) throw std::invalid_argument("need at least 2 records");
  EnergyCertificate cert;
  std::ostringstream msg;

  double e0_max = 0.0;
  for (const auto& r : rec) e0_max = std::max(e0_max, std::abs(r.e0));
  double min_gap = std::numeric_limits<double>::infinity();
  bool e0_ok = true;
  for (const auto& r : rec) {
    min_gap = std::min(min_gap, r.e_full - r.e0);
    if (r.e0 < -1e-15) e0_ok = false;
  }
  cert.min_gap = min_gap;
  cert.ordering_ok = e0_ok && min_gap >= -1e-12 * (1.0 + e0_max);
  msg << "ordering " << (cert.ordering_ok ? "ok" : "violated") << ", min(E_full - E0) = "
      << fmt17(min_gap) << "\n";

  const double base = rec.front().e_full;
  auto dominated = [&](double c) {
    for (const auto& r : rec) {
      const double bound = (base + c * r.t) * std::exp(c * r.t) + 1e-9 * (1.0 + std::abs(base));
      if (r.e_full > bound) return false;
    }
    return true;
  };
  if (dominated(0.0)) {
    cert.gronwall_c = 0.0;
    cert.gronwall_ok = true;
  } else {
    double hi = 1e-6;
    while (hi < 1e9 && !dominated(hi)) hi *= 2.0;
    if (dominated(hi)) {
      double lo = 0.0;
      for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (dominated(mid) ? hi : lo) = mid;
      }
      cert.gronwall_c = hi;
      cert.gronwall_ok = true;
    } else {
      cert.gronwall_ok = false;
    }
  }
  msg << "gronwall " << (cert.gronwall_ok ? "ok" : "failed") << ", c = "
      << fmt17(cert.gronwall_c) << "\n";

  if (sys.nonlin.time_independent() && traj.damping_power.size() == rec.size()) {
    cert.increment_checked = true;
    double worst = 0.0;
    long worst_at = -1;
    for (size_t n = 0; n + 1 < rec.size(); ++n) {
      const double dtn = rec[n + 1].t - rec[n].t;
      const double de = rec[n + 1].e_full - rec[n].e_full;
      const double pred = 0.5 * dtn * (traj.damping_power[n] + traj.damping_power[n + 1]);
      const double scale = dtn * (1.0 + std::max(std::abs(rec[n].e_full), std::abs(rec[n + 1].e_full)));
      const double mism = std::abs(de - pred) / scale;
      if (mism > worst) {
        worst = mism;
        worst_at = static_cast<long>(n);
      }
    }
    cert.max_increment_mismatch = worst;
    cert.increment_ok = worst <= 1e-3;
    msg << "energy balance " << (cert.increment_ok ? "ok" : "off") << ", max mismatch "
        << fmt17(worst) << " at step " << worst_at << "\n";
  } else {
    msg << "energy balance skipped (time-dependent f or missing damping power)\n";
  }
  cert.message = msg.str();
  return cert;
}

State mode_pair_state(int n_modes, int mode, double b, int sign, double amplitude) {
  if (mode < 1 || mode > n_modes) throw std::invalid_argument("mode out of range");
  const double om = mode * pi;
  Eigen::Vector2d v(om, sign * b / 2.0);
  v *= amplitude / v.norm();
  State w = State::Zero(2 * n_modes);
  w[mode - 1] = v[0];
  w[n_modes + mode - 1] = v[1];
  return w;
}

State mode_state(int n_modes, int mode, double amplitude) {
  if (mode < 1 || mode > n_modes) throw std::invalid_argument("mode out of range");
  State w = State::Zero(2 * n_modes);
  w[mode - 1] = mode * pi * amplitude / kSqrt2;
  return w;
}

}  // namespace islab
