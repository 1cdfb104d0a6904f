#include "islab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "islab/core.hpp"
#include "islab/spectral.hpp"

namespace islab {

namespace {

constexpr double kGuardNorm = 1e100;
constexpr double kMaterializeLog = 667.0;  // exp(667) ~ 1e289, safely in range
const double kNegInf = -std::numeric_limits<double>::infinity();

const CompactMap* pick_map(const std::vector<CompactMap>& ks, int step) {
  if (ks.empty()) return nullptr;
  if (ks.size() == 1) return &ks[0];
  return &ks[static_cast<size_t>(step) - 1];
}

bool effectively_zero(const CompactMap* k) { return k == nullptr || k->range_basis.empty(); }

void validate_map_sequence(const std::vector<CompactMap>& ks, int n_steps, int dim) {
  if (ks.size() > 1 && static_cast<int>(ks.size()) < n_steps)
    throw std::invalid_argument("need one map per step, a single reusable map, or none");
  for (const auto& k : ks) {
    for (size_t i = 0; i < k.range_basis.size(); ++i) {
      if (k.range_basis[i].size() != dim)
        throw std::invalid_argument("range vector dimension mismatch");
      if (std::abs(k.range_basis[i].norm() - 1.0) > 1e-10)
        throw std::invalid_argument("range basis must be orthonormal");
      for (size_t j = 0; j < i; ++j)
        if (std::abs(k.range_basis[j].dot(k.range_basis[i])) > 1e-10)
          throw std::invalid_argument("range basis must be orthonormal");
    }
    if (!k.range_basis.empty() && !k.coefficient_fn)
      throw std::invalid_argument("map with nonempty range needs a coefficient function");
  }
}

}  // namespace

State apply_op(const CompactMap& k, const State& x) {
  if (k.range_basis.empty()) return State::Zero(x.size());
  VectorXcd c = k.coefficient_fn(x);
  if (c.size() != static_cast<Eigen::Index>(k.range_basis.size()))
    throw std::invalid_argument("coefficient count does not match range rank");
  State out = State::Zero(x.size());
  for (size_t i = 0; i < k.range_basis.size(); ++i) out += c[static_cast<int>(i)] * k.range_basis[i];
  return out;
}

CompactMap zero_map() { return CompactMap{}; }

CompactMap quadratic_rank_one(const State& e, double gamma, std::optional<double> lip) {
  CompactMap k;
  State u = e.normalized();
  k.range_basis = {u};
  k.coefficient_fn = [u, gamma](const State& x) {
    VectorXcd c(1);
    cplx ip = u.dot(x);
    c[0] = gamma * ip * ip;
    return c;
  };
  k.lipschitz_hint = lip;
  return k;
}

std::vector<CompactMap> scaled_sequence(const std::vector<CompactMap>& ks, double rho) {
  if (!(rho > 0)) throw std::invalid_argument("scaling factor must be positive");
  std::vector<CompactMap> out;
  out.reserve(ks.size());
  for (size_t i = 0; i < ks.size(); ++i) {
    const CompactMap& k = ks[i];
    CompactMap s = k;
    if (!k.range_basis.empty()) {
      const int step = static_cast<int>(i) + 1;  // map applied at step n = i+1
      const double in = std::pow(rho, step - 1);
      const double outp = std::pow(rho, -step);
      auto fn = k.coefficient_fn;
      s.coefficient_fn = [fn, in, outp](const State& x) -> VectorXcd {
        return outp * fn((in * x).eval());
      };
    }
    out.push_back(std::move(s));
  }
  return out;
}

MapSampleReport sample_bounded(const CompactMap& k, int dim, double radius, int n_samples,
                               std::uint64_t seed) {
  MapSampleReport rep;
  for (int i = 0; i < n_samples; ++i) {
    auto rng = substream(seed, static_cast<std::uint64_t>(i));
    State x = random_in_ball(rng, dim, radius);
    State v = apply_op(k, x);
    rep.sup_norm = std::max(rep.sup_norm, v.norm());
    State p = v;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : k.range_basis) p -= b.dot(p) * b;
    rep.max_span_residual = std::max(rep.max_span_residual, p.norm() / std::max(1.0, v.norm()));
  }
  return rep;
}

Trajectory iterate(const OperatorModel& a, const std::vector<CompactMap>& k_seq,
                   const State& x0, int n_steps) {
  if (n_steps < 1) throw std::invalid_argument("need at least one step");
  if (x0.size() != a.dim()) throw std::invalid_argument("state dimension mismatch");
  validate_map_sequence(k_seq, n_steps, a.dim());

  Trajectory traj;
  traj.states.reserve(n_steps + 1);
  traj.states.push_back(x0);
  double n0 = x0.norm();
  traj.norms.push_back(n0);
  traj.log_norms.push_back(n0 > 0 ? std::log(n0) : kNegInf);

  double s = 0;  // log of the factored-out scale once guarded
  for (int n = 1; n <= n_steps; ++n) {
    const CompactMap* k = pick_map(k_seq, n);
    State v;
    if (!traj.guarded) {
      const State& x = traj.states.back();
      v = apply_op(a, x);
      if (!effectively_zero(k)) v += apply_op(*k, x);
      if (!v.allFinite()) {
        traj.truncated = true;
        break;
      }
      double nv = v.norm();
      if (nv > kGuardNorm) {
        traj.guarded = true;
        traj.guard_index = n;
        s = std::log(nv);
        traj.states.push_back(v / nv);
      } else {
        traj.states.push_back(v);
      }
      traj.norms.push_back(nv);
      traj.log_norms.push_back(nv > 0 ? std::log(nv) : kNegInf);
    } else {
      const State& u = traj.states.back();  // unit direction, true state = e^s u
      if (effectively_zero(k)) {
        v = apply_op(a, u);
      } else if (s <= kMaterializeLog) {
        State z = std::exp(s) * u;
        v = apply_op(a, z) + apply_op(*k, z);
        if (!v.allFinite()) {
          traj.truncated = true;
          break;
        }
        s = 0;  // v carries the full magnitude again
      } else {
        // nonlinear map at a state beyond double range: cannot evaluate
        traj.truncated = true;
        break;
      }
      double nv = v.norm();
      if (!std::isfinite(nv)) {
        traj.truncated = true;
        break;
      }
      if (nv > 0) {
        s += std::log(nv);
        traj.states.push_back(v / nv);
      } else {
        s = kNegInf;
        traj.states.push_back(State::Zero(a.dim()));
      }
      traj.norms.push_back(std::isfinite(s) && s < 709.0 ? std::exp(s)
                                                         : (s > 0 ? std::numeric_limits<double>::infinity() : 0.0));
      traj.log_norms.push_back(s);
    }
  }
  return traj;
}

BoundReport check_lower_bound(const Trajectory& traj, const std::vector<double>& a_seq,
                              double rate, int n0) {
  if (traj.start_index != 0) throw std::invalid_argument("trajectory must start at index 0");
  const int n_max = static_cast<int>(traj.norms.size()) - 1;
  if (n0 < 0 || n0 > n_max) throw std::invalid_argument("n0 outside the trajectory range");
  if (static_cast<int>(a_seq.size()) < n_max + 1)
    throw std::invalid_argument("sequence shorter than the trajectory");
  if (rate < 0) throw std::invalid_argument("rate must be non-negative");

  BoundReport rep;
  rep.n0 = n0;
  rep.min_slack = std::numeric_limits<double>::infinity();
  const double lograte = rate > 0 ? std::log(rate) : kNegInf;
  for (int n = n0; n <= n_max; ++n) {
    double log_lb = (n == 0) ? std::log(a_seq[0]) : std::log(a_seq[n]) + n * lograte;
    double lb = std::exp(log_lb);
    double margin_log =
        log_lb == kNegInf ? std::numeric_limits<double>::infinity() : traj.log_norms[n] - log_lb;
    rep.margins.push_back(traj.norms[n] - lb);
    rep.log_margins.push_back(margin_log);
    if (margin_log < 0 && rep.first_violation < 0) {
      rep.first_violation = n;
      rep.pass = false;
    }
    rep.min_slack = std::min(rep.min_slack, std::expm1(margin_log));
  }
  return rep;
}

bool gs_extend(std::vector<State>& basis, State v, double tol) {
  const double orig = v.norm();
  if (!(orig > 0)) return false;
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) v -= b.dot(v) * b;
  if (v.norm() <= tol * orig) return false;
  basis.push_back(v.normalized());
  return true;
}

namespace {

// orthogonal unit vector in C^m to span(q_basis) with lowest coordinate
// index; empty when the span is everything
std::optional<VectorXcd> lowest_free_direction(const std::vector<State>& q_basis, int m) {
  for (int i = 0; i < m; ++i) {
    VectorXcd e = VectorXcd::Zero(m);
    e[i] = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : q_basis) e -= q.dot(e) * q;
    if (e.norm() > 1e-8) return e.normalized();
  }
  return std::nullopt;
}

struct PowerTrack {
  State v;
  int power = 0;
};

}  // namespace

GrowingConstruction construct_growing(const OperatorModel& a,
                                      const std::vector<CompactMap>& k_seq,
                                      const std::function<double(int)>& a_seq, const State& y,
                                      double r, int n0, int horizon, std::optional<double> c1_opt) {
  if (a.kind() != OperatorKind::ScaledIdentityBlock)
    throw std::invalid_argument("construction needs a model with declared kernel supply");
  if (!(r > 0)) throw std::invalid_argument("radius must be positive");
  if (n0 < 0 || horizon < n0) throw std::invalid_argument("need 0 <= n0 <= horizon");
  if (y.size() != a.dim()) throw std::invalid_argument("state dimension mismatch");
  for (int n = 0; n < std::min(horizon, 4096); ++n)
    if (!(a_seq(n) > 0) || a_seq(n + 1) > a_seq(n) * (1 + 1e-12))
      throw std::invalid_argument("sequence must be positive and non-increasing");
  const double a_n0 = a_seq(n0);
  if (!(a_n0 < r / 2)) throw std::invalid_argument("need a(n0) < r/2");
  const double c1 = c1_opt.value_or((2 * a_n0 + r) / 2);
  if (!(c1 > 2 * a_n0) || !(c1 < r))
    throw std::invalid_argument("c1 must lie strictly between 2 a(n0) and r");

  const auto& block = a.block_data();
  const cplx mu = block.mu;
  const int m = block.multiplicity;
  const int dim = a.dim();

  // rescaled picture: A/mu fixes the leading block pointwise and the
  // perturbation ranges are unchanged, so the obstruction spaces can be
  // accumulated directly from the given maps
  auto step_rescaled = [&](const State& v) { return (apply_op(a, v) / mu).eval(); };

  std::vector<State> basis;
  std::vector<PowerTrack> tracks;
  auto add_track = [&](const State& v0) {
    if (!(v0.norm() > 0)) return;
    tracks.push_back({v0, 0});
    gs_extend(basis, v0);
  };
  add_track(y);
  for (const auto& k : k_seq)
    for (const auto& rb : k.range_basis) add_track(rb);
  auto extend_tracks = [&](int target_power) {
    for (auto& t : tracks)
      while (t.power < target_power) {
        t.v = step_rescaled(t.v);
        ++t.power;
        gs_extend(basis, t.v);
      }
  };

  GrowingConstruction out;
  out.chain.n_list.push_back(n0);
  std::ostringstream log;
  log << "growing-vector construction: dim=" << dim << " kernel=" << m << " r_e=" << std::abs(mu)
      << "\n";
  log << "r=" << fmt17(r) << " n0=" << n0 << " horizon=" << horizon << " a(n0)=" << fmt17(a_n0)
      << " c1=" << fmt17(c1) << "\n";

  int n_prev = n0;
  double eps_prev = 1.0;
  bool covered = false;
  for (int k = 1;; ++k) {
    const double c_k = (k == 1) ? c1 : std::pow(2.0, -(k - 1)) * (r - c1);
    const double threshold = std::pow(2.0, -(k + 2)) * (r - c1);
    int n_k = n_prev + 1;
    while (n_k <= horizon && a_seq(n_k) >= threshold) ++n_k;

    const double a_prev = a_seq(n_prev);
    double eps_k = 0;
    {
      int j = 1;
      for (; j <= 400; ++j) {
        const double e = std::pow(2.0, -j);
        if (e < eps_prev && (1 - e) * (1 - e) * c_k / 2 - e >= a_prev) {
          eps_k = e;
          break;
        }
      }
      if (j > 400) throw std::invalid_argument("no admissible epsilon; shrink c1 or enlarge r");
    }

    extend_tracks(std::min(n_k, horizon + 1));
    out.chain.F_list.push_back(basis);

    std::vector<State> q;  // kernel-coordinate shadow of the basis
    for (const auto& f : basis) gs_extend(q, f.head(m), 1e-10);
    auto u = lowest_free_direction(q, m);
    if (!u) {
      out.truncated = true;
      log << "block " << k << ": kernel supply exhausted, stopping\n";
      out.chain.F_list.pop_back();
      break;
    }
    State x_k = State::Zero(dim);
    x_k.head(m) = *u;

    out.kernel_vectors.push_back(x_k);
    out.chain.c_list.push_back(c_k);
    out.chain.eps_list.push_back(eps_k);
    out.chain.n_list.push_back(n_k);
    gs_extend(basis, x_k);
    log << "block " << k << ": n_k=" << n_k << " c_k=" << fmt17(c_k) << " eps_k=" << fmt17(eps_k)
        << " |F_k|=" << out.chain.F_list.back().size() << "\n";

    if (n_k > horizon) {
      covered = true;
      break;
    }
    if (k == m) {
      out.truncated = true;
      log << "kernel multiplicity " << m << " reached before the horizon\n";
      break;
    }
    n_prev = n_k;
    eps_prev = eps_k;
  }

  out.depth = static_cast<int>(out.kernel_vectors.size());
  out.x = y;
  for (int j = 0; j < out.depth; ++j) out.x += out.chain.c_list[j] * out.kernel_vectors[j];
  out.certified_horizon = covered ? horizon : out.chain.n_list.back() - 1;
  log << "depth=" << out.depth << " certified horizon=" << out.certified_horizon
      << (out.truncated ? " (truncated)" : "") << "\n";
  log << "||x - y||=" << fmt17((out.x - y).norm()) << " (< r)\n";
  out.log = log.str();
  return out;
}

EnsembleStats residual_growth_ensemble(const OperatorModel& a,
                                       const std::vector<CompactMap>& k_seq,
                                       const std::function<double(int)>& a_seq,
                                       const std::vector<int>& indices, int n_samples,
                                       const State& y, double radius, int n_steps,
                                       std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("need at least one sample");
  std::vector<int> idx = indices;
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  while (!idx.empty() && idx.front() < 0) idx.erase(idx.begin());
  while (!idx.empty() && idx.back() > n_steps) idx.pop_back();
  if (idx.empty()) throw std::invalid_argument("no usable indices below the horizon");

  std::vector<double> log_bound(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    const int n = idx[i];
    const double est = n == 0 ? 1.0 : mu_norm_estimate(a, n);
    log_bound[i] = est > 0 ? std::log(a_seq(n)) + std::log(est) : kNegInf;
  }

  EnsembleStats stats;
  stats.n_samples = n_samples;
  stats.first_hit.assign(n_samples, -1);
  int hits = 0;
  for (int i = 0; i < n_samples; ++i) {
    auto rng = substream(seed, static_cast<std::uint64_t>(i));
    State x0 = y + random_in_ball(rng, a.dim(), radius);
    Trajectory traj = iterate(a, k_seq, x0, n_steps);
    for (size_t t = 0; t < idx.size(); ++t) {
      const int n = idx[t];
      if (n >= static_cast<int>(traj.log_norms.size())) break;
      if (traj.log_norms[n] >= log_bound[t]) {
        stats.first_hit[i] = n;
        ++hits;
        break;
      }
    }
  }
  stats.fraction = static_cast<double>(hits) / n_samples;
  return stats;
}

double compact_deviation_residual(const OperatorModel& a, const std::vector<CompactMap>& k_seq,
                                  const State& x, int j) {
  if (j < 1) throw std::invalid_argument("need j >= 1");
  Trajectory traj = iterate(a, k_seq, x, j);
  if (traj.guarded || traj.truncated)
    throw std::invalid_argument("deviation check needs states in plain range");
  State pow = x;
  for (int i = 0; i < j; ++i) pow = apply_op(a, pow);
  State d = traj.states[j] - pow;

  std::vector<State> basis;
  for (int s = 0; s < j; ++s) {
    const CompactMap* k = pick_map(k_seq, s + 1);
    if (effectively_zero(k)) continue;
    for (const auto& rb : k->range_basis) {
      State w = rb;
      for (int i = 0; i < j - s - 1; ++i) w = apply_op(a, w);
      gs_extend(basis, w);
    }
  }
  State p = d;
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) p -= b.dot(p) * b;
  return p.norm() / std::max(1.0, d.norm());
}

}  // namespace islab
