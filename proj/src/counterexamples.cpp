#include "islab/counterexamples.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "islab/core.hpp"

namespace islab {

namespace {

// piecewise-linear value with zero extension outside the node range
double pl_eval(const std::vector<std::pair<double, double>>& nodes, double s) {
  if (s <= nodes.front().first || s >= nodes.back().first) {
    if (s == nodes.front().first) return nodes.front().second;
    if (s == nodes.back().first) return nodes.back().second;
    return 0.0;
  }
  for (size_t i = 1; i < nodes.size(); ++i) {
    if (s <= nodes[i].first) {
      const auto& [x0, y0] = nodes[i - 1];
      const auto& [x1, y1] = nodes[i];
      if (y0 == y1) return y0;  // plateau values stay exact
      return y0 + (s - x0) / (x1 - x0) * (y1 - y0);
    }
  }
  return 0.0;
}

double hat_s(double eps, double s) {
  const double e3 = eps * eps * eps;
  return pl_eval({{e3, 0.0}, {4 * e3, 1.0}, {16 * e3, 1.0}, {eps, 0.0}}, s);
}

double hat_t(double eps, double t) {
  return pl_eval({{eps / 8, 0.0}, {eps / 4, 1.0}, {3 * eps / 4, 1.0}, {eps, 0.0}}, t);
}

double sum_g(const std::vector<BumpPair>& family, double s, const VectorXcd& slots) {
  double total = 0;
  for (size_t j = 0; j < family.size(); ++j)
    total += family[j].g(s, std::abs(slots[static_cast<int>(j)]));
  return total;
}

}  // namespace

double BumpPair::f(double s) const {
  const double e3 = eps * eps * eps;
  return pl_eval({{e3, 0.0}, {4 * e3, eps / 2}, {eps / 2, eps / 2}, {eps, 0.0}}, s);
}

double BumpPair::g(double s, double t) const {
  if (!(s > 0)) return 0.0;
  const double tilde = 2.0 * hat_s(eps, s) * hat_t(eps, t);
  return std::min(tilde, s + t * t / s);
}

BumpPair build_bumps(double eps) {
  if (!(eps > 0) || !(eps < std::pow(2.0, -7)))
    throw std::invalid_argument("eps must lie in (0, 2^-7)");
  return BumpPair{eps};
}

std::vector<BumpPair> build_bump_family(const std::vector<double>& eps_seq) {
  if (eps_seq.empty()) throw std::invalid_argument("empty scale sequence");
  std::vector<BumpPair> family;
  for (size_t j = 0; j < eps_seq.size(); ++j) {
    if (j > 0 && !(eps_seq[j] < std::pow(eps_seq[j - 1], 3) / 4))
      throw std::invalid_argument("scale recursion violated: need eps_{j+1} < eps_j^3 / 4");
    family.push_back(build_bumps(eps_seq[j]));
  }
  return family;
}

double Ex52State::norm() const { return std::sqrt(y.squaredNorm() + std::norm(a)); }
double Ex53State::norm() const { return std::sqrt(y.squaredNorm() + slots.squaredNorm()); }

Ex52State step_ex52(const BumpPair& bp, const Ex52State& x) {
  const double s = x.y.norm();
  const double g = bp.g(s, std::abs(x.a));
  Ex52State next;
  next.y = 2.0 * x.y + (-g) * x.y;  // A + (K+G) split, matches iterate()
  next.a = bp.f(s);
  return next;
}

Ex53State step_ex53(const std::vector<BumpPair>& family, const Ex53State& x) {
  if (x.slots.size() != static_cast<Eigen::Index>(family.size()))
    throw std::invalid_argument("slot count does not match the scale family");
  const double s = x.y.norm();
  const double g = sum_g(family, s, x.slots);
  Ex53State next;
  next.y = 2.0 * x.y + (-g) * x.y;
  next.slots.resize(x.slots.size());
  for (int j = 0; j < x.slots.size(); ++j) next.slots[j] = family[static_cast<size_t>(j)].f(s);
  return next;
}

StabilityReport verify_ex52(const BumpPair& bp, const Ex52State& x0, int n_steps,
                            bool keep_trace) {
  const double e3 = bp.eps * bp.eps * bp.eps;
  if (x0.y.norm() > e3 || std::abs(x0.a) > e3)
    throw std::invalid_argument("hypothesis needs ||y0|| <= eps^3 and |a0| <= eps^3");

  StabilityReport rep;
  rep.steps = n_steps;
  rep.bound_y = 16 * e3;
  rep.bound_slot = bp.eps / 2;
  rep.bound_x = bp.eps;
  Ex52State x = x0;
  for (int n = 0; n <= n_steps; ++n) {
    const double ny = x.y.norm(), na = std::abs(x.a), nx = x.norm();
    rep.sup_y = std::max(rep.sup_y, ny);
    rep.sup_slot = std::max(rep.sup_slot, na);
    rep.sup_x = std::max(rep.sup_x, nx);
    if (keep_trace) rep.trace.push_back({static_cast<double>(n), ny, na, nx});
    if (n < n_steps) x = step_ex52(bp, x);
  }
  const double slack = 1e-12;
  rep.pass = rep.sup_y <= rep.bound_y * (1 + slack) && rep.sup_slot <= rep.bound_slot * (1 + slack) &&
             rep.sup_x <= rep.bound_x * (1 + slack);
  std::ostringstream msg;
  msg << "sup||y||=" << fmt17(rep.sup_y) << " (bound " << fmt17(rep.bound_y) << "), sup|a|="
      << fmt17(rep.sup_slot) << " (bound " << fmt17(rep.bound_slot) << "), sup||x||="
      << fmt17(rep.sup_x) << " (bound " << fmt17(rep.bound_x) << ") -> "
      << (rep.pass ? "stable" : "BOUND VIOLATED");
  rep.message = msg.str();
  return rep;
}

StabilityReport verify_ex53(const std::vector<BumpPair>& family, int k, const Ex53State& x0,
                            int n_steps, bool keep_trace) {
  if (k < 1 || k > static_cast<int>(family.size()))
    throw std::invalid_argument("scale index k out of range");
  const double eps_k = family[static_cast<size_t>(k - 1)].eps;
  if (x0.norm() > std::pow(eps_k, 3) / 4)
    throw std::invalid_argument("hypothesis needs ||x0|| <= eps_k^3 / 4");

  StabilityReport rep;
  rep.steps = n_steps;
  rep.bound_x = eps_k;
  rep.bound_y = eps_k;     // implied by the x bound
  rep.bound_slot = eps_k;  // likewise
  Ex53State x = x0;
  for (int n = 0; n <= n_steps; ++n) {
    const double ny = x.y.norm();
    const double nx = x.norm();
    double active = 0;
    int f_active = 0, g_active = 0;
    for (size_t j = 0; j < family.size(); ++j) {
      const double aj = std::abs(x.slots[static_cast<int>(j)]);
      active = std::max(active, aj);
      if (family[j].f(ny) != 0.0) ++f_active;
      if (family[j].g(ny, aj) != 0.0) ++g_active;
    }
    if (f_active > 1 || g_active > 1) ++rep.multi_active_events;
    rep.sup_y = std::max(rep.sup_y, ny);
    rep.sup_slot = std::max(rep.sup_slot, active);
    rep.sup_x = std::max(rep.sup_x, nx);
    if (keep_trace) rep.trace.push_back({static_cast<double>(n), ny, active, nx});
    if (n < n_steps) x = step_ex53(family, x);
  }
  rep.pass = rep.sup_x <= rep.bound_x * (1 + 1e-12) && rep.multi_active_events == 0;
  std::ostringstream msg;
  msg << "k=" << k << " sup||x||=" << fmt17(rep.sup_x) << " (bound " << fmt17(rep.bound_x)
      << "), overlapping-scale events=" << rep.multi_active_events << " -> "
      << (rep.pass ? "stable" : "BOUND VIOLATED");
  rep.message = msg.str();
  return rep;
}

QuadraticCertificate g_certificate(const std::vector<BumpPair>& family, int dim_y,
                                   int n_samples, std::uint64_t seed) {
  if (n_samples < 1 || dim_y < 1) throw std::invalid_argument("need samples and a y dimension");
  const double eps1 = family.front().eps;
  const double eps_last = family.back().eps;
  const double lo = std::log(std::pow(eps_last, 3) / 8);
  const double hi = std::log(2 * eps1);

  QuadraticCertificate cert;
  cert.n_samples = n_samples;
  for (int i = 0; i < n_samples; ++i) {
    auto rng = substream(seed, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    // log-uniform radius so every scale's active window gets sampled
    const double s = std::exp(lo + (hi - lo) * unif(rng));
    State dir = random_in_ball(rng, dim_y, 1.0);
    if (dir.norm() == 0) dir = State::Unit(dim_y, 0);
    State y = s * dir.normalized();
    VectorXcd slots(family.size());
    for (size_t j = 0; j < family.size(); ++j) {
      const double t = family[j].eps * unif(rng);
      const double phase = 2 * pi * unif(rng);
      slots[static_cast<int>(j)] = t * cplx(std::cos(phase), std::sin(phase));
    }
    const double sy = y.norm();
    const double gnorm = sum_g(family, sy, slots) * sy;
    const double xnorm2 = y.squaredNorm() + slots.squaredNorm();
    if (xnorm2 > 0) cert.max_ratio = std::max(cert.max_ratio, gnorm / xnorm2);
  }
  cert.pass = cert.max_ratio <= 1 + 1e-12;
  return cert;
}

OperatorModel ex52_operator(int dim_y) {
  VectorXcd contraction(1);
  contraction[0] = 0.0;
  TailMeta tail;
  tail.text = "2-eigenvalue of infinite multiplicity; scalar slot appended";
  tail.r_e = 2.0;
  tail.s_e = std::log(2.0);
  tail.kernel_block_essential = true;
  return make_scaled_identity_block(2.0, dim_y, contraction, tail);
}

CompactMap ex52_perturbation(const BumpPair& bp, int dim_y, bool include_g) {
  CompactMap k;
  const int dim = dim_y + 1;
  if (include_g) {
    for (int i = 0; i < dim; ++i) k.range_basis.push_back(State::Unit(dim, i));
    k.coefficient_fn = [bp, dim_y](const State& x) {
      VectorXcd c(dim_y + 1);
      const State y = x.head(dim_y);
      const double s = y.norm();
      const double g = bp.g(s, std::abs(x[dim_y]));
      for (int i = 0; i < dim_y; ++i) c[i] = (-g) * y[i];
      c[dim_y] = bp.f(s);
      return c;
    };
  } else {
    k.range_basis.push_back(State::Unit(dim, dim_y));
    k.coefficient_fn = [bp, dim_y](const State& x) {
      VectorXcd c(1);
      c[0] = bp.f(x.head(dim_y).norm());
      return c;
    };
    k.lipschitz_hint = 0.5;  // |f'| <= (eps/2)/(3 eps^3) locally, clipped hint
  }
  return k;
}

}  // namespace islab
