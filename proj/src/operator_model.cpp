#include "islab/operator_model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace islab {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool all_finite(const VectorXcd& v) { return v.allFinite(); }

// integral of 2 sin(n pi x) sin(m pi x) over [x0, x1], 1-based n, m
double sine_pair_integral(int n, int m, double x0, double x1) {
  auto is = [](double k, double x) { return k == 0.0 ? x : std::sin(k * pi * x) / (k * pi); };
  if (n == m) {
    auto anti = [&](double x) { return x - std::sin(2.0 * n * pi * x) / (2.0 * n * pi); };
    return anti(x1) - anti(x0);
  }
  return (is(n - m, x1) - is(n - m, x0)) - (is(n + m, x1) - is(n + m, x0));
}

MatrixXcd assemble_damping_matrix(int n_modes, const DampingSpec& d) {
  MatrixXcd b = MatrixXcd::Zero(n_modes, n_modes);
  switch (d.kind) {
    case DampingSpec::Kind::Constant:
      for (int n = 0; n < n_modes; ++n) b(n, n) = d.constant;
      break;
    case DampingSpec::Kind::Step:
      for (int n = 0; n < n_modes; ++n)
        for (int m = n; m < n_modes; ++m) {
          double v = 0;
          for (const auto& p : d.pieces)
            if (p.value != 0.0) v += p.value * sine_pair_integral(n + 1, m + 1, p.x0, p.x1);
          b(n, m) = v;
          b(m, n) = v;
        }
      break;
    case DampingSpec::Kind::Sampled: {
      // trapezoid on the sample grid (spec default 512 points incl. endpoints)
      const int P = static_cast<int>(d.samples.size());
      const double h = 1.0 / (P - 1);
      for (int n = 0; n < n_modes; ++n)
        for (int m = n; m < n_modes; ++m) {
          double v = 0;
          for (int j = 0; j < P; ++j) {
            double x = j * h;
            double w = (j == 0 || j == P - 1) ? 0.5 : 1.0;
            v += w * d.samples[j] * 2.0 * std::sin((n + 1) * pi * x) * std::sin((m + 1) * pi * x);
          }
          b(n, m) = v * h;
          b(m, n) = b(n, m);
        }
      break;
    }
  }
  return b;
}

}  // namespace

std::string kind_name(OperatorKind k) {
  switch (k) {
    case OperatorKind::Dense: return "Dense";
    case OperatorKind::Diagonal: return "Diagonal";
    case OperatorKind::WeightedShift: return "WeightedShift";
    case OperatorKind::ScaledIdentityBlock: return "ScaledIdentityBlock";
    case OperatorKind::WaveBlock: return "WaveBlock";
  }
  return "?";
}

double DampingSpec::mean() const {
  switch (kind) {
    case Kind::Constant: return constant;
    case Kind::Step: {
      double v = 0;
      for (const auto& p : pieces) v += p.value * (p.x1 - p.x0);
      return v;
    }
    case Kind::Sampled: {
      double v = 0;
      const int P = static_cast<int>(samples.size());
      for (int j = 0; j < P; ++j) v += ((j == 0 || j == P - 1) ? 0.5 : 1.0) * samples[j];
      return v / (P - 1);
    }
  }
  return 0;
}

double DampingSpec::eval(double x) const {
  switch (kind) {
    case Kind::Constant: return constant;
    case Kind::Step:
      for (const auto& p : pieces)
        if (x >= p.x0 && (x < p.x1 || (x == p.x1 && x == 1.0))) return p.value;
      return 0;
    case Kind::Sampled: {
      const int P = static_cast<int>(samples.size());
      double t = x * (P - 1);
      int j = std::min(static_cast<int>(t), P - 2);
      double f = t - j;
      return samples[j] * (1 - f) + samples[j + 1] * f;
    }
  }
  return 0;
}

OperatorModel::OperatorModel(
    OperatorKind kind, int dim,
    std::variant<DenseData, DiagonalData, ShiftData, ScaledBlockData, WaveData> data,
    std::optional<TailMeta> tail, std::string spectral_meta)
    : kind_(kind), dim_(dim), data_(std::move(data)), tail_(std::move(tail)),
      spectral_meta_(std::move(spectral_meta)) {
  require(dim_ >= 1, "operator dimension must be >= 1");
  require(dim_ <= max_dim(), "dimension " + std::to_string(dim_) + " exceeds cap " +
                                 std::to_string(max_dim()) + " (ISLAB_MAX_DIM)");
  if (kind_ == OperatorKind::WaveBlock) {
    const auto& w = std::get<WaveData>(data_);
    wave_b_ = assemble_damping_matrix(w.n_modes, w.damping);
  }
}

const MatrixXcd& OperatorModel::wave_damping_matrix() const {
  require(kind_ == OperatorKind::WaveBlock, "not a WaveBlock model");
  return wave_b_;
}

OperatorModel make_dense(MatrixXcd a, std::optional<TailMeta> tail, std::string spectral_meta) {
  require(a.rows() == a.cols() && a.rows() >= 1, "Dense model needs a nonempty square matrix");
  require(a.allFinite(), "non-finite entries rejected");
  int n = static_cast<int>(a.rows());
  return OperatorModel(OperatorKind::Dense, n, DenseData{std::move(a)}, std::move(tail),
                       std::move(spectral_meta));
}

OperatorModel make_diagonal(VectorXcd entries, std::optional<TailMeta> tail,
                            std::string spectral_meta) {
  require(entries.size() >= 1, "Diagonal model needs at least one entry");
  require(all_finite(entries), "non-finite entries rejected");
  int n = static_cast<int>(entries.size());
  return OperatorModel(OperatorKind::Diagonal, n, DiagonalData{std::move(entries)},
                       std::move(tail), std::move(spectral_meta));
}

OperatorModel make_weighted_shift(VectorXcd weights, bool up, cplx diag,
                                  std::optional<TailMeta> tail, std::string spectral_meta) {
  require(weights.size() >= 1, "WeightedShift model needs at least one weight");
  require(all_finite(weights) && std::isfinite(diag.real()) && std::isfinite(diag.imag()),
          "non-finite entries rejected");
  int n = static_cast<int>(weights.size());
  return OperatorModel(OperatorKind::WeightedShift, n, ShiftData{std::move(weights), up, diag},
                       std::move(tail), std::move(spectral_meta));
}

OperatorModel make_scaled_identity_block(cplx mu, int multiplicity, VectorXcd contraction,
                                         std::optional<TailMeta> tail) {
  require(multiplicity >= 1, "kernel block multiplicity must be >= 1");
  require(std::isfinite(mu.real()) && std::isfinite(mu.imag()) && std::abs(mu) > 0,
          "block eigenvalue mu must be finite and nonzero");
  require(all_finite(contraction), "non-finite entries rejected");
  for (int i = 0; i < contraction.size(); ++i)
    require(std::abs(contraction[i]) < std::abs(mu),
            "contraction entries must have modulus < |mu|");
  int n = multiplicity + static_cast<int>(contraction.size());
  if (!tail) {
    TailMeta t;
    t.text = "mu-block stands for an essential eigenvalue of infinite multiplicity";
    t.kernel_block_essential = true;
    t.r_e = std::abs(mu);
    t.s_e = mu.real();
    tail = t;
  }
  return OperatorModel(OperatorKind::ScaledIdentityBlock, n,
                       ScaledBlockData{mu, multiplicity, std::move(contraction)},
                       std::move(tail));
}

OperatorModel make_wave_blocks(int n_modes, DampingSpec damping, int sign) {
  require(n_modes >= 1, "need at least one mode");
  require(sign == 1 || sign == -1, "sign must be +1 (excited) or -1 (damped)");
  switch (damping.kind) {
    case DampingSpec::Kind::Constant:
      require(std::isfinite(damping.constant), "non-finite damping");
      break;
    case DampingSpec::Kind::Step: {
      require(!damping.pieces.empty(), "step damping needs pieces");
      auto ps = damping.pieces;
      std::sort(ps.begin(), ps.end(), [](auto& a, auto& b) { return a.x0 < b.x0; });
      double x = 0.0;
      for (const auto& p : ps) {
        require(std::isfinite(p.value) && std::abs(p.x0 - x) < 1e-12 && p.x1 > p.x0,
                "step pieces must cover [0,1] without gaps");
        x = p.x1;
      }
      require(std::abs(x - 1.0) < 1e-12, "step pieces must cover [0,1]");
      break;
    }
    case DampingSpec::Kind::Sampled:
      require(damping.samples.size() >= 2, "sampled damping needs >= 2 samples");
      for (double s : damping.samples) require(std::isfinite(s), "non-finite damping sample");
      break;
  }
  WaveData w{n_modes, std::move(damping), sign};
  TailMeta t;
  t.text = "wave system with compact resolvent; no essential spectrum";
  t.s_e = -std::numeric_limits<double>::infinity();
  return OperatorModel(OperatorKind::WaveBlock, 2 * n_modes, std::move(w), t, "wave-roots");
}

OperatorModel make_left_shift_generator(int dim, double h) {
  require(dim >= 2 && h > 0 && std::isfinite(h), "left shift needs dim >= 2 and h > 0");
  VectorXcd w = VectorXcd::Constant(dim, 1.0 / h);
  TailMeta t;
  t.text = "upwind truncation of d/ds on L^2(R_+); the true semigroup is the left translation";
  t.s_e = 0.0;
  auto m = make_weighted_shift(std::move(w), /*up=*/true, cplx(-1.0 / h, 0.0), t, "left-shift");
  m.set_semigroup_only(true);
  return m;
}

OperatorModel make_diagonal_family(const std::string& family, int dim) {
  VectorXcd d(dim);
  TailMeta t;
  if (family == "sr-demo") {
    for (int k = 1; k <= dim; ++k) d[k - 1] = cplx(-1.0 / k, k);
    t.text = "eigenvalues approach the imaginary axis from the left as |Im| grows";
    t.s_e = 0.0;
  } else if (family == "line") {
    for (int k = 1; k <= dim; ++k) d[k - 1] = cplx(-1.0, k);
    t.text = "all eigenvalues on Re = -1";
    t.s_e = -1.0;
  } else if (family == "one-plus-inv") {
    for (int k = 1; k <= dim; ++k) d[k - 1] = 1.0 + 1.0 / k;
    t.text = "moduli decrease to 1";
    t.tail_limit_modulus = 1.0;
    t.r_e = 1.0;
    t.s_e = 1.0;
  } else if (family == "harmonic") {
    for (int k = 1; k <= dim; ++k) d[k - 1] = 1.0 / k;
    t.text = "compact diagonal, entries decrease to 0";
    t.tail_limit_modulus = 0.0;
    t.r_e = 0.0;
    t.s_e = 0.0;
  } else {
    throw std::invalid_argument("unknown diagonal family: " + family);
  }
  return make_diagonal(std::move(d), t, "diag:" + family);
}

VectorXcd apply_op(const OperatorModel& m, const VectorXcd& x) {
  if (x.size() != m.dim()) throw std::invalid_argument("state dimension mismatch");
  switch (m.kind()) {
    case OperatorKind::Dense:
      return m.dense_data().a * x;
    case OperatorKind::Diagonal:
      return m.diagonal_data().entries.cwiseProduct(x);
    case OperatorKind::WeightedShift: {
      const auto& s = m.shift_data();
      const int n = m.dim();
      VectorXcd out = s.diag * x;
      if (s.up) {
        for (int k = 0; k + 1 < n; ++k) out[k] += s.weights[k] * x[k + 1];
      } else {
        for (int k = 0; k + 1 < n; ++k) out[k + 1] += s.weights[k] * x[k];
      }
      return out;
    }
    case OperatorKind::ScaledIdentityBlock: {
      const auto& b = m.block_data();
      VectorXcd out(m.dim());
      out.head(b.multiplicity) = b.mu * x.head(b.multiplicity);
      out.tail(b.contraction.size()) =
          b.contraction.cwiseProduct(x.tail(b.contraction.size()));
      return out;
    }
    case OperatorKind::WaveBlock: {
      const auto& w = m.wave_data();
      const int M = w.n_modes;
      VectorXcd out(2 * M);
      for (int n = 0; n < M; ++n) {
        double om = (n + 1) * pi;
        out[n] = om * x[M + n];
        out[M + n] = -om * x[n];
      }
      out.tail(M) += static_cast<double>(w.sign) * (m.wave_damping_matrix() * x.tail(M));
      return out;
    }
  }
  throw std::logic_error("unreachable");
}

MatrixXcd dense(const OperatorModel& m) {
  const int n = m.dim();
  if (m.kind() == OperatorKind::Dense) return m.dense_data().a;
  MatrixXcd a = MatrixXcd::Zero(n, n);
  VectorXcd e = VectorXcd::Zero(n);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    a.col(j) = apply_op(m, e);
    e[j] = 0.0;
  }
  return a;
}

std::optional<VectorXcd> closed_spectrum(const OperatorModel& m) {
  switch (m.kind()) {
    case OperatorKind::Diagonal:
      return m.diagonal_data().entries;
    case OperatorKind::WeightedShift:
      return VectorXcd::Constant(m.dim(), m.shift_data().diag).eval();
    case OperatorKind::ScaledIdentityBlock: {
      const auto& b = m.block_data();
      VectorXcd s(m.dim());
      s.head(b.multiplicity).setConstant(b.mu);
      s.tail(b.contraction.size()) = b.contraction;
      return s;
    }
    case OperatorKind::WaveBlock: {
      const auto& w = m.wave_data();
      if (w.damping.kind != DampingSpec::Kind::Constant) return std::nullopt;
      VectorXcd s(2 * w.n_modes);
      const double b = w.damping.constant;
      for (int n = 1; n <= w.n_modes; ++n) {
        double om = n * pi;
        cplx disc = std::sqrt(cplx(b * b - 4.0 * om * om, 0.0));
        cplx tr = static_cast<double>(w.sign) * b;
        s[2 * (n - 1)] = (tr + disc) / 2.0;
        s[2 * (n - 1) + 1] = (tr - disc) / 2.0;
      }
      return s;
    }
    case OperatorKind::Dense:
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<OperatorModel> refine(const OperatorModel& m, int new_dim) {
  if (new_dim <= m.dim()) return std::nullopt;
  switch (m.kind()) {
    case OperatorKind::Diagonal: {
      const auto& meta = m.spectral_meta();
      if (meta.rfind("diag:", 0) == 0) return make_diagonal_family(meta.substr(5), new_dim);
      return std::nullopt;
    }
    case OperatorKind::WaveBlock: {
      if (new_dim % 2) return std::nullopt;
      const auto& w = m.wave_data();
      return make_wave_blocks(new_dim / 2, w.damping, w.sign);
    }
    case OperatorKind::WeightedShift: {
      const auto& s = m.shift_data();
      // refinable when the weights are uniform (a scaled translation sampled
      // on a longer interval at the same resolution)
      for (int i = 0; i + 1 < s.weights.size(); ++i)
        if (s.weights[i] != s.weights[0]) return std::nullopt;
      auto r = make_weighted_shift(VectorXcd::Constant(new_dim, s.weights[0]), s.up, s.diag,
                                   m.tail(), m.spectral_meta());
      r.set_semigroup_only(m.semigroup_only());
      return r;
    }
    default:
      return std::nullopt;
  }
}

// --- propagation ----------------------------------------------------------

namespace {

MatrixXcd expm_pade(const MatrixXcd& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  if (norm > 0.5) s = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const MatrixXcd b = a / std::pow(2.0, s);
  static const double c[] = {1.0,        1.0 / 2,      5.0 / 44,     1.0 / 66,
                             1.0 / 792,  1.0 / 15840,  1.0 / 665280};
  const int n = static_cast<int>(a.rows());
  MatrixXcd p = MatrixXcd::Identity(n, n);
  MatrixXcd num = c[0] * p, den = c[0] * p;
  for (int j = 1; j <= 6; ++j) {
    p = p * b;
    num += c[j] * p;
    den += (j % 2 ? -c[j] : c[j]) * p;
  }
  MatrixXcd r = den.partialPivLu().solve(num);
  for (int i = 0; i < s; ++i) r = r * r;
  return r;
}

}  // namespace

// exp(t * [[0, om], [-om, sb]]) via the rotation form: the matrix splits as
// (sb/2) I + R with R^2 = -(om^2 - sb^2/4) I.
Eigen::Matrix2cd wave_block_exp(double om, double sb, double t) {
  const cplx nu = std::sqrt(cplx(om * om - sb * sb / 4.0, 0.0));
  cplx c, s_over_nu;
  if (std::abs(nu * t) < 1e-6) {
    const cplx z = nu * t;
    c = 1.0 - z * z / 2.0 + z * z * z * z / 24.0;
    s_over_nu = t * (1.0 - z * z / 6.0 + z * z * z * z / 120.0);
  } else {
    c = std::cos(nu * t);
    s_over_nu = std::sin(nu * t) / nu;
  }
  Eigen::Matrix2cd r;
  r << -sb / 2.0, om, -om, sb / 2.0;
  Eigen::Matrix2cd out = std::exp(sb * t / 2.0) * (c * Eigen::Matrix2cd::Identity() + s_over_nu * r);
  return out;
}

MatrixXcd expm(const MatrixXcd& a) {
  const int n = static_cast<int>(a.rows());
  if (n <= 64) return expm_pade(a);  // small: always cheap and uniformly safe
  Eigen::ComplexEigenSolver<MatrixXcd> es(a);
  if (es.info() == Eigen::Success) {
    const MatrixXcd& v = es.eigenvectors();
    Eigen::JacobiSVD<MatrixXcd> svd(v);
    double cond = svd.singularValues()(0) / svd.singularValues()(n - 1);
    if (std::isfinite(cond) && cond < 1e8) {
      VectorXcd ev = es.eigenvalues().array().exp();
      return v * ev.asDiagonal() * v.inverse();
    }
  }
  return expm_pade(a);
}

VectorXcd propagate(const SemigroupModel& sg, double t, const VectorXcd& x) {
  const OperatorModel& m = sg.generator;
  if (x.size() != m.dim()) throw std::invalid_argument("state dimension mismatch");
  if (t < 0 && m.semigroup_only())
    throw std::domain_error("t < 0 is not defined for a semigroup-only model");
  const double tau = sg.alpha * t;
  switch (m.kind()) {
    case OperatorKind::Diagonal:
      return (m.diagonal_data().entries.array() * tau).exp().matrix().cwiseProduct(x).eval();
    case OperatorKind::ScaledIdentityBlock: {
      const auto& b = m.block_data();
      VectorXcd out(m.dim());
      out.head(b.multiplicity) = std::exp(b.mu * tau) * x.head(b.multiplicity);
      out.tail(b.contraction.size()) = (b.contraction.array() * tau)
                                           .exp()
                                           .matrix()
                                           .cwiseProduct(x.tail(b.contraction.size()));
      return out;
    }
    case OperatorKind::WeightedShift: {
      const auto& s = m.shift_data();
      const int n = m.dim();
      bool uniform = true;
      for (int i = 0; i + 1 < n; ++i)
        if (s.weights[i] != s.weights[0]) { uniform = false; break; }
      if (uniform && s.weights[0].imag() == 0.0 && s.weights[0].real() > 0.0) {
        // exp(tau A) = exp(tau diag + z) * sum_j [e^{-z} z^j / j!] S^j with
        // z = tau w and S the unit shift (nilpotent). The bracket is a Poisson
        // weight, computed in log space; for the upwind translation model
        // diag = -w so the prefactor is exactly 1 and nothing overflows.
        const double z = tau * s.weights[0].real();
        if (z >= 0) {
          const cplx base = std::exp(tau * s.diag + z);
          VectorXcd out = VectorXcd::Zero(n);
          for (int j = 0; j < n; ++j) {
            double logc = (z == 0.0) ? (j == 0 ? 0.0 : -1e300)
                                     : (-z + j * std::log(z) - std::lgamma(j + 1.0));
            double cj = std::exp(logc);
            if (cj == 0.0) {
              if (j > z) break;
              continue;
            }
            if (s.up) {
              for (int k = 0; k + j < n; ++k) out[k] += cj * x[k + j];
            } else {
              for (int k = 0; k + j < n; ++k) out[k + j] += cj * x[k];
            }
          }
          return base * out;
        }
      }
      return expm(tau * dense(m)) * x;
    }
    case OperatorKind::WaveBlock: {
      const auto& w = m.wave_data();
      if (w.damping.kind == DampingSpec::Kind::Constant) {
        const int M = w.n_modes;
        VectorXcd out(2 * M);
        for (int k = 0; k < M; ++k) {
          double om = (k + 1) * pi;
          Eigen::Matrix2cd e = wave_block_exp(om, w.sign * w.damping.constant, tau);
          Eigen::Vector2cd v(x[k], x[M + k]);
          Eigen::Vector2cd r = e * v;
          out[k] = r[0];
          out[M + k] = r[1];
        }
        return out;
      }
      return expm(tau * dense(m)) * x;
    }
    case OperatorKind::Dense:
      return expm(tau * m.dense_data().a) * x;
  }
  throw std::logic_error("unreachable");
}

VectorXcd propagate(const OperatorModel& m, double t, const VectorXcd& x) {
  return propagate(SemigroupModel{m}, t, x);
}

}  // namespace islab
