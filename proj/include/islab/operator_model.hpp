#ifndef ISLAB_OPERATOR_MODEL_HPP
#define ISLAB_OPERATOR_MODEL_HPP

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "islab/core.hpp"

namespace islab {

enum class OperatorKind { Dense, Diagonal, WeightedShift, ScaledIdentityBlock, WaveBlock };

std::string kind_name(OperatorKind k);

// Analytic facts about the part of an infinite-dimensional operator that the
// finite truncation cannot represent. Estimators combine these with computed
// quantities and tag the provenance of every reported number.
struct TailMeta {
  std::string text;
  std::optional<double> r_e;                   // declared essential spectral radius
  std::optional<double> s_e;                   // declared essential spectral abscissa
  std::optional<double> tail_limit_modulus;    // lim |lambda_k| or lim |w_k| of the cut tail
  bool kernel_block_essential = false;         // mu-block stands for an infinite-multiplicity part
  std::optional<int> essential_split;          // Dense: columns >= split span the essential part
};

struct StepPiece {
  double value = 0.0;
  double x0 = 0.0;
  double x1 = 0.0;
};

// Damping coefficient b(x) on [0,1].
struct DampingSpec {
  enum class Kind { Constant, Step, Sampled };
  Kind kind = Kind::Constant;
  double constant = 0.0;
  std::vector<StepPiece> pieces;   // disjoint cover of [0,1]
  std::vector<double> samples;     // uniform grid incl. endpoints

  double mean() const;             // integral of b over [0,1]
  double eval(double x) const;
};

struct DenseData {
  MatrixXcd a;
};
struct DiagonalData {
  VectorXcd entries;
};
// Shift with one nonzero off-diagonal plus an optional uniform diagonal offset.
// up = false: e_k -> w_k e_{k+1} (weights on the subdiagonal);
// up = true : e_{k+1} -> w_k e_k (weights on the superdiagonal).
struct ShiftData {
  VectorXcd weights;
  bool up = false;
  cplx diag = 0.0;
};
// mu * identity on the leading block (the stand-in for an essential eigenvalue
// of infinite multiplicity) plus a diagonal contraction on the rest.
struct ScaledBlockData {
  cplx mu;
  int multiplicity = 0;
  VectorXcd contraction;
};
// First-order wave system in energy coordinates. State layout [p; q] with
// p_n = n*pi*u_n/sqrt(2) and q_n = v_n/sqrt(2) over the Dirichlet sine basis
// on [0,1], so |w|^2 equals the integral of |u_x|^2 + |v|^2 exactly. Per-mode
// action:
//   p' = omega q,  q' = -omega p + sign * (B q)   with omega_n = n*pi.
// sign = -1 is the damped system, +1 the excited one.
struct WaveData {
  int n_modes = 0;
  DampingSpec damping;
  int sign = -1;
};

class OperatorModel {
 public:
  OperatorModel() = default;
  OperatorModel(OperatorKind kind, int dim,
                std::variant<DenseData, DiagonalData, ShiftData, ScaledBlockData, WaveData> data,
                std::optional<TailMeta> tail = std::nullopt, std::string spectral_meta = "");

  OperatorKind kind() const { return kind_; }
  int dim() const { return dim_; }
  const std::optional<TailMeta>& tail() const { return tail_; }
  const std::string& spectral_meta() const { return spectral_meta_; }
  bool semigroup_only() const { return semigroup_only_; }
  void set_semigroup_only(bool v) { semigroup_only_ = v; }

  const DenseData& dense_data() const { return std::get<DenseData>(data_); }
  const DiagonalData& diagonal_data() const { return std::get<DiagonalData>(data_); }
  const ShiftData& shift_data() const { return std::get<ShiftData>(data_); }
  const ScaledBlockData& block_data() const { return std::get<ScaledBlockData>(data_); }
  const WaveData& wave_data() const { return std::get<WaveData>(data_); }

  // Damping matrix B (n_modes x n_modes) of a WaveBlock model.
  const MatrixXcd& wave_damping_matrix() const;

 private:
  OperatorKind kind_ = OperatorKind::Dense;
  int dim_ = 0;
  std::variant<DenseData, DiagonalData, ShiftData, ScaledBlockData, WaveData> data_;
  std::optional<TailMeta> tail_;
  std::string spectral_meta_;
  bool semigroup_only_ = false;
  MatrixXcd wave_b_;   // cached at construction for WaveBlock
};

// Constructors validate and throw std::invalid_argument on bad parameters,
// including dim() > max_dim().
OperatorModel make_dense(MatrixXcd a, std::optional<TailMeta> tail = std::nullopt,
                         std::string spectral_meta = "");
OperatorModel make_diagonal(VectorXcd entries, std::optional<TailMeta> tail = std::nullopt,
                            std::string spectral_meta = "");
OperatorModel make_weighted_shift(VectorXcd weights, bool up = false, cplx diag = 0.0,
                                  std::optional<TailMeta> tail = std::nullopt,
                                  std::string spectral_meta = "");
OperatorModel make_scaled_identity_block(cplx mu, int multiplicity, VectorXcd contraction,
                                         std::optional<TailMeta> tail = std::nullopt);
OperatorModel make_wave_blocks(int n_modes, DampingSpec damping, int sign);

// Upwind discretization of the left-translation generator on L^2(R_+):
// dim grid cells of width h, (Ax)_k = (x_{k+1} - x_k)/h. Semigroup only.
OperatorModel make_left_shift_generator(int dim, double h);

// Named diagonal families used by the demos ("sr-demo": -1/k + ik,
// "line": -1 + ik, ...). Needed so spectral sweeps can rebuild at 2N.
OperatorModel make_diagonal_family(const std::string& family, int dim);

VectorXcd apply_op(const OperatorModel& m, const VectorXcd& x);
MatrixXcd dense(const OperatorModel& m);

// Spectrum when a closed form exists for the kind (Diagonal, shifts,
// ScaledIdentityBlock, WaveBlock with constant damping).
std::optional<VectorXcd> closed_spectrum(const OperatorModel& m);

// Rebuild the model at a larger truncation dimension when its family is known.
std::optional<OperatorModel> refine(const OperatorModel& m, int new_dim);

// --- semigroup view ------------------------------------------------------

enum class PropagatorMethod { Auto, EigenDecomposition, ScalingSquaring, Structured };

struct SemigroupModel {
  OperatorModel generator;
  double alpha = 1.0;   // propagates exp(alpha * t * A)
  PropagatorMethod method = PropagatorMethod::Auto;
};

// exp(alpha t A) x. Throws std::domain_error for t < 0 on semigroup-only
// models and std::invalid_argument on dimension mismatch.
VectorXcd propagate(const SemigroupModel& sg, double t, const VectorXcd& x);
VectorXcd propagate(const OperatorModel& m, double t, const VectorXcd& x);

// Dense matrix exponential: eigendecomposition when well conditioned,
// scaling-and-squaring Pade otherwise.
MatrixXcd expm(const MatrixXcd& a);

// exp(t * [[0, om], [-om, sb]]) in closed rotation form; exact up to rounding.
Eigen::Matrix2cd wave_block_exp(double om, double sb, double t);

}  // namespace islab

#endif
