#ifndef ISLAB_SPECTRAL_HPP
#define ISLAB_SPECTRAL_HPP

#include <string>
#include <vector>

#include "islab/operator_model.hpp"

namespace islab {

struct SpectrumReport {
  VectorXcd eigenvalues;   // sorted by (Re, Im)
  VectorXd residuals;      // ||A v - lambda v|| / ||A|| per pair
  std::string method;      // "closed-form" or "hessenberg-qr"
};

SpectrumReport spectrum(const OperatorModel& m);

// ||R(lambda, A)|| = 1 / sigma_min(lambda I - A). Throws std::domain_error
// within 1e-12 of a computed eigenvalue.
double resolvent_norm(const OperatorModel& m, cplx lambda);

struct PeakProbe {
  double b = 0;        // refined abscissa along the line
  double height = 0;   // refined resolvent norm (capped at 1e12)
};

// Resolvent norms along the vertical line a + i[-b_max, b_max].
//
// unbounded_flag is a single-truncation heuristic for "sup along this line is
// infinite": the profile must be peaked (max >= 10x median), the peak envelope
// must persist into the outer decile of the grid, and either the envelope
// rises toward the edge or a refined peak exceeds the singular ceiling (1e6).
// Peak heights come from deterministic local refinement, not raw grid samples,
// so grid/eigenvalue alignment does not flip the flag.
struct ResolventScan {
  double a = 0;
  VectorXd grid;       // symmetric, uniform
  VectorXd norms;      // NaN at skipped points (within 1e-12 of an eigenvalue)
  std::vector<int> skipped;
  std::vector<PeakProbe> peaks;
  double sup_estimate = 0;
  bool unbounded_flag = false;
};

ResolventScan scan_vertical(const OperatorModel& m, double a, double b_max, int n_grid);

enum class Provenance { AnalyticMetadata, NussbaumNumeric, ScanNumeric, Unavailable };

std::string provenance_name(Provenance p);

// Per-abscissa record of the s_R sweep. "bad" lines have too many point
// eigenvalues on the line or sweep-confirmed resolvent unboundedness:
//   U1 raw scan flag fires at dim N and at dim 2N,
//   U2 a refined peak exceeds the singular ceiling at dim N,
//   U3 the capped sup grows by >= 1.7x when the truncation dimension doubles.
struct SRLine {
  double a = 0;
  int eigs_near = 0;        // computed eigenvalues within 1e-8 of the line
  bool raw_flag = false;
  double sup = 0;
  bool swept = false;       // model was refinable; raw_flag_2n/sup_2n valid
  bool raw_flag_2n = false;
  double sup_2n = 0;
  bool singular = false;    // U2
  double level_ratio = 1;   // U3 input
  bool unbounded = false;   // any of the routes (or the eigenvalue count)
};

struct SpectralBounds {
  double r_e_estimate = 0;
  Provenance r_e_provenance = Provenance::Unavailable;
  double s_e_estimate = 0;
  Provenance s_e_provenance = Provenance::Unavailable;
  double s_R_estimate = 0;
  Provenance s_R_provenance = Provenance::Unavailable;
  std::vector<SRLine> lines;
  std::string note;
};

struct SROptions {
  int eig_count_cutoff = 8;
  bool doubling_sweep = true;
  int n_grid = 1601;
  double singular_threshold = 1e6;
  double level_ratio_threshold = 1.7;
  int nussbaum_n = 20;
};

// s_R_estimate = smallest grid abscissa strictly above the largest bad line
// (the infimum of the terminal run of good lines). Also reports r_e and s_e
// estimates with provenance tags.
SpectralBounds estimate_sR(const OperatorModel& m, const std::vector<double>& a_grid,
                           double b_max, const SROptions& opts = {});

// Estimate of ||A^n|| measured away from finite-dimensional heads: the best
// restriction norm over basis suffixes, combined with declared tail data.
double mu_norm_estimate(const OperatorModel& m, int n);

}  // namespace islab

#endif
