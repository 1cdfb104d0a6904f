#ifndef ISLAB_CORE_HPP
#define ISLAB_CORE_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

namespace islab {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// States are plain coordinate vectors in the declared basis of the model;
// the Euclidean norm of the coordinates is the model norm by convention.
using State = Eigen::VectorXcd;

inline constexpr double pi = 3.14159265358979323846;

// Dimension cap for truncations, overridable via ISLAB_MAX_DIM.
int max_dim();

// --- seeded, order-independent randomness -------------------------------
//
// All randomness flows from one explicit seed; per-sample streams are derived
// with splitmix64 so ensemble results do not depend on evaluation order.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (index + 1)));
}

// Uniform draw from the complex Euclidean ball of given radius.
VectorXcd random_in_ball(std::mt19937_64& rng, int dim, double radius);

// --- text output ---------------------------------------------------------

// 17 significant digits: doubles round-trip exactly and output is
// byte-identical across runs with identical configuration.
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvWriter {
  explicit CsvWriter(std::vector<std::string> columns) : header(std::move(columns)) {}
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void row(std::vector<std::string> cells) { rows.push_back(std::move(cells)); }
  std::string str() const;
  void write(const std::string& path) const;
};

}  // namespace islab

#endif
