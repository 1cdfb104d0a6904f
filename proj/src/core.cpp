#include "islab/core.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace islab {

int max_dim() {
  static const int cap = [] {
    if (const char* s = std::getenv("ISLAB_MAX_DIM")) {
      char* end = nullptr;
      long v = std::strtol(s, &end, 10);
      if (end && *end == '\0' && v > 0) return static_cast<int>(v);
    }
    return 16384;
  }();
  return cap;
}

VectorXcd random_in_ball(std::mt19937_64& rng, int dim, double radius) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  VectorXcd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = cplx(gauss(rng), gauss(rng));
  double n = v.norm();
  if (n == 0.0) return VectorXcd::Zero(dim);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double r = radius * std::pow(unif(rng), 1.0 / (2.0 * dim));
  return v * (r / n);
}

std::string CsvWriter::str() const {
  std::string out;
  for (size_t i = 0; i < header.size(); ++i) {
    out += header[i];
    out += (i + 1 < header.size()) ? ',' : '\n';
  }
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) {
      out += r[i];
      out += (i + 1 < r.size()) ? ',' : '\n';
    }
  }
  return out;
}

void CsvWriter::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << str();
}

}  // namespace islab
