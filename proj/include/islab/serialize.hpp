#ifndef ISLAB_SERIALIZE_HPP
#define ISLAB_SERIALIZE_HPP

#include <string>

#include "islab/operator_model.hpp"

namespace islab {

// Structured text document with fields kind, dim, data, tail_meta,
// spectral_meta; complex numbers as [re, im] pairs. Round-trip is exact.
std::string save_model(const OperatorModel& m);
OperatorModel load_model(const std::string& text);

}  // namespace islab

#endif
