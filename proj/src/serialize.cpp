#include "islab/serialize.hpp"

#include <json.hpp>
#include <limits>
#include <stdexcept>

namespace islab {

namespace {

using nlohmann::json;

json jc(const cplx& z) { return json::array({z.real(), z.imag()}); }
cplx jc(const json& j) { return cplx(j.at(0).get<double>(), j.at(1).get<double>()); }

json jvec(const VectorXcd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(jc(v[i]));
  return a;
}

VectorXcd jvec(const json& j) {
  VectorXcd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = jc(j.at(i));
  return v;
}

// JSON numbers cannot hold infinities; encode them as strings.
json jreal(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double jreal(const json& j) {
  if (j.is_string()) {
    const auto& s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::invalid_argument("malformed real value: " + s);
  }
  return j.get<double>();
}

json tail_to_json(const TailMeta& t) {
  json j;
  j["text"] = t.text;
  if (t.r_e) j["r_e"] = jreal(*t.r_e);
  if (t.s_e) j["s_e"] = jreal(*t.s_e);
  if (t.tail_limit_modulus) j["tail_limit_modulus"] = jreal(*t.tail_limit_modulus);
  j["kernel_block_essential"] = t.kernel_block_essential;
  if (t.essential_split) j["essential_split"] = *t.essential_split;
  return j;
}

TailMeta tail_from_json(const json& j) {
  TailMeta t;
  t.text = j.value("text", "");
  if (j.contains("r_e")) t.r_e = jreal(j.at("r_e"));
  if (j.contains("s_e")) t.s_e = jreal(j.at("s_e"));
  if (j.contains("tail_limit_modulus")) t.tail_limit_modulus = jreal(j.at("tail_limit_modulus"));
  t.kernel_block_essential = j.value("kernel_block_essential", false);
  if (j.contains("essential_split")) t.essential_split = j.at("essential_split").get<int>();
  return t;
}

}  // namespace

std::string save_model(const OperatorModel& m) {
  json j;
  j["kind"] = kind_name(m.kind());
  j["dim"] = m.dim();
  json d;
  switch (m.kind()) {
    case OperatorKind::Dense: {
      const auto& a = m.dense_data().a;
      json rows = json::array();
      for (int r = 0; r < a.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < a.cols(); ++c) row.push_back(jc(a(r, c)));
        rows.push_back(std::move(row));
      }
      d["a"] = std::move(rows);
      break;
    }
    case OperatorKind::Diagonal:
      d["entries"] = jvec(m.diagonal_data().entries);
      break;
    case OperatorKind::WeightedShift: {
      const auto& s = m.shift_data();
      d["weights"] = jvec(s.weights);
      d["up"] = s.up;
      d["diag"] = jc(s.diag);
      d["semigroup_only"] = m.semigroup_only();
      break;
    }
    case OperatorKind::ScaledIdentityBlock: {
      const auto& b = m.block_data();
      d["mu"] = jc(b.mu);
      d["multiplicity"] = b.multiplicity;
      d["contraction"] = jvec(b.contraction);
      break;
    }
    case OperatorKind::WaveBlock: {
      const auto& w = m.wave_data();
      d["n_modes"] = w.n_modes;
      d["sign"] = w.sign;
      json dmp;
      switch (w.damping.kind) {
        case DampingSpec::Kind::Constant:
          dmp["kind"] = "constant";
          dmp["value"] = w.damping.constant;
          break;
        case DampingSpec::Kind::Step: {
          dmp["kind"] = "step";
          json ps = json::array();
          for (const auto& p : w.damping.pieces) ps.push_back({p.value, p.x0, p.x1});
          dmp["pieces"] = std::move(ps);
          break;
        }
        case DampingSpec::Kind::Sampled:
          dmp["kind"] = "sampled";
          dmp["samples"] = w.damping.samples;
          break;
      }
      d["damping"] = std::move(dmp);
      break;
    }
  }
  j["data"] = std::move(d);
  j["tail_meta"] = m.tail() ? tail_to_json(*m.tail()) : json(nullptr);
  j["spectral_meta"] = m.spectral_meta();
  return j.dump(2);
}

OperatorModel load_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed model document: ") + e.what());
  }
  try {
    const std::string kind = j.at("kind").get<std::string>();
    const int dim = j.at("dim").get<int>();
    const json& d = j.at("data");
    std::optional<TailMeta> tail;
    if (j.contains("tail_meta") && !j.at("tail_meta").is_null())
      tail = tail_from_json(j.at("tail_meta"));
    std::string meta = j.value("spectral_meta", "");

    if (kind == "Dense") {
      const json& rows = d.at("a");
      MatrixXcd a(rows.size(), rows.size());
      for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < rows.at(r).size(); ++c)
          a(static_cast<int>(r), static_cast<int>(c)) = jc(rows.at(r).at(c));
      return OperatorModel(OperatorKind::Dense, dim, DenseData{std::move(a)}, tail, meta);
    }
    if (kind == "Diagonal")
      return OperatorModel(OperatorKind::Diagonal, dim, DiagonalData{jvec(d.at("entries"))},
                           tail, meta);
    if (kind == "WeightedShift") {
      auto m = OperatorModel(OperatorKind::WeightedShift, dim,
                             ShiftData{jvec(d.at("weights")), d.at("up").get<bool>(),
                                       jc(d.at("diag"))},
                             tail, meta);
      m.set_semigroup_only(d.value("semigroup_only", false));
      return m;
    }
    if (kind == "ScaledIdentityBlock")
      return OperatorModel(OperatorKind::ScaledIdentityBlock, dim,
                           ScaledBlockData{jc(d.at("mu")), d.at("multiplicity").get<int>(),
                                           jvec(d.at("contraction"))},
                           tail, meta);
    if (kind == "WaveBlock") {
      const json& dmp = d.at("damping");
      DampingSpec spec;
      const std::string dk = dmp.at("kind").get<std::string>();
      if (dk == "constant") {
        spec.kind = DampingSpec::Kind::Constant;
        spec.constant = dmp.at("value").get<double>();
      } else if (dk == "step") {
        spec.kind = DampingSpec::Kind::Step;
        for (const auto& p : dmp.at("pieces"))
          spec.pieces.push_back({p.at(0).get<double>(), p.at(1).get<double>(),
                                 p.at(2).get<double>()});
      } else if (dk == "sampled") {
        spec.kind = DampingSpec::Kind::Sampled;
        spec.samples = dmp.at("samples").get<std::vector<double>>();
      } else {
        throw std::invalid_argument("unknown damping kind: " + dk);
      }
      return OperatorModel(OperatorKind::WaveBlock, dim,
                           WaveData{d.at("n_modes").get<int>(), std::move(spec),
                                    d.at("sign").get<int>()},
                           tail, meta);
    }
    throw std::invalid_argument("unknown operator kind: " + kind);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace islab
