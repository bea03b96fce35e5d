#include "crowd/model.hpp"

namespace crowd {

std::string to_string(ModelKind k) { return k == ModelKind::I ? "I" : "II"; }

ModelKind parse_model(const std::string& s) {
  if (s == "I" || s == "1") return ModelKind::I;
  if (s == "II" || s == "2") return ModelKind::II;
  throw std::invalid_argument("model must be I or II, got '" + s + "'");
}

double max_fprime(ModelSpec m) {
  return m.kind == ModelKind::I ? 1.0 / (6.0 * std::sqrt(3.0)) : 0.25;
}

double argmax_fprime(ModelSpec m) {
  if (m.kind == ModelKind::II) return 0.0;
  // rho = (3 - sqrt 3)/6 where (rho(1-rho)(1-2rho))' vanishes
  double s = std::sqrt(3.0);
  return std::log((3.0 - s) / (3.0 + s));
}

double sup_f(ModelSpec m) { return m.kind == ModelKind::I ? 0.25 : 1.0; }

}  // namespace crowd
