#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace crowd {

// Raised when a computation leaves its valid range (CLI exit code 3).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ModelKind { I, II };

struct ModelSpec {
  ModelKind kind = ModelKind::I;
};

struct Params {
  double kappa = 5e-4;
  double delta = 1e-3;

  void validate() const {
    if (!(kappa > 0) || !std::isfinite(kappa)) throw std::invalid_argument("kappa must be positive");
    if (!(delta > 0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be positive");
  }
};

// Unit interval (d=1) or unit disk (d=2).
struct Domain {
  int dim = 1;

  double volume() const { return dim == 1 ? 1.0 : M_PI; }
  // angular factor in front of int_0^1 ... r^{d-1} dr
  double sigma() const { return dim == 1 ? 1.0 : 2.0 * M_PI; }
  void validate() const {
    if (dim != 1 && dim != 2) throw std::invalid_argument("dim must be 1 or 2");
  }
};

// kappa = 5e-4 for Model I and 1e-2 for Model II, delta = 1e-3.
inline Params default_params(ModelSpec m) {
  Params p;
  if (m.kind == ModelKind::II) p.kappa = 1e-2;
  return p;
}

std::string to_string(ModelKind k);
ModelKind parse_model(const std::string& s);

// Logistic, written so that neither branch overflows.
template <class T>
T rho_of_phi(T phi) {
  using std::exp;
  if (phi >= T(0)) return T(1) / (T(1) + exp(-phi));
  T e = exp(phi);
  return e / (T(1) + e);
}

// rho(1-rho) without cancellation for large |phi|.
template <class T>
T rho_one_minus_rho(T phi) {
  using std::exp;
  T e = exp(-std::abs(phi));
  return e / ((T(1) + e) * (T(1) + e));
}

template <class T>
T softplus(T phi) {
  using std::exp;
  using std::log1p;
  return phi > T(0) ? phi + log1p(exp(-phi)) : log1p(exp(phi));
}

template <class T>
T eval_F(ModelSpec m, T phi) {
  return m.kind == ModelKind::I ? rho_of_phi(phi) : softplus(phi);
}

template <class T>
T eval_f(ModelSpec m, T phi) {
  return m.kind == ModelKind::I ? rho_one_minus_rho(phi) : rho_of_phi(phi);
}

template <class T>
T h_of_rho(ModelSpec m, T rho) {
  return m.kind == ModelKind::I ? T(1) - T(2) * rho : T(1);
}

template <class T>
T eval_fprime(ModelSpec m, T phi) {
  T c = rho_one_minus_rho(phi);
  if (m.kind == ModelKind::II) return c;
  // 1-2rho = tanh(-phi/2), accurate near phi=0
  using std::tanh;
  return c * tanh(-phi / T(2));
}

// Source g in the D equation as a function of rho.
template <class T>
T eval_g(ModelSpec m, T rho) {
  return m.kind == ModelKind::I ? rho * (T(1) - rho) : rho;
}

template <class T>
T k_of(ModelSpec m, const Params& p, T phi) {
  return eval_f(m, phi) / T(p.delta) - phi;
}

double max_fprime(ModelSpec m);
double argmax_fprime(ModelSpec m);
double sup_f(ModelSpec m);

}  // namespace crowd
