#include "crowd/functionals.hpp"

#include <cmath>
#include <stdexcept>

namespace crowd {
namespace {

double entropy(double r) { return r * std::log(r) + (1 - r) * std::log1p(-r); }

void check_rho(const Eigen::VectorXd& rho) {
  for (int i = 0; i < rho.size(); ++i)
    if (!(rho[i] > 1e-14 && rho[i] < 1 - 1e-14)) throw std::domain_error("rho touches {0,1}");
}

// Symmetric tridiagonal W^{-1/2}(kappa K + W diag(pot))W^{-1/2}.
struct Tridiag {
  Eigen::VectorXd d, e;  // diagonal, off-diagonal
};

Tridiag scaled_operator(const RadialGrid& g, double kappa, const Eigen::VectorXd& pot) {
  Eigen::VectorXd w = fv_weights(g), t = fv_faces(g);
  const int n = g.nodes();
  Tridiag T{Eigen::VectorXd(n), Eigen::VectorXd(n - 1)};
  for (int i = 0; i < n; ++i) {
    double k = (i > 0 ? t[i - 1] : 0.0) + (i < n - 1 ? t[i] : 0.0);
    T.d[i] = kappa * k / w[i] + pot[i];
  }
  for (int i = 0; i < n - 1; ++i) T.e[i] = -kappa * t[i] / std::sqrt(w[i] * w[i + 1]);
  return T;
}

// LDL^T of T - x: number of negative pivots and q^T (T-x)^{-1} q.
struct Inertia {
  int negatives;
  double quad;
};

Inertia ldl_inertia(const Tridiag& T, double x, const Eigen::VectorXd& q) {
  const Eigen::Index n = T.d.size();
  Eigen::VectorXd piv(n), l(n), y(n);
  int neg = 0;
  const double tiny = 1e-300;
  for (Eigen::Index i = 0; i < n; ++i) {
    double di = T.d[i] - x;
    if (i > 0) {
      l[i] = T.e[i - 1] / piv[i - 1];
      di -= l[i] * T.e[i - 1];
    }
    if (di == 0) di = tiny;
    piv[i] = di;
    if (di < 0) ++neg;
  }
  // q^T (L D L^T)^{-1} q = sum (L^{-1} q)_i^2 / d_i
  double quad = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = q[i] - (i > 0 ? l[i] * y[i - 1] : 0.0);
    quad += y[i] * y[i] / piv[i];
  }
  return {neg, quad};
}

// (T - x) y = b by the same LDL^T recurrence.
Eigen::VectorXd tridiag_solve(const Tridiag& T, double x, const Eigen::VectorXd& b) {
  const Eigen::Index n = T.d.size();
  Eigen::VectorXd piv(n), l(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double di = T.d[i] - x;
    if (i > 0) {
      l[i] = T.e[i - 1] / piv[i - 1];
      di -= l[i] * T.e[i - 1];
    }
    piv[i] = di == 0 ? 1e-300 : di;
    y[i] = b[i] - (i > 0 ? l[i] * y[i - 1] : 0.0);
  }
  for (Eigen::Index i = 0; i < n; ++i) y[i] /= piv[i];
  for (Eigen::Index i = n - 2; i >= 0; --i) y[i] -= l[i + 1] * y[i + 1];
  return y;
}

double gershgorin_lo(const Tridiag& T) {
  double lo = INFINITY;
  for (Eigen::Index i = 0; i < T.d.size(); ++i) {
    double r = (i > 0 ? std::abs(T.e[i - 1]) : 0.0) + (i + 1 < T.d.size() ? std::abs(T.e[i]) : 0.0);
    lo = std::min(lo, T.d[i] - r);
  }
  return lo;
}

double gershgorin_hi(const Tridiag& T) {
  double hi = -INFINITY;
  for (Eigen::Index i = 0; i < T.d.size(); ++i) {
    double r = (i > 0 ? std::abs(T.e[i - 1]) : 0.0) + (i + 1 < T.d.size() ? std::abs(T.e[i]) : 0.0);
    hi = std::max(hi, T.d[i] + r);
  }
  return hi;
}

// Smallest x with count(x) >= 1, count nondecreasing.
template <class Count>
double bisect_first_eigen(Count&& count, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (count(mid) >= 1) hi = mid;
    else lo = mid;
  }
  return 0.5 * (lo + hi);
}

Eigen::VectorXd fprime_nodes(const RadialProfile& prof, ModelSpec m) {
  Eigen::VectorXd fp(prof.phi.size());
  for (int i = 0; i < fp.size(); ++i) fp[i] = eval_fprime(m, prof.phi[i]);
  return fp;
}

// The constraint direction only needs rho(1-rho) up to scale, so tiny values are fine here.
Eigen::VectorXd raw_mobility(const RadialProfile& prof) {
  Eigen::VectorXd c(prof.phi.size());
  for (int i = 0; i < c.size(); ++i) c[i] = rho_one_minus_rho(prof.phi[i]);
  return c;
}

}  // namespace

Eigen::VectorXd mobility(const RadialProfile& prof) {
  Eigen::VectorXd c(prof.phi.size());
  for (int i = 0; i < c.size(); ++i) {
    c[i] = rho_one_minus_rho(prof.phi[i]);
    if (!(c[i] >= 1e-14)) throw std::domain_error("rho(1-rho) below 1e-14");
  }
  return c;
}

EnergyValue energy_E(ModelSpec m, const Params& p, double phi0, const RadialProfile& prof) {
  Eigen::VectorXd w = simpson_weights(prof.grid);
  EnergyValue e;
  for (int i = 0; i < prof.phi.size(); ++i) {
    e.parts.gradient += w[i] * prof.dphi[i] * prof.dphi[i];
    e.parts.confinement += w[i] * (prof.phi[i] + phi0) * (prof.phi[i] + phi0);
    e.parts.potential += w[i] * eval_F(m, prof.phi[i]);
  }
  e.value = 0.5 * p.kappa * e.parts.gradient + 0.5 * p.delta * e.parts.confinement - e.parts.potential;
  return e;
}

double phi0_of_mass(const Eigen::VectorXd& w, const Eigen::VectorXd& D, double M, double volume) {
  if (!(M > 0 && M < volume)) throw std::invalid_argument("phi0_of_mass: M must lie in (0, |Omega|)");
  auto mass = [&](double phi0) {
    double s = 0;
    for (int i = 0; i < D.size(); ++i) s += w[i] * rho_of_phi(D[i] - phi0);
    return s;
  };
  // exact bracket from the constant case
  double shift = std::log(volume / M - 1);
  double lo = D.minCoeff() + shift, hi = D.maxCoeff() + shift;
  if (hi - lo < 1e-300) return lo;
  double mlo = mass(lo), mhi = mass(hi);
  for (int it = 0; it < 300; ++it) {
    double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    double mm = mass(mid);
    if (mm > M) {
      lo = mid;
      mlo = mm;
    } else {
      hi = mid;
      mhi = mm;
    }
  }
  return std::abs(mlo - M) <= std::abs(mhi - M) ? lo : hi;
}

double phi0_of_mass(const RadialGrid& g, const Eigen::VectorXd& D, double M) {
  return phi0_of_mass(simpson_weights(g), D, M, g.domain().volume());
}

EnergyValue energy_FM(ModelSpec m, const Params& p, double M, const RadialProfile& D) {
  double phi0 = phi0_of_mass(D.grid, D.phi, M);
  RadialProfile phi = D;
  phi.phi = D.phi.array() - phi0;
  phi.phi0 = phi0;
  phi.a = phi.phi[0];
  return energy_E(m, p, phi0, phi);
}

double lyapunov(const Params& p, const Eigen::VectorXd& rho, const Eigen::VectorXd& D,
                const Eigen::VectorXd& dD, const RadialGrid& g) {
  check_rho(rho);
  Eigen::VectorXd w = simpson_weights(g);
  double s = 0;
  for (int i = 0; i < rho.size(); ++i)
    s += w[i] * (entropy(rho[i]) - rho[i] * D[i] + 0.5 * p.kappa * dD[i] * dD[i] + 0.5 * p.delta * D[i] * D[i]);
  return s;
}

double lyapunov_discrete(const Params& p, const Eigen::VectorXd& rho, const Eigen::VectorXd& D,
                         const RadialGrid& g) {
  check_rho(rho);
  Eigen::VectorXd w = fv_weights(g), t = fv_faces(g);
  double s = 0;
  for (int i = 0; i < rho.size(); ++i) s += w[i] * (entropy(rho[i]) - rho[i] * D[i] + 0.5 * p.delta * D[i] * D[i]);
  return s + 0.5 * p.kappa * fv_dirichlet_form(t, D);
}

double energy_proxy_discrete(ModelSpec m, const Params& p, const Eigen::VectorXd& D, double M,
                             const RadialGrid& g) {
  Eigen::VectorXd w = fv_weights(g), t = fv_faces(g);
  double phi0 = phi0_of_mass(w, D, M, g.domain().volume());
  double s = 0;
  for (int i = 0; i < D.size(); ++i) s += w[i] * (0.5 * p.delta * D[i] * D[i] - eval_F(m, D[i] - phi0));
  return s + 0.5 * p.kappa * fv_dirichlet_form(t, D);
}

Eigen::VectorXd apply_Ephi(const RadialProfile& prof, const Params& p, ModelSpec m, const Eigen::VectorXd& v) {
  Eigen::VectorXd w = fv_weights(prof.grid), t = fv_faces(prof.grid);
  Eigen::VectorXd Kv = fv_stiffness_apply(t, v);
  Eigen::VectorXd fp = fprime_nodes(prof, m);
  return (p.kappa * Kv.array() / w.array() + (p.delta - fp.array()) * v.array()).matrix();
}

double constrained_rayleigh(const RadialProfile& prof, const Params& p, ModelSpec m, const Eigen::VectorXd& v) {
  Eigen::VectorXd w = fv_weights(prof.grid);
  Eigen::VectorXd Ev = apply_Ephi(prof, p, m, v);
  return (w.array() * v.array() * Ev.array()).sum() / (w.array() * v.array().square()).sum();
}

LambdaResult lambda_var(const RadialProfile& prof, const Params& p, ModelSpec m, bool want_vector) {
  const RadialGrid& g = prof.grid;
  Eigen::VectorXd w = fv_weights(g);
  Eigen::VectorXd c = raw_mobility(prof);
  Eigen::VectorXd pot = (p.delta - fprime_nodes(prof, m).array()).matrix();
  Tridiag S = scaled_operator(g, p.kappa, pot);
  Eigen::VectorXd q = (w.array().sqrt() * c.array()).matrix();
  q /= q.norm();
  // Sylvester on the bordered matrix [[S - x, q], [q^T, 0]]
  auto count = [&](double x) {
    Inertia in = ldl_inertia(S, x, q);
    return in.negatives - 1 + (in.quad > 0 ? 1 : 0);
  };
  double lo = gershgorin_lo(S) - 1, hi = gershgorin_hi(S) + 1;
  LambdaResult res;
  res.value = bisect_first_eigen(count, lo, hi);
  if (!want_vector) return res;

  // constrained inverse iteration slightly below the eigenvalue:
  // x = A^{-1}y - A^{-1}q (q^T A^{-1}y)/(q^T A^{-1}q), A = S - shift
  const int n = g.nodes();
  double shift = res.value - 1e-9 * (1 + std::abs(res.value));
  Eigen::VectorXd Aq = tridiag_solve(S, shift, q);
  const double qAq = q.dot(Aq);
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
  y -= q.dot(y) * q;
  y.normalize();
  for (int it = 0; it < 6; ++it) {
    Eigen::VectorXd x = tridiag_solve(S, shift, y);
    x -= (q.dot(x) / qAq) * Aq;
    y = x - q.dot(x) * q;
    y.normalize();
  }
  Eigen::VectorXd v = (y.array() / w.array().sqrt()).matrix();
  v /= std::sqrt((w.array() * v.array().square()).sum());
  if (v[0] < 0) v = -v;
  res.minimizer = v;
  Eigen::VectorXd r = apply_Ephi(prof, p, m, v) - res.value * v;
  res.multiplier = (w.array() * r.array() * c.array()).sum() / (w.array() * c.array().square()).sum();
  return res;
}

double lambda1(const RadialProfile& prof, const Params& p, ModelSpec m) {
  (void)m;
  const RadialGrid& g = prof.grid;
  Eigen::VectorXd w = fv_weights(g);
  Eigen::VectorXd c = raw_mobility(prof);
  Eigen::VectorXd pot = (p.delta - c.array()).matrix();
  Tridiag T = scaled_operator(g, p.kappa, pot);
  Eigen::VectorXd z = (w.array().sqrt() * c.array()).matrix();
  double sigma = 1.0 / (w.array() * c.array()).sum();
  // eigenvalues of T + sigma z z^T below x
  auto count = [&](double x) {
    Inertia in = ldl_inertia(T, x, z);
    return in.negatives - 1 + (in.quad > -1.0 / sigma ? 1 : 0);
  };
  double lo = gershgorin_lo(T) - 1, hi = gershgorin_hi(T) + sigma * z.squaredNorm() + 1;
  return bisect_first_eigen(count, lo, hi);
}

double quad_LD(const RadialProfile& prof, const Params& p, const PairField& q) {
  return 0.5 * inner(q, q, prof, p);
}

double quad_ID(const RadialProfile& prof, const Params& p, const PairField& q) {
  const RadialGrid& g = prof.grid;
  Eigen::VectorXd w = fv_weights(g), t = fv_faces(g);
  Eigen::VectorXd c = mobility(prof);
  Eigen::VectorXd s = (q.u.array() / c.array() - q.v.array()).matrix();
  double flux = 0;
  for (int i = 0; i < g.cells; ++i) {
    double cf = 0.5 * (c[i] + c[i + 1]);
    flux += t[i] * cf * (s[i + 1] - s[i]) * (s[i + 1] - s[i]);
  }
  Eigen::VectorXd Kv = fv_stiffness_apply(t, q.v);
  Eigen::VectorXd z = (p.kappa * Kv.array() / w.array() + p.delta * q.v.array() - q.u.array()).matrix();
  return 0.5 * flux + 0.5 * (w.array() * z.array().square()).sum();
}

double inner(const PairField& q1, const PairField& q2, const RadialProfile& prof, const Params& p) {
  const RadialGrid& g = prof.grid;
  Eigen::VectorXd w = fv_weights(g), t = fv_faces(g);
  Eigen::VectorXd c = mobility(prof);
  double s = (w.array() * (q1.u.array() * q2.u.array() / c.array() - q1.u.array() * q2.v.array() -
                           q2.u.array() * q1.v.array() + p.delta * q1.v.array() * q2.v.array()))
                 .sum();
  return s + p.kappa * q1.v.dot(fv_stiffness_apply(t, q2.v));
}

}  // namespace crowd
