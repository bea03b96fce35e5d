#include "crowd/constants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "crowd/bessel.hpp"

namespace crowd {
namespace {

// Bisection down to adjacent doubles; fn(lo) and fn(hi) must not share a strict sign.
template <class Fn>
double bisect_to_ulp(Fn&& fn, double lo, double hi) {
  double flo = fn(lo), fhi = fn(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  for (int it = 0; it < 4000; ++it) {
    double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    double fm = fn(mid);
    if (fm == 0) return mid;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  return std::abs(flo) <= std::abs(fhi) ? lo : hi;
}

// f' is increasing left of its argmax and decreasing right of it.
double fprime_level_side(ModelSpec m, double level, double peak, double dir) {
  double step = 1.0;
  double far = peak + dir * step;
  while (eval_fprime(m, far) >= level) {
    step *= 2;
    far = peak + dir * step;
    if (step > 1e4) throw std::runtime_error("fprime_level_set: level below reachable range");
  }
  auto g = [&](double x) { return eval_fprime(m, x) - level; };
  return dir < 0 ? bisect_to_ulp(g, far, peak) : bisect_to_ulp(g, peak, far);
}

std::array<std::complex<double>, 2> dispersion_roots(const Params& p, double lam, double fp);

}  // namespace

const char* to_string(ConstantBranch b) {
  switch (b) {
    case ConstantBranch::lower: return "lower";
    case ConstantBranch::middle: return "middle";
    case ConstantBranch::upper: return "upper";
    default: return "unique";
  }
}

std::optional<std::pair<double, double>> fprime_level_set(ModelSpec m, double level) {
  if (!(level < max_fprime(m))) return std::nullopt;
  if (!(level > 0)) throw std::invalid_argument("fprime_level_set: level must be positive");
  double peak = argmax_fprime(m);
  return std::make_pair(fprime_level_side(m, level, peak, -1.0), fprime_level_side(m, level, peak, 1.0));
}

ConstantSet constant_solutions(ModelSpec m, const Params& p, double phi0, const Domain& dom) {
  p.validate();
  dom.validate();
  if (!std::isfinite(phi0)) throw std::invalid_argument("constant_solutions: phi0 must be finite");

  auto resid = [&](double x) { return eval_f(m, x) / p.delta - (x + phi0); };
  // every root lies in [-phi0, -phi0 + sup f / delta]
  const double L = -phi0, R = -phi0 + sup_f(m) / p.delta;

  struct Piece {
    double lo, hi;
    ConstantBranch label;
  };
  std::vector<Piece> pieces;
  auto folds = fprime_level_set(m, p.delta);
  if (!folds) {
    pieces.push_back({L, R, ConstantBranch::unique});
  } else {
    auto [pa, pb] = *folds;
    pieces.push_back({L, std::min(pa, R), ConstantBranch::lower});
    pieces.push_back({std::max(pa, L), std::min(pb, R), ConstantBranch::middle});
    pieces.push_back({std::max(pb, L), R, ConstantBranch::upper});
  }

  ConstantSet out;
  const double lam1 = neumann_eigenvalue(dom, 1);
  for (const auto& pc : pieces) {
    if (pc.lo > pc.hi) continue;
    // at a fold the double root sits on a piece end, where the residual is pure rounding
    auto snapped = [&](double x) {
      double r = resid(x);
      double tol = 64 * std::numeric_limits<double>::epsilon() * (std::abs(x) + std::abs(phi0) + sup_f(m) / p.delta);
      return std::abs(r) <= tol ? 0.0 : r;
    };
    double rlo = snapped(pc.lo), rhi = snapped(pc.hi);
    if ((rlo > 0 && rhi > 0) || (rlo < 0 && rhi < 0)) continue;
    ConstantSolution s;
    s.phi0 = phi0;
    s.phi = rlo == 0 ? pc.lo : rhi == 0 ? pc.hi : bisect_to_ulp(resid, pc.lo, pc.hi);
    s.rho = rho_of_phi(s.phi);
    s.mass = dom.volume() * s.rho;
    s.branch_label = pc.label;
    s.variationally_unstable = p.kappa * lam1 + p.delta < eval_fprime(m, s.phi);
    s.mu_roots_n1 = dispersion_roots(p, lam1, eval_fprime(m, s.phi));
    out.roots.push_back(s);
  }
  if (out.roots.empty()) throw std::runtime_error("constant_solutions: no root bracketed");
  // with a single root on an outer piece of a folded k, the label still names that piece
  for (size_t i = 1; i < out.roots.size(); ++i)
    if (out.roots[i].phi - out.roots[i - 1].phi < kDegenerateTol) out.degenerate = true;
  return out;
}

FoldData fold_points(ModelSpec m, const Params& p, const Domain& dom) {
  p.validate();
  FoldData fd;
  auto folds = fprime_level_set(m, p.delta);
  if (!folds) return fd;
  fd.has_folds = true;
  fd.phi_at_folds = *folds;
  fd.phi0_minus = k_of(m, p, folds->first);
  fd.phi0_plus = k_of(m, p, folds->second);
  // phi_- decreases and phi_+ decreases in phi0, so the endpoint-mass extrema sit at the folds:
  // lowest mass = lower root at phi0+, highest mass = upper root at phi0-.
  auto at_plus = constant_solutions(m, p, fd.phi0_plus, dom);
  auto at_minus = constant_solutions(m, p, fd.phi0_minus, dom);
  fd.M_minus = at_plus.roots.front().mass;
  fd.M_plus = at_minus.roots.back().mass;
  return fd;
}

InstabilityInterval instability_interval(ModelSpec m, const Params& p, const Domain& dom) {
  p.validate();
  InstabilityInterval ii;
  double level = p.kappa * neumann_eigenvalue(dom, 1) + p.delta;
  auto ls = fprime_level_set(m, level);
  if (!ls) return ii;
  ii.empty = false;
  ii.phi_lo = ls->first;
  ii.phi_hi = ls->second;
  ii.mass_lo = dom.volume() * rho_of_phi(ii.phi_lo);
  ii.mass_hi = dom.volume() * rho_of_phi(ii.phi_hi);
  return ii;
}

double constant_for_mass(const Domain& dom, double M) {
  dom.validate();
  double V = dom.volume();
  if (!(M > 0 && M < V)) throw std::invalid_argument("constant_for_mass: M must lie in (0, |Omega|)");
  return std::log(M / (V - M));
}

namespace {

std::array<std::complex<double>, 2> dispersion_roots(const Params& p, double lam, double fp) {
  double B = (p.kappa + 1) * lam + p.delta;
  double C = lam * (p.kappa * lam + p.delta - fp);
  double disc = B * B - 4 * C;
  std::array<std::complex<double>, 2> mu;
  if (disc >= 0) {
    double q = 0.5 * (B + std::sqrt(disc));
    mu = {std::complex<double>(C / q), std::complex<double>(q)};
    if (mu[1].real() < mu[0].real()) std::swap(mu[0], mu[1]);
  } else {
    double im = 0.5 * std::sqrt(-disc);
    mu = {std::complex<double>(B / 2, -im), std::complex<double>(B / 2, im)};
  }
  return mu;
}

}  // namespace

std::array<std::complex<double>, 2> constant_dispersion(ModelSpec m, const Params& p, const Domain& dom,
                                                        double rho, int n) {
  if (!(rho > 0 && rho < 1)) throw std::invalid_argument("constant_dispersion: rho must lie in (0,1)");
  return dispersion_roots(p, neumann_eigenvalue(dom, n), rho * (1 - rho) * h_of_rho(m, rho));
}

double constant_mu1(ModelSpec m, const Params& p, const Domain& dom, double phi, int n_max) {
  const double fp = eval_fprime(m, phi);
  double mu = p.delta;
  for (int n = 1; n <= n_max; ++n) {
    auto r = dispersion_roots(p, neumann_eigenvalue(dom, n), fp);
    mu = std::min({mu, r[0].real(), r[1].real()});
  }
  return mu;
}

std::pair<double, double> solution_enclosure(ModelSpec m, const Params& p, double phi0) {
  auto cs = constant_solutions(m, p, phi0, Domain{1});
  return {cs.roots.front().phi, cs.roots.back().phi};
}

std::optional<double> middle_constant(ModelSpec m, const Params& p, double phi0) {
  auto cs = constant_solutions(m, p, phi0, Domain{1});
  for (const auto& r : cs.roots)
    if (r.branch_label == ConstantBranch::middle) return r.phi;
  return std::nullopt;
}

}  // namespace crowd
