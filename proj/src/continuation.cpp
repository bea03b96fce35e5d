#include "crowd/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crowd/bessel.hpp"
#include "crowd/constants.hpp"
#include "crowd/functionals.hpp"
#include "crowd/spectrum.hpp"

namespace crowd {
namespace {

using Vec3 = Eigen::Vector3d;  // (a, b, phi0)

struct Corrected {
  bool ok = false;
  Vec3 X = Vec3::Zero();
  int iterations = 0;
};

// Newton on the matching conditions plus one linear side condition n . (X - X0) = 0.
Corrected correct(ModelSpec m, const Params& p, int dim, int i_match, const Vec3& X0, const Vec3& n,
                  const ShootOptions& opt, int max_it = 12) {
  Corrected out;
  Vec3 X = X0;
  double best = INFINITY;
  for (int it = 0; it < max_it; ++it) {
    MatchEval ev = eval_match(m, p, X[2], X[0], X[1], dim, i_match, false, opt);
    if (!ev.ok) return out;
    double res = ev.G.cwiseAbs().maxCoeff();
    out.iterations = it;
    if (res <= opt.slope_tol) {
      out.ok = true;
      out.X = X;
      return out;
    }
    // stalled at the noise floor of the integrator
    if (res >= 0.5 * best && res <= 1e3 * opt.residual_tol) {
      out.ok = best <= opt.residual_tol;
      out.X = X;
      return out;
    }
    best = std::min(best, res);
    Eigen::Matrix3d J;
    J.topRows<2>() = ev.J;
    J.row(2) = n.transpose();
    Eigen::Vector3d F;
    F.head<2>() = ev.G;
    F[2] = n.dot(X - X0);
    Vec3 dX = J.fullPivLu().solve(-F);
    if (!dX.allFinite()) return out;
    X += dX;
  }
  return out;
}

// Kernel of the 2x3 matching Jacobian, oriented along ref. Falls back to ref when degenerate.
Vec3 null_tangent(ModelSpec m, const Params& p, int dim, int i_match, const Vec3& X, const Vec3& ref,
                  const ShootOptions& opt) {
  MatchEval ev = eval_match(m, p, X[2], X[0], X[1], dim, i_match, false, opt);
  if (!ev.ok) return ref;
  Vec3 t = Vec3(ev.J.row(0).transpose()).cross(Vec3(ev.J.row(1).transpose()));
  if (!t.allFinite() || t.norm() == 0) return ref;
  t.normalize();
  return t.dot(ref) < 0 ? -t : t;
}

double signed_amplitude(ModelSpec m, const Params& p, const Vec3& X, bool& ok) {
  auto mid = middle_constant(m, p, X[2]);
  ok = mid.has_value();
  return ok ? X[0] - *mid : 0.0;
}

double constant_energy(ModelSpec m, const Params& p, const Domain& dom, double phi0, double phi) {
  return dom.volume() * (0.5 * p.delta * (phi + phi0) * (phi + phi0) - eval_F(m, phi));
}

BranchPoint constant_point(ModelSpec m, const Params& p, const Domain& dom, double phi0, double phi) {
  BranchPoint pt;
  pt.phi0 = phi0;
  pt.a = pt.b = phi;
  pt.mass_fraction = rho_of_phi(phi);
  pt.mass = dom.volume() * pt.mass_fraction;
  pt.energy = constant_energy(m, p, dom, phi0, phi);
  pt.lambda_var = p.kappa * neumann_eigenvalue(dom, 1) + p.delta - eval_fprime(m, phi);
  pt.mu1 = constant_mu1(m, p, dom, phi);
  pt.monotone_dir = Monotonicity::constant;
  pt.enriched = true;
  return pt;
}

}  // namespace

const char* to_string(Termination t) {
  switch (t) {
    case Termination::merged_with_constants: return "merged_with_constants";
    case Termination::domain_exit: return "domain_exit";
    case Termination::step_failure: return "step_failure";
    case Termination::max_points: return "max_points";
  }
  return "?";
}

std::vector<double> bifurcation_thresholds(ModelSpec m, const Params& p, const Domain& dom) {
  p.validate();
  dom.validate();
  double level = p.kappa * neumann_eigenvalue(dom, 1) + p.delta;
  auto ls = fprime_level_set(m, level);
  if (!ls) return {};
  std::vector<double> out{k_of(m, p, ls->first), k_of(m, p, ls->second)};
  std::sort(out.begin(), out.end());
  return out;
}

void enrich_point(BranchPoint& pt, const RadialProfile& prof, ModelSpec m, const Params& p,
                  const SpectralBasis& basis) {
  MassValue mv = mass_of_profile(prof);
  pt.mass = mv.mass;
  pt.mass_fraction = mv.fraction;
  pt.energy = energy_E(m, p, prof.phi0, prof).value;
  pt.lambda_var = lambda_var(prof, p, m).value;
  pt.mu1 = dynamical_spectrum(prof, p, m, basis).mu1;
  pt.enriched = true;
}

Branch trace_branch(ModelSpec m, const Params& p, const Domain& dom, double origin_phi0, Monotonicity direction,
                    const StepPolicy& pol) {
  p.validate();
  dom.validate();
  if (direction != Monotonicity::increasing && direction != Monotonicity::decreasing)
    throw std::invalid_argument("trace_branch: direction must be increasing or decreasing");
  const ShootOptions& opt = pol.shoot;
  const int dim = dom.dim;
  Branch br;
  br.model = m;
  br.params = p;
  br.dim = dim;
  br.origin_phi0 = origin_phi0;

  auto mid = middle_constant(m, p, origin_phi0);
  if (!mid) throw std::invalid_argument("trace_branch: no middle constant at the origin");
  const double phic = *mid;
  FoldData folds = fold_points(m, p, dom);
  auto [lo, hi] = solution_enclosure(m, p, origin_phi0);
  const double eps = std::min(pol.seed_factor * (hi - lo), pol.seed_max);
  // first radial Neumann mode, normalized to 1 at r=0
  const double mode_end = dim == 1 ? -1.0 : bessel_j0(bessel_j1_zero(1));
  const double sgn = direction == Monotonicity::increasing ? -1.0 : 1.0;

  std::optional<SpectralBasis> basis;
  if (pol.enrich) basis = SpectralBasis::make(dim, pol.basis_modes, opt.cells);

  br.points.push_back(constant_point(m, p, dom, origin_phi0, phic));
  if (pol.keep_profiles) br.points.back().profile = RadialProfile::constant(RadialGrid{dim, opt.cells}, origin_phi0, phic);

  auto accept = [&](const Vec3& X, int im, RadialProfile* out) -> bool {
    MatchEval ev = eval_match(m, p, X[2], X[0], X[1], dim, im, true, opt);
    if (!ev.ok || !ev.profile) return false;
    RadialProfile prof = *ev.profile;
    prof.a = X[0];
    BranchPoint pt;
    pt.phi0 = X[2];
    pt.a = X[0];
    pt.b = X[1];
    pt.monotone_dir = is_monotone(prof);
    if (pol.enrich) {
      try {
        enrich_point(pt, prof, m, p, *basis);
      } catch (const std::exception& e) {
        br.log.push_back("phi0=" + std::to_string(X[2]) + ": enrichment failed: " + e.what());
        MassValue mv = mass_of_profile(prof);
        pt.mass = mv.mass;
        pt.mass_fraction = mv.fraction;
        pt.energy = energy_E(m, p, prof.phi0, prof).value;
        pt.lambda_var = pt.mu1 = NAN;
      }
    } else {
      MassValue mv = mass_of_profile(prof);
      pt.mass = mv.mass;
      pt.mass_fraction = mv.fraction;
    }
    if (pol.keep_profiles) pt.profile = prof;
    if (out) *out = std::move(prof);
    br.points.push_back(std::move(pt));
    return true;
  };

  // two seeds at fixed a
  std::vector<Vec3> X;
  int im = opt.cells / 2;
  const Vec3 fix_a(1, 0, 0);
  for (int k = 1; k <= 2; ++k) {
    double a = phic + sgn * k * eps;
    Vec3 guess(a, phic + sgn * k * eps * mode_end, origin_phi0);
    if (!X.empty()) guess[1] = X.back()[1] + (X.back()[1] - phic);
    if (X.size() == 1) guess[2] = X.back()[2];
    Corrected c = correct(m, p, dim, im, guess, fix_a, opt);
    if (!c.ok) {
      br.log.push_back("seed correction failed");
      br.termination = Termination::step_failure;
      return br;
    }
    X.push_back(c.X);
  }
  RadialProfile prof;
  for (const Vec3& x : X)
    if (!accept(x, im, &prof)) {
      br.termination = Termination::step_failure;
      return br;
    }

  bool amp_ok = false;
  double amp_prev = signed_amplitude(m, p, X.back(), amp_ok);
  Vec3 T = null_tangent(m, p, dim, im, X[1], (X[1] - X[0]).normalized(), opt);
  double ds = pol.ds_init > 0 ? pol.ds_init : (X[1] - X[0]).norm();
  std::vector<double> amps{signed_amplitude(m, p, X[0], amp_ok), amp_prev};

  // phi0 at zero amplitude, quadratic through the last three (amplitude, phi0) pairs
  auto finish_merge = [&](const double A[3], const double P[3]) {
    double l0 = A[1] * A[2] / ((A[0] - A[1]) * (A[0] - A[2]));
    double l1 = A[0] * A[2] / ((A[1] - A[0]) * (A[1] - A[2]));
    double l2 = A[0] * A[1] / ((A[2] - A[0]) * (A[2] - A[1]));
    br.end_phi0 = l0 * P[0] + l1 * P[1] + l2 * P[2];
    auto mend = middle_constant(m, p, br.end_phi0);
    if (mend) {
      br.points.push_back(constant_point(m, p, dom, br.end_phi0, *mend));
      if (pol.keep_profiles)
        br.points.back().profile = RadialProfile::constant(RadialGrid{dim, opt.cells}, br.end_phi0, *mend);
    }
    br.termination = Termination::merged_with_constants;
  };
  const double small_amp = 1e-3 * (hi - lo);

  while (true) {
    if (static_cast<int>(br.points.size()) >= pol.max_points) {
      br.termination = Termination::max_points;
      break;
    }
    const size_t na = amps.size();
    const bool closing = std::abs(amps[na - 1]) < std::abs(amps[na - 2]);
    if (ds < pol.ds_min) {
      if (closing && std::abs(amp_prev) < small_amp && na >= 3) {
        const double A[3] = {amps[na - 3], amps[na - 2], amps[na - 1]};
        const double P[3] = {X[na - 3][2], X[na - 2][2], X[na - 1][2]};
        finish_merge(A, P);
      } else {
        br.termination = Termination::step_failure;
        br.log.push_back("step size below ds_min at phi0=" + std::to_string(X.back()[2]));
      }
      break;
    }
    // approach the merge point geometrically so the extrapolation stays local
    if (closing) ds = std::min(ds, std::max(std::abs(amp_prev), pol.merge_tol));
    im = default_match_index(prof);
    const Vec3 Xp = X.back() + ds * T;
    Corrected c = correct(m, p, dim, im, Xp, T, opt);
    if (!c.ok) {
      ds *= 0.5;
      continue;
    }
    Vec3 S = c.X - X.back();
    if (S.norm() == 0 || std::acos(std::clamp(S.normalized().dot(T), -1.0, 1.0)) > pol.max_angle) {
      ds *= 0.5;
      continue;
    }
    bool ok = false;
    double amp = signed_amplitude(m, p, c.X, ok);
    if (!ok || c.X[2] <= folds.phi0_minus || c.X[2] >= folds.phi0_plus) {
      br.termination = Termination::domain_exit;
      break;
    }
    const bool on_constant = std::abs(c.X[0] - c.X[1]) < pol.merge_tol && std::abs(amp) < pol.merge_tol;
    if (on_constant && std::abs(amp_prev) >= pol.merge_tol) {
      ds *= 0.5;  // jumped onto the constant branch
      continue;
    }
    if (amp * amp_prev <= 0 || std::abs(amp) < pol.merge_tol) {
      const double A[3] = {amps[na - 2], amps[na - 1], amp};
      const double P[3] = {X[na - 2][2], X[na - 1][2], c.X[2]};
      finish_merge(A, P);
      break;
    }
    RadialProfile next;
    if (!accept(c.X, im, &next)) {
      ds *= 0.5;
      continue;
    }
    if (!within_enclosure(m, p, next, 1e-6)) {
      br.points.pop_back();
      br.termination = Termination::domain_exit;
      br.log.push_back("profile left the enclosure at phi0=" + std::to_string(c.X[2]));
      break;
    }
    prof = std::move(next);
    T = null_tangent(m, p, dim, im, c.X, S.normalized(), opt);
    X.push_back(c.X);
    amps.push_back(amp);
    amp_prev = amp;
    if (c.iterations <= 3) ds = std::min(pol.ds_max, ds * 1.5);
    else if (c.iterations >= 7) ds *= 0.7;
  }
  return br;
}

std::vector<TurningPoint> turning_points(const Branch& br) {
  std::vector<TurningPoint> out;
  const auto& P = br.points;
  if (P.size() < 3) return out;
  auto slope = [&](size_t i) { return (P[i + 1].mass - P[i].mass) / (P[i + 1].phi0 - P[i].phi0); };
  for (size_t i = 1; i + 1 < P.size(); ++i) {
    double s0 = slope(i - 1), s1 = slope(i);
    if (!(s0 * s1 < 0)) continue;
    // vertex of the parabola M(phi0) through the three points
    double x0 = P[i - 1].phi0, x1 = P[i].phi0, x2 = P[i + 1].phi0;
    double y0 = P[i - 1].mass, y1 = P[i].mass, y2 = P[i + 1].mass;
    double d1 = (y1 - y0) / (x1 - x0), d2 = (y2 - y1) / (x2 - x1);
    double c2 = (d2 - d1) / (x2 - x0);
    TurningPoint tp{static_cast<int>(i), x1, y1};
    if (c2 != 0 && std::isfinite(c2)) {
      double c1 = d1 - c2 * (x0 + x1);
      double xv = -c1 / (2 * c2);
      if (xv >= std::min(x0, x2) && xv <= std::max(x0, x2)) {
        tp.phi0 = xv;
        tp.mass = y0 + d1 * (xv - x0) + c2 * (xv - x0) * (xv - x1);
      }
    }
    out.push_back(tp);
  }
  return out;
}

std::vector<DiagramRow> export_diagram(const std::vector<Branch>& branches, const std::vector<double>& constant_grid,
                                       ModelSpec m, const Params& p, int dim) {
  const Domain dom{dim};
  std::vector<DiagramRow> rows;
  auto row_of = [&](const BranchPoint& pt, int id) {
    DiagramRow r;
    r.model = m.kind;
    r.dim = dim;
    r.kappa = p.kappa;
    r.delta = p.delta;
    r.phi0 = pt.phi0;
    r.a = pt.a;
    r.mass = pt.mass;
    r.mass_fraction = pt.mass_fraction;
    r.energy = pt.energy;
    r.lambda_var = pt.lambda_var;
    r.mu1 = pt.mu1;
    r.branch_id = id;
    r.monotone_dir = to_string(pt.monotone_dir);
    r.stable_dyn = pt.mu1 > 0;
    r.stable_var = pt.lambda_var > 0;
    return r;
  };
  for (double phi0 : constant_grid)
    for (const auto& c : constant_solutions(m, p, phi0, dom).roots)
      rows.push_back(row_of(constant_point(m, p, dom, phi0, c.phi), 0));
  for (size_t k = 0; k < branches.size(); ++k)
    for (const auto& pt : branches[k].points) rows.push_back(row_of(pt, static_cast<int>(k) + 1));
  return rows;
}

}  // namespace crowd
