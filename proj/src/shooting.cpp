#include "crowd/shooting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "crowd/constants.hpp"
#include "crowd/ode.hpp"

namespace crowd {
namespace {

using Vec2 = Eigen::Matrix<double, 2, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

struct Rhs2 {
  ModelSpec m;
  double kappa, delta, phi0;
  int dim;
  Vec2 operator()(double r, const Vec2& y) const {
    double g = delta * (y[0] + phi0) - eval_f(m, y[0]);
    return Vec2(y[1], g / kappa - (dim - 1) * y[1] / r);
  }
};

// phi with its sensitivities to the initial value (psi) and to phi0 (zeta).
struct Rhs6 {
  ModelSpec m;
  double kappa, delta, phi0;
  int dim;
  Vec6 operator()(double r, const Vec6& y) const {
    double g = delta * (y[0] + phi0) - eval_f(m, y[0]);
    double q = (delta - eval_fprime(m, y[0])) / kappa;
    double c = (dim - 1) / r;
    Vec6 d;
    d << y[1], g / kappa - c * y[1], y[3], q * y[2] - c * y[3], y[5], q * y[4] + delta / kappa - c * y[5];
    return d;
  }
};

Vec2 taylor_start2(ModelSpec m, const Params& p, double phi0, double a, int dim, double rs) {
  double c = (p.delta * (a + phi0) - eval_f(m, a)) / (dim * p.kappa);
  return Vec2(a + 0.5 * c * rs * rs, c * rs);
}

Vec6 taylor_start6(ModelSpec m, const Params& p, double phi0, double a, int dim, double rs) {
  double c = (p.delta * (a + phi0) - eval_f(m, a)) / (dim * p.kappa);
  double ca = (p.delta - eval_fprime(m, a)) / (dim * p.kappa);
  double cz = p.delta / (dim * p.kappa);
  Vec6 y;
  y << a + 0.5 * c * rs * rs, c * rs, 1 + 0.5 * ca * rs * rs, ca * rs, 0.5 * cz * rs * rs, cz * rs;
  return y;
}

int sgn(double x) { return (x > 0) - (x < 0); }

}  // namespace

RadialProfile RadialProfile::constant(const RadialGrid& g, double phi0, double value) {
  RadialProfile pr;
  pr.grid = g;
  pr.dim = g.dim;
  pr.r = g.radii();
  pr.phi = Eigen::VectorXd::Constant(g.nodes(), value);
  pr.dphi = Eigen::VectorXd::Zero(g.nodes());
  pr.phi0 = phi0;
  pr.a = value;
  return pr;
}

ShootResult integrate_shoot(ModelSpec m, const Params& p, double phi0, double a, int dim,
                            const ShootOptions& opt) {
  p.validate();
  RadialGrid g{dim, opt.cells};
  g.validate();
  ShootResult res;
  RadialProfile& pr = res.profile;
  pr = RadialProfile::constant(g, phi0, a);
  Rhs2 rhs{m, p.kappa, p.delta, phi0, dim};
  Dopri5<double, 2> ode;
  ode.rtol = opt.ode_rtol;
  ode.atol = opt.ode_atol;
  Vec2 y = taylor_start2(m, p, phi0, a, dim, opt.r_start);
  double r = opt.r_start;
  auto guard = [&](double, const Vec2& s) { return std::abs(s[0]) <= opt.blowup; };
  for (int i = 1; i < g.nodes(); ++i) {
    auto st = ode.integrate(rhs, r, g.r(i), y, guard);
    r = g.r(i);
    if (st != OdeStatus::ok) {
      res.diverged = true;
      pr.phi.tail(g.nodes() - i).setConstant(std::nan(""));
      pr.dphi.tail(g.nodes() - i).setConstant(std::nan(""));
      res.terminal_slope = std::nan("");
      return res;
    }
    pr.phi[i] = y[0];
    pr.dphi[i] = y[1];
  }
  res.terminal_slope = y[1];
  res.converged = std::abs(res.terminal_slope) <= opt.slope_tol;
  return res;
}

ShotSummary shoot_probe(ModelSpec m, const Params& p, double phi0, double a, int dim, double phi_lo,
                        double phi_hi, const ShootOptions& opt) {
  Rhs2 rhs{m, p.kappa, p.delta, phi0, dim};
  Dopri5<double, 2> ode;
  ode.rtol = opt.ode_rtol;
  ode.atol = opt.ode_atol;
  Vec2 y = taylor_start2(m, p, phi0, a, dim, opt.r_start);
  ShotSummary s;
  int last = sgn(y[1]);
  const double margin = 1e-8 * (1 + std::max(std::abs(phi_lo), std::abs(phi_hi)));
  auto obs = [&](double, const Vec2& st) {
    int sg = sgn(st[1]);
    if (sg != 0) {
      if (last != 0 && sg != last) ++s.zeros;
      last = sg;
    }
    // outside the enclosure the solution cannot turn back
    if (st[0] > phi_hi + margin && st[1] > 0) {
      s.escape = 1;
      return false;
    }
    if (st[0] < phi_lo - margin && st[1] < 0) {
      s.escape = -1;
      return false;
    }
    if (std::abs(st[0]) > opt.blowup) {
      s.diverged = true;
      return false;
    }
    return true;
  };
  auto st = ode.integrate(rhs, opt.r_start, 1.0, y, obs);
  if (st != OdeStatus::ok && st != OdeStatus::stopped) s.diverged = true;
  s.slope = y[1];
  s.phi_end = y[0];
  return s;
}

MatchEval eval_match(ModelSpec m, const Params& p, double phi0, double a, double b, int dim, int i_match,
                     bool want_profile, const ShootOptions& opt) {
  RadialGrid g{dim, opt.cells};
  if (i_match < 1 || i_match >= g.cells) throw std::invalid_argument("eval_match: bad matching node");
  MatchEval ev;
  Rhs6 rhs{m, p.kappa, p.delta, phi0, dim};
  auto guard = [&](double, const Vec6& s) { return std::abs(s[0]) <= opt.blowup; };
  RadialProfile pr;
  if (want_profile) pr = RadialProfile::constant(g, phi0, a);

  Dopri5<double, 6> fw;
  fw.rtol = opt.refine_rtol;
  fw.atol = opt.ode_atol * 1e-2;
  Vec6 yf = taylor_start6(m, p, phi0, a, dim, opt.r_start);
  double r = opt.r_start;
  for (int i = 1; i <= i_match; ++i) {
    if (fw.integrate(rhs, r, g.r(i), yf, guard) != OdeStatus::ok) return ev;
    r = g.r(i);
    if (want_profile) {
      pr.phi[i] = yf[0];
      pr.dphi[i] = yf[1];
    }
  }
  Dopri5<double, 6> bw;
  bw.rtol = opt.refine_rtol;
  bw.atol = opt.ode_atol * 1e-2;
  Vec6 yb;
  yb << b, 0, 1, 0, 0, 0;
  if (want_profile) {
    pr.phi[g.cells] = b;
    pr.dphi[g.cells] = 0;
  }
  r = 1.0;
  for (int i = g.cells - 1; i >= i_match; --i) {
    if (bw.integrate(rhs, r, g.r(i), yb, guard) != OdeStatus::ok) return ev;
    r = g.r(i);
    if (want_profile && i > i_match) {
      pr.phi[i] = yb[0];
      pr.dphi[i] = yb[1];
    }
  }
  ev.ok = true;
  ev.G << yf[0] - yb[0], yf[1] - yb[1];
  ev.J << yf[2], -yb[2], yf[4] - yb[4], yf[3], -yb[3], yf[5] - yb[5];
  if (want_profile) ev.profile = std::move(pr);
  return ev;
}

int default_match_index(const RadialProfile& prof) {
  const int n = static_cast<int>(prof.dphi.size());
  int best = n / 2;
  double bv = -1;
  for (int i = 1; i < n - 1; ++i) {
    double v = std::abs(prof.dphi[i]);
    if (std::isfinite(v) && v > bv) {
      bv = v;
      best = i;
    }
  }
  return best;
}

ShootResult solve_two_sided(ModelSpec m, const Params& p, double phi0, double a, double b, int dim,
                            int i_match, const ShootOptions& opt) {
  ShootResult res;
  res.match_index = i_match;
  MatchEval ev = eval_match(m, p, phi0, a, b, dim, i_match, false, opt);
  double resid = ev.ok ? ev.G.cwiseAbs().maxCoeff() : INFINITY;
  for (int it = 0; it < opt.max_newton && ev.ok && resid > 0.01 * opt.slope_tol; ++it) {
    Eigen::Vector2d step = ev.J.leftCols<2>().fullPivLu().solve(-ev.G);
    if (!step.allFinite()) break;
    double lam = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30 && !improved; ++ls, lam *= 0.5) {
      MatchEval trial = eval_match(m, p, phi0, a + lam * step[0], b + lam * step[1], dim, i_match, false, opt);
      double tr = trial.ok ? trial.G.cwiseAbs().maxCoeff() : INFINITY;
      if (tr < resid) {
        improved = true;
        a += lam * step[0];
        b += lam * step[1];
        ev = trial;
        resid = tr;
      }
    }
    if (!improved) break;  // noise floor
  }
  res.match_residual = resid;
  MatchEval fin = eval_match(m, p, phi0, a, b, dim, i_match, true, opt);
  if (!fin.ok) {
    res.diverged = true;
    res.profile = RadialProfile::constant(RadialGrid{dim, opt.cells}, phi0, a);
    return res;
  }
  res.profile = *fin.profile;
  res.profile.a = a;
  res.terminal_slope = res.profile.dphi[opt.cells];
  res.converged = resid <= opt.slope_tol && std::abs(res.terminal_slope) <= opt.slope_tol;
  return res;
}

std::vector<ShootResult> find_shooting_roots(ModelSpec m, const Params& p, double phi0, int dim,
                                             const ShootOptions& opt, std::vector<std::string>* warnings) {
  p.validate();
  RadialGrid g{dim, opt.cells};
  g.validate();
  auto cs = constant_solutions(m, p, phi0, Domain{dim});
  const double lo = cs.roots.front().phi, hi = cs.roots.back().phi;

  std::vector<ShootResult> out;
  for (const auto& c : cs.roots) {
    if (!out.empty() && std::abs(out.back().profile.a - c.phi) < kDegenerateTol) continue;
    ShootResult r;
    r.profile = RadialProfile::constant(g, phi0, c.phi);
    r.converged = true;
    out.push_back(std::move(r));
  }
  if (hi - lo < kDegenerateTol) return out;

  using State = std::pair<int, int>;
  auto state_of = [&](double a) {
    ShotSummary s = shoot_probe(m, p, phi0, a, dim, lo, hi, opt);
    return std::make_tuple(State{s.zeros, s.sign()}, s);
  };

  std::vector<ShootResult> found;
  const double width = hi - lo;
  for (size_t k = 0; k + 1 < out.size(); ++k) {
    // constants split the scan; they are never evaluated (their slope sign is noise)
    double c0 = out[k].profile.a, c1 = out[k + 1].profile.a;
    int n = std::max(8, static_cast<int>(std::lround(opt.scan_cells * (c1 - c0) / width)));
    std::vector<double> as;
    for (int j = 1; j < n; ++j) as.push_back(c0 + (c1 - c0) * j / n);
    // pinned plateaus sit exponentially close to a constant: add geometric nodes at both ends
    const double cell = (c1 - c0) / n;
    for (double d = cell / 2; d > 1e-12 * (1 + std::max(std::abs(c0), std::abs(c1))); d /= 2) {
      as.push_back(c0 + d);
      as.push_back(c1 - d);
    }
    std::sort(as.begin(), as.end());
    std::vector<State> st(as.size());
    for (size_t j = 0; j < as.size(); ++j) st[j] = std::get<0>(state_of(as[j]));
    for (size_t j = 0; j + 1 < as.size(); ++j) {
      if (st[j] == st[j + 1]) continue;
      bool elementary = std::abs(st[j].first - st[j + 1].first) == 1 && st[j].second == -st[j + 1].second;
      if (!elementary && warnings)
        warnings->push_back("phi0=" + std::to_string(phi0) + ": possible missed root near a=" +
                            std::to_string(as[j]));
      double al = as[j], ar = as[j + 1];
      State sl = st[j];
      for (int it = 0; it < 200 && ar - al > 4e-16 * std::max(1.0, std::abs(al)); ++it) {
        double mid = 0.5 * (al + ar);
        if (mid <= al || mid >= ar) break;
        if (std::get<0>(state_of(mid)) == sl) al = mid;
        else ar = mid;
      }
      // center profile just before the root gives the matching node and phi(1)
      ShootResult center = integrate_shoot(m, p, phi0, al, dim, opt);
      ShotSummary sum = std::get<1>(state_of(al));
      int last = 0;
      for (int i = 0; i < g.nodes(); ++i)
        if (std::isfinite(center.profile.phi[i])) last = i;
      RadialProfile head = center.profile;
      head.dphi.tail(g.nodes() - last - 1).setZero();
      int im = default_match_index(head);
      double b = last == g.cells ? center.profile.phi[g.cells] : sum.phi_end;
      b = std::clamp(b, lo, hi);
      ShootResult r = solve_two_sided(m, p, phi0, 0.5 * (al + ar), b, dim, im, opt);
      if (r.diverged) continue;
      double amp = (r.profile.phi.array() - r.profile.a).abs().maxCoeff();
      if (amp < 1e-7) continue;  // collapsed onto a constant
      bool dup = false;
      for (const auto& f : found)
        if (std::abs(f.profile.a - r.profile.a) < 1e-9 * (1 + std::abs(r.profile.a))) dup = true;
      if (!dup) found.push_back(std::move(r));
    }
  }
  for (auto& f : found) out.push_back(std::move(f));
  std::sort(out.begin(), out.end(),
            [](const ShootResult& x, const ShootResult& y) { return x.profile.a < y.profile.a; });
  return out;
}

MassValue mass_of_profile(const RadialProfile& prof) {
  Eigen::VectorXd w = simpson_weights(prof.grid);
  double s = 0;
  for (int i = 0; i < prof.phi.size(); ++i) s += w[i] * rho_of_phi(prof.phi[i]);
  return {s, s / prof.grid.domain().volume()};
}

const char* to_string(Monotonicity m) {
  switch (m) {
    case Monotonicity::increasing: return "increasing";
    case Monotonicity::decreasing: return "decreasing";
    case Monotonicity::constant: return "constant";
    default: return "non_monotone";
  }
}

Monotonicity is_monotone(const RadialProfile& prof, double flat_tol) {
  bool pos = false, neg = false;
  for (int i = 0; i < prof.dphi.size(); ++i) {
    if (prof.dphi[i] > flat_tol) pos = true;
    if (prof.dphi[i] < -flat_tol) neg = true;
  }
  if (pos && neg) return Monotonicity::non_monotone;
  if (pos) return Monotonicity::increasing;
  if (neg) return Monotonicity::decreasing;
  return Monotonicity::constant;
}

RadialProfile build_periodic(const RadialProfile& prof, int n) {
  if (prof.dim != 1) throw std::invalid_argument("build_periodic: only d=1");
  if (n < 1) throw std::invalid_argument("build_periodic: n must be >= 1");
  RadialProfile out = prof;
  const RadialGrid& g = prof.grid;
  // n*r_i modulo 1 is again a grid point, so no interpolation is needed
  for (int i = 0; i < g.nodes(); ++i) {
    long num = static_cast<long>(i) * n;
    long k = std::min<long>(num / g.cells, n - 1);
    long rem = num - k * g.cells;
    bool reflect = k % 2 == 1;
    long j = reflect ? g.cells - rem : rem;
    out.phi[i] = prof.phi[j];
    out.dphi[i] = (reflect ? -1.0 : 1.0) * n * prof.dphi[j];
  }
  out.a = out.phi[0];
  return out;
}

double bvp_residual(ModelSpec m, const Params& p, const RadialProfile& prof) {
  const int N = prof.grid.cells;
  const Eigen::VectorXd& d = prof.dphi;
  Eigen::VectorXd d2 = fd_derivative(prof.grid, d);
  double worst = 0;
  for (int i = 0; i <= N; ++i) {
    double dd = d2[i];
    double lap = dd;
    if (prof.dim == 2) lap = i == 0 ? 2 * dd : dd + d[i] / prof.r[i];
    double res = -p.kappa * lap + p.delta * (prof.phi[i] + prof.phi0) - eval_f(m, prof.phi[i]);
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

bool within_enclosure(ModelSpec m, const Params& p, const RadialProfile& prof, double tol) {
  auto [lo, hi] = solution_enclosure(m, p, prof.phi0);
  return prof.phi.minCoeff() >= lo - tol && prof.phi.maxCoeff() <= hi + tol;
}

}  // namespace crowd
