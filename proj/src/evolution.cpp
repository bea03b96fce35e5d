#include "crowd/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crowd {
namespace {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

// 2x2 block tridiagonal system, unknowns interleaved per node.
struct BlockTri {
  std::vector<Mat2> lo, di, up;
  explicit BlockTri(int n) : lo(n, Mat2::Zero()), di(n, Mat2::Zero()), up(n, Mat2::Zero()) {}

  // block Thomas; rhs is overwritten with the solution
  void solve(std::vector<Vec2>& b) {
    const int n = static_cast<int>(di.size());
    std::vector<Mat2> d = di;
    for (int i = 1; i < n; ++i) {
      Mat2 M = lo[i] * d[i - 1].inverse();
      d[i] -= M * up[i - 1];
      b[i] -= M * b[i - 1];
    }
    b[n - 1] = d[n - 1].inverse() * b[n - 1];
    for (int i = n - 2; i >= 0; --i) b[i] = d[i].inverse() * (b[i] - up[i] * b[i + 1]);
  }
};

double logit(double r) { return std::log(r) - std::log1p(-r); }

void check_range(const Eigen::VectorXd& rho, double eps) {
  for (int i = 0; i < rho.size(); ++i)
    if (!(rho[i] >= eps && rho[i] <= 1 - eps))
      throw NumericalError("evolution: rho left [eps, 1-eps] at node " + std::to_string(i));
}

void check_grid(const State& s) {
  s.grid.validate();
  if (s.rho.size() != s.grid.nodes() || s.D.size() != s.grid.nodes())
    throw std::invalid_argument("evolution: state size does not match its grid");
}

double functional_of(const State& s, ModelSpec m, const Params& p, double M) {
  if (m.kind == ModelKind::II) return lyapunov_discrete(p, s.rho, s.D, s.grid);
  return energy_proxy_discrete(m, p, s.D, M, s.grid);
}

double sup_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

State State::from_profile(const RadialProfile& prof) {
  State s;
  s.grid = prof.grid;
  s.rho = prof.phi.unaryExpr([](double x) { return rho_of_phi(x); });
  s.D = prof.phi.array() + prof.phi0;
  return s;
}

double State::mass() const { return fv_weights(grid).dot(rho); }

std::pair<Eigen::VectorXd, Eigen::VectorXd> rhs(const State& s, ModelSpec m, const Params& p) {
  check_grid(s);
  const int n = s.grid.nodes();
  Eigen::VectorXd w = fv_weights(s.grid), t = fv_faces(s.grid);
  Eigen::VectorXd mu(n), c(n);
  for (int i = 0; i < n; ++i) {
    mu[i] = logit(s.rho[i]) - s.D[i];
    c[i] = s.rho[i] * (1 - s.rho[i]);
  }
  Eigen::VectorXd fr = Eigen::VectorXd::Zero(n);
  for (int f = 0; f < n - 1; ++f) {
    double flux = t[f] * 0.5 * (c[f] + c[f + 1]) * (mu[f + 1] - mu[f]);
    fr[f] += flux;
    fr[f + 1] -= flux;
  }
  Eigen::VectorXd fd = -p.kappa * fv_stiffness_apply(t, s.D);
  for (int i = 0; i < n; ++i) fd[i] += w[i] * (eval_g(m, s.rho[i]) - p.delta * s.D[i]);
  return {(fr.array() / w.array()).matrix(), (fd.array() / w.array()).matrix()};
}

State step(const State& s, double dt, ModelSpec m, const Params& p, double rho_eps) {
  if (!(dt > 0)) throw std::invalid_argument("step: dt must be positive");
  check_grid(s);
  check_range(s.rho, rho_eps);
  const int n = s.grid.nodes();
  Eigen::VectorXd w = fv_weights(s.grid), t = fv_faces(s.grid);
  Eigen::VectorXd mu(n), c(n), dc(n);
  for (int i = 0; i < n; ++i) {
    mu[i] = logit(s.rho[i]) - s.D[i];
    c[i] = s.rho[i] * (1 - s.rho[i]);
    dc[i] = 1 - 2 * s.rho[i];
  }

  // (W - dt J) dy = dt R, with R = W y' and J = dR/dy
  BlockTri sys(n);
  std::vector<Vec2> b(n, Vec2::Zero());
  for (int i = 0; i < n; ++i) sys.di[i].diagonal() << w[i], w[i];
  auto addJ = [&](int row, int col, int ci, int cj, double v) {
    Mat2& blk = col == row ? sys.di[row] : (col < row ? sys.lo[row] : sys.up[row]);
    blk(ci, cj) -= dt * v;
  };
  for (int f = 0; f < n - 1; ++f) {
    const int i = f, j = f + 1;
    const double cf = 0.5 * (c[i] + c[j]), dmu = mu[j] - mu[i];
    const double flux = t[f] * cf * dmu;
    b[i][0] += dt * flux;
    b[j][0] -= dt * flux;
    // d flux / d(rho_i, D_i, rho_j, D_j)
    const double fri = t[f] * (0.5 * dc[i] * dmu - cf / c[i]);
    const double frj = t[f] * (0.5 * dc[j] * dmu + cf / c[j]);
    const double fDi = t[f] * cf, fDj = -t[f] * cf;
    addJ(i, i, 0, 0, fri);
    addJ(i, i, 0, 1, fDi);
    addJ(i, j, 0, 0, frj);
    addJ(i, j, 0, 1, fDj);
    addJ(j, i, 0, 0, -fri);
    addJ(j, i, 0, 1, -fDi);
    addJ(j, j, 0, 0, -frj);
    addJ(j, j, 0, 1, -fDj);
    // -kappa K D
    const double k = p.kappa * t[f];
    b[i][1] -= dt * k * (s.D[i] - s.D[j]);
    b[j][1] -= dt * k * (s.D[j] - s.D[i]);
    addJ(i, i, 1, 1, -k);
    addJ(i, j, 1, 1, k);
    addJ(j, j, 1, 1, -k);
    addJ(j, i, 1, 1, k);
  }
  for (int i = 0; i < n; ++i) {
    b[i][1] += dt * w[i] * (eval_g(m, s.rho[i]) - p.delta * s.D[i]);
    addJ(i, i, 1, 0, w[i] * h_of_rho(m, s.rho[i]));
    addJ(i, i, 1, 1, -w[i] * p.delta);
  }
  sys.solve(b);

  State out = s;
  for (int i = 0; i < n; ++i) {
    out.rho[i] += b[i][0];
    out.D[i] += b[i][1];
  }
  if (!out.rho.allFinite() || !out.D.allFinite()) throw NumericalError("evolution: non-finite state");
  check_range(out.rho, rho_eps);
  out.t = s.t + dt;
  return out;
}

double fit_rate(const std::vector<double>& t, const std::vector<double>& y, double lo, double hi, double t0) {
  double st = 0, sy = 0, stt = 0, sty = 0;
  int k = 0;
  for (size_t i = 0; i < t.size() && i < y.size(); ++i) {
    if (t[i] < t0 || !(y[i] > lo && y[i] < hi)) continue;
    double ly = std::log(y[i]);
    st += t[i];
    sy += ly;
    stt += t[i] * t[i];
    sty += t[i] * ly;
    ++k;
  }
  if (k < 3) return NAN;
  double den = k * stt - st * st;
  return den > 0 ? (k * sty - st * sy) / den : NAN;
}

RunSummary run(const State& initial, double T, const EvolveOptions& opt, ModelSpec m, const Params& p,
               const std::vector<RadialProfile>& library, const State* reference) {
  p.validate();
  check_grid(initial);
  if (!(T >= 0)) throw std::invalid_argument("run: T must be nonnegative");
  if (!(opt.dt0 > 0)) throw std::invalid_argument("run: dt0 must be positive");
  for (const auto& lib : library)
    if (lib.grid.cells != initial.grid.cells || lib.grid.dim != initial.grid.dim)
      throw std::invalid_argument("run: library profile on a different grid");
  if (reference && reference->rho.size() != initial.rho.size())
    throw std::invalid_argument("run: reference on a different grid");
  check_range(initial.rho, opt.rho_eps);

  RunSummary out;
  out.functional_name = m.kind == ModelKind::II ? "lyapunov" : "energy_proxy";
  const double M0 = initial.mass();
  auto sample = [&](const State& s) {
    out.times.push_back(s.t);
    out.mass.push_back(s.mass());
    out.functional.push_back(functional_of(s, m, p, M0));
    if (reference) out.deviation.push_back(sup_diff(s.rho, reference->rho));
  };

  State s = initial;
  const double t_end = initial.t + T;
  sample(s);
  double dt = opt.dt0;
  long since_sample = 0;
  while (s.t < t_end - 1e-12 * std::max(1.0, t_end)) {
    if (out.steps >= opt.max_steps) throw NumericalError("run: max_steps reached");
    const double h = std::min(dt, t_end - s.t);
    State next;
    if (!opt.adaptive) {
      next = step(s, h, m, p, opt.rho_eps);
    } else {
      double err = INFINITY;
      try {
        State full = step(s, h, m, p, opt.rho_eps);
        State half = step(step(s, 0.5 * h, m, p, opt.rho_eps), 0.5 * h, m, p, opt.rho_eps);
        err = 0;
        for (int i = 0; i < s.rho.size(); ++i) {
          err = std::max(err, std::abs(full.rho[i] - half.rho[i]) / opt.tol);
          err = std::max(err, std::abs(full.D[i] - half.D[i]) / (opt.tol * (1 + std::abs(half.D[i]))));
        }
        next = std::move(half);
      } catch (const NumericalError&) {
        err = INFINITY;
      }
      if (!(err <= 1)) {
        ++out.rejected;
        dt = 0.5 * h;
        if (dt < opt.dt_min) throw NumericalError("run: step size below dt_min at t=" + std::to_string(s.t));
        continue;
      }
      // local error of the doubled step is O(h^2)
      double grow = err > 0 ? 0.9 / std::sqrt(err) : 2.0;
      dt = std::clamp(h * std::clamp(grow, 0.5, 2.0), opt.dt_min, opt.dt_max);
      if (h < dt && s.t + h >= t_end - 1e-12 * std::max(1.0, t_end)) dt = std::max(dt, h);
    }
    s = std::move(next);
    ++out.steps;
    if (++since_sample >= opt.sample_stride || s.t >= t_end - 1e-12 * std::max(1.0, t_end)) {
      sample(s);
      since_sample = 0;
    }
  }

  if (reference) out.growth_rate = fit_rate(out.times, out.deviation, opt.fit_lo, opt.fit_hi, opt.fit_t0);
  for (size_t k = 0; k < library.size(); ++k) {
    Eigen::VectorXd rl = library[k].phi.unaryExpr([](double x) { return rho_of_phi(x); });
    double d = sup_diff(s.rho, rl);
    if (out.nearest < 0 || d < out.terminal_distance) {
      out.terminal_distance = d;
      out.nearest = static_cast<int>(k);
    }
  }
  out.terminal = std::move(s);
  return out;
}

LinearSummary linearized_evolve(const RadialProfile& prof, PairField q, double T, const Params& p, ModelSpec m,
                                const EvolveOptions& opt) {
  p.validate();
  const RadialGrid& g = prof.grid;
  const int n = g.nodes();
  if (q.u.size() != n || q.v.size() != n) throw std::invalid_argument("linearized_evolve: pair size mismatch");
  if (!(opt.dt0 > 0) || !(T >= 0)) throw std::invalid_argument("linearized_evolve: bad dt or T");
  Eigen::VectorXd w = fv_weights(g), t = fv_faces(g);
  Eigen::VectorXd c = mobility(prof);
  const double vol = w.sum();
  q.u.array() -= w.dot(q.u) / vol;

  // W - dt A, constant in time
  const double dt = opt.dt0;
  BlockTri sys(n);
  for (int i = 0; i < n; ++i) {
    sys.di[i] << w[i], 0, 0, w[i];
    double h = h_of_rho(m, rho_of_phi(prof.phi[i]));
    sys.di[i](1, 0) -= dt * w[i] * h;
    sys.di[i](1, 1) += dt * w[i] * p.delta;
  }
  for (int f = 0; f < n - 1; ++f) {
    const int i = f, j = f + 1;
    const double tc = t[f] * 0.5 * (c[i] + c[j]), k = p.kappa * t[f];
    // flux tc ((u/c - v)_j - (u/c - v)_i) enters row i with +, row j with -
    sys.di[i](0, 0) += dt * tc / c[i];
    sys.di[i](0, 1) -= dt * tc;
    sys.up[i](0, 0) -= dt * tc / c[j];
    sys.up[i](0, 1) += dt * tc;
    sys.di[j](0, 0) += dt * tc / c[j];
    sys.di[j](0, 1) -= dt * tc;
    sys.lo[j](0, 0) -= dt * tc / c[i];
    sys.lo[j](0, 1) += dt * tc;
    sys.di[i](1, 1) += dt * k;
    sys.di[j](1, 1) += dt * k;
    sys.up[i](1, 1) -= dt * k;
    sys.lo[j](1, 1) -= dt * k;
  }
  // factor once: store modified diagonals and multipliers
  std::vector<Mat2> dinv(n), mult(n);
  {
    Mat2 d = sys.di[0];
    dinv[0] = d.inverse();
    for (int i = 1; i < n; ++i) {
      mult[i] = sys.lo[i] * dinv[i - 1];
      d = sys.di[i] - mult[i] * sys.up[i - 1];
      dinv[i] = d.inverse();
    }
  }
  auto solve = [&](std::vector<Vec2>& b) {
    for (int i = 1; i < n; ++i) b[i] -= mult[i] * b[i - 1];
    b[n - 1] = dinv[n - 1] * b[n - 1];
    for (int i = n - 2; i >= 0; --i) b[i] = dinv[i] * (b[i] - sys.up[i] * b[i + 1]);
  };

  LinearSummary out;
  double time = 0, LD_prev = quad_LD(prof, p, q), scale_max = 0;
  std::vector<double> defects;
  auto sample = [&](double LD) {
    out.times.push_back(time);
    out.integral_u.push_back(w.dot(q.u));
    out.abs_u.push_back(w.dot(q.u.cwiseAbs()));
    out.LD.push_back(LD);
    out.ID.push_back(quad_ID(prof, p, q));
  };
  sample(LD_prev);
  const long nsteps = static_cast<long>(std::ceil(T / dt - 1e-9));
  std::vector<Vec2> b(n);
  for (long k = 0; k < nsteps; ++k) {
    for (int i = 0; i < n; ++i) b[i] << w[i] * q.u[i], w[i] * q.v[i];
    solve(b);
    for (int i = 0; i < n; ++i) {
      q.u[i] = b[i][0];
      q.v[i] = b[i][1];
    }
    if (!q.u.allFinite() || !q.v.allFinite()) throw NumericalError("linearized_evolve: non-finite state");
    time += dt;
    double LD = quad_LD(prof, p, q), ID = quad_ID(prof, p, q);
    if (m.kind == ModelKind::II) {
      double d = std::abs((LD - LD_prev) / dt + 2 * ID);
      double sc = std::max(2 * ID, std::abs(LD) / std::max(T, dt));
      scale_max = std::max(scale_max, sc);
      defects.push_back(sc > 0 ? d / sc : d);
    }
    LD_prev = LD;
    if ((k + 1) % opt.sample_stride == 0 || k + 1 == nsteps) sample(LD);
  }
  if (!defects.empty()) out.dissipation_defect = *std::max_element(defects.begin(), defects.end());
  std::vector<double> absLD(out.LD.size());
  for (size_t i = 0; i < absLD.size(); ++i) absLD[i] = std::abs(out.LD[i]);
  out.growth_rate = 0.5 * fit_rate(out.times, absLD, 0, INFINITY, opt.fit_t0);
  out.terminal = std::move(q);
  return out;
}

}  // namespace crowd
