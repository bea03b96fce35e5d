#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "crowd/functionals.hpp"
#include "crowd/grid.hpp"
#include "crowd/model.hpp"
#include "crowd/shooting.hpp"

namespace crowd {

// Nodal values on the profile grid (vertex-centered finite volumes).
struct State {
  RadialGrid grid;
  Eigen::VectorXd rho, D;
  double t = 0;

  // rho = 1/(1+e^{-phi}), D = phi + phi0
  static State from_profile(const RadialProfile& prof);
  double mass() const;
};

struct EvolveOptions {
  double dt0 = 1e-4;
  double dt_min = 1e-12;
  double dt_max = 50.0;
  double tol = 1e-7;        // step-doubling error, absolute on rho, relative-plus-one on D
  bool adaptive = true;     // false: fixed steps of dt0
  long max_steps = 10000000;
  int sample_stride = 1;    // record diagnostics every k accepted steps (and at T)
  double rho_eps = 1e-12;
  // deviation window used by the exponential fit
  double fit_lo = 0.0;
  double fit_hi = 1e-3;
  double fit_t0 = 0.0;
};

struct RunSummary {
  std::vector<double> times;
  std::vector<double> mass;
  std::vector<double> functional;  // Lyapunov (Model II) or energy proxy (Model I)
  std::string functional_name;
  std::vector<double> deviation;   // sup |rho - rho_ref|, empty without a reference
  double terminal_distance = NAN;  // sup |rho - rho_lib| to the nearest library profile
  int nearest = -1;
  double growth_rate = NAN;        // slope of log deviation over the fit window
  long steps = 0;
  long rejected = 0;
  State terminal;
};

// One linearly implicit Euler step:
//   w rho' = div(c grad(logit rho - D)),  c = rho(1-rho) (face mean),
//   w D'   = -kappa K D - w delta D + w g(rho).
// Throws NumericalError if rho leaves [rho_eps, 1 - rho_eps].
State step(const State& s, double dt, ModelSpec m, const Params& p, double rho_eps = 1e-12);

// Semi-discrete right-hand sides (rho', D') at s.
std::pair<Eigen::VectorXd, Eigen::VectorXd> rhs(const State& s, ModelSpec m, const Params& p);

RunSummary run(const State& initial, double T, const EvolveOptions& opt, ModelSpec m, const Params& p,
               const std::vector<RadialProfile>& library = {}, const State* reference = nullptr);

// Exponential rate by least squares on log y over samples with lo < y < hi and t >= t0.
double fit_rate(const std::vector<double>& t, const std::vector<double>& y, double lo, double hi, double t0 = 0);

struct LinearSummary {
  std::vector<double> times;
  std::vector<double> integral_u;
  std::vector<double> abs_u;  // int |u|, the scale for the drift of int u
  std::vector<double> LD;
  std::vector<double> ID;
  // max over steps of |(L_D(n+1) - L_D(n))/dt + 2 I_D(n+1)|, relative to max(2 I_D, |L_D|/T)
  double dissipation_defect = 0;
  double growth_rate = NAN;  // slope of log |L_D| / 2
  PairField terminal;
};

// Implicit Euler on the linearization at a stationary profile:
//   w u' = div(c grad(u/c - v)),  w v' = -kappa K v - w delta v + w h u.
// int u0 is projected out first. Fixed step opt.dt0.
LinearSummary linearized_evolve(const RadialProfile& prof, PairField pair0, double T, const Params& p,
                                ModelSpec m, const EvolveOptions& opt);

}  // namespace crowd
