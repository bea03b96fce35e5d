#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "crowd/grid.hpp"
#include "crowd/model.hpp"

namespace crowd {

struct ShootOptions {
  int cells = 1024;
  double ode_rtol = 1e-10;
  double ode_atol = 1e-12;
  double refine_rtol = 1e-12;  // two-sided refinement
  double r_start = 1e-6;
  double blowup = 1e3;
  double slope_tol = 1e-10;
  double residual_tol = 1e-8;
  int scan_cells = 2000;
  int max_newton = 30;
};

struct RadialProfile {
  RadialGrid grid;
  Eigen::VectorXd r, phi, dphi;
  int dim = 1;
  double phi0 = 0;
  double a = 0;

  static RadialProfile constant(const RadialGrid& g, double phi0, double value);
};

struct ShootResult {
  RadialProfile profile;
  double terminal_slope = 0;
  bool converged = false;
  bool diverged = false;
  double match_residual = 0;  // two-sided refinement only
  int match_index = -1;
};

// Center shot resampled on the profile grid (no refinement).
ShootResult integrate_shoot(ModelSpec m, const Params& p, double phi0, double a, int dim,
                            const ShootOptions& opt = {});

// Cheap center shot used for bracketing: zeros of phi' on (0,1) and the terminal slope sign.
// escape = +1/-1 when phi left [phi_-, phi_+] moving outward (the slope sign is then known).
struct ShotSummary {
  double slope = 0;
  int zeros = 0;
  int escape = 0;
  bool diverged = false;
  double phi_end = 0;
  int sign() const { return escape != 0 ? escape : (slope > 0) - (slope < 0); }
};
ShotSummary shoot_probe(ModelSpec m, const Params& p, double phi0, double a, int dim, double phi_lo,
                        double phi_hi, const ShootOptions& opt = {});

// Matching conditions of the two-sided shot (forward from r=0 with phi(0)=a, backward from
// r=1 with phi(1)=b, phi'(1)=0) at node i_match, with Jacobian w.r.t. (a, b, phi0).
struct MatchEval {
  bool ok = false;
  Eigen::Vector2d G = Eigen::Vector2d::Zero();
  Eigen::Matrix<double, 2, 3> J = Eigen::Matrix<double, 2, 3>::Zero();
  std::optional<RadialProfile> profile;
};
MatchEval eval_match(ModelSpec m, const Params& p, double phi0, double a, double b, int dim, int i_match,
                     bool want_profile, const ShootOptions& opt = {});

// Newton on (a, b) at fixed phi0.
ShootResult solve_two_sided(ModelSpec m, const Params& p, double phi0, double a, double b, int dim,
                            int i_match, const ShootOptions& opt = {});
int default_match_index(const RadialProfile& prof);

std::vector<ShootResult> find_shooting_roots(ModelSpec m, const Params& p, double phi0, int dim,
                                             const ShootOptions& opt = {},
                                             std::vector<std::string>* warnings = nullptr);

struct MassValue {
  double mass;
  double fraction;
};
MassValue mass_of_profile(const RadialProfile& prof);

enum class Monotonicity { increasing, decreasing, constant, non_monotone };
const char* to_string(Monotonicity m);
Monotonicity is_monotone(const RadialProfile& prof, double flat_tol = 1e-9);

RadialProfile build_periodic(const RadialProfile& prof, int n);

// max |-kappa Lap phi + delta(phi+phi0) - f(phi)| with phi'' from 6th-order differences of phi'.
double bvp_residual(ModelSpec m, const Params& p, const RadialProfile& prof);
// phi_- <= phi <= phi_+ up to tol.
bool within_enclosure(ModelSpec m, const Params& p, const RadialProfile& prof, double tol = 1e-9);

}  // namespace crowd
