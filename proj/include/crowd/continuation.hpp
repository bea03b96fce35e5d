#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crowd/model.hpp"
#include "crowd/shooting.hpp"

namespace crowd {

struct SpectralBasis;

// phi0 values where kappa lambda_1 + delta = f'(phi) on the middle constant, sorted. Empty when
// kappa lambda_1 + delta >= max f'.
std::vector<double> bifurcation_thresholds(ModelSpec m, const Params& p, const Domain& dom);

struct BranchPoint {
  double phi0 = 0;
  double a = 0;
  double b = 0;  // phi(1)
  double mass = 0;
  double mass_fraction = 0;
  double energy = 0;
  double lambda_var = 0;
  double mu1 = 0;
  Monotonicity monotone_dir = Monotonicity::constant;
  bool enriched = false;
  std::optional<RadialProfile> profile;
};

enum class Termination { merged_with_constants, domain_exit, step_failure, max_points };
const char* to_string(Termination t);

struct Branch {
  ModelSpec model;
  Params params;
  int dim = 1;
  double origin_phi0 = 0;
  double end_phi0 = 0;  // extrapolated merge point when merged_with_constants
  std::vector<BranchPoint> points;
  Termination termination = Termination::step_failure;
  std::vector<std::string> log;
};

struct StepPolicy {
  double ds_init = 0;     // 0: 2 eps
  double ds_max = 4.0;    // in units of (a, b, phi0)
  double ds_min = 1e-7;
  double max_angle = 0.5;  // radians between predicted and corrected steps
  int max_points = 2000;
  double merge_tol = 1e-5;
  double seed_factor = 1e-3;  // eps = min(seed_factor (phi_+ - phi_-), seed_max)
  double seed_max = 1e-2;
  bool enrich = true;
  bool keep_profiles = false;
  int basis_modes = 128;
  ShootOptions shoot;
};

// Pseudo-arclength continuation in (a, b, phi0) of the non-constant branch leaving the middle
// constant at origin_phi0, seeded by constant + eps * first radial Neumann mode. direction
// selects the monotone side: increasing (eps < 0) or decreasing.
Branch trace_branch(ModelSpec m, const Params& p, const Domain& dom, double origin_phi0, Monotonicity direction,
                    const StepPolicy& policy = {});

// Fill mass, energy, Lambda, mu1 for a converged profile.
void enrich_point(BranchPoint& pt, const RadialProfile& prof, ModelSpec m, const Params& p,
                  const SpectralBasis& basis);

struct TurningPoint {
  int index = 0;  // branch point closest to the turning point
  double phi0 = 0;
  double mass = 0;
};
std::vector<TurningPoint> turning_points(const Branch& br);

struct DiagramRow {
  ModelKind model = ModelKind::I;
  int dim = 1;
  double kappa = 0, delta = 0;
  double phi0 = 0, a = 0, mass = 0, mass_fraction = 0, energy = 0, lambda_var = 0, mu1 = 0;
  int branch_id = 0;  // 0 for constants, k >= 1 for the k-th branch
  std::string monotone_dir;
  bool stable_dyn = false, stable_var = false;
};

// One row per branch point, plus every constant solution at each phi0 of constant_grid.
std::vector<DiagramRow> export_diagram(const std::vector<Branch>& branches, const std::vector<double>& constant_grid,
                                       ModelSpec m, const Params& p, int dim);

}  // namespace crowd
