#pragma once

#include <array>
#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include "crowd/model.hpp"

namespace crowd {

// unique: no folds, so the lower/middle/upper distinction does not exist.
enum class ConstantBranch { lower, middle, upper, unique };
const char* to_string(ConstantBranch b);

struct ConstantSolution {
  double phi0 = 0;
  double phi = 0;
  double rho = 0;
  double mass = 0;
  ConstantBranch branch_label = ConstantBranch::unique;
  bool variationally_unstable = false;
  std::array<std::complex<double>, 2> mu_roots_n1{};
};

struct ConstantSet {
  std::vector<ConstantSolution> roots;  // sorted by phi
  bool degenerate = false;              // two roots within 1e-8 (phi0 at a fold)
};

struct FoldData {
  bool has_folds = false;
  double phi0_minus = 0;
  double phi0_plus = 0;
  std::pair<double, double> phi_at_folds{0, 0};  // f'(phi) = delta, phi_a < phi_b
  double M_minus = 0;
  double M_plus = 0;
};

struct InstabilityInterval {
  bool empty = true;
  double phi_lo = 0, phi_hi = 0;
  double mass_lo = 0, mass_hi = 0;
};

inline constexpr double kDegenerateTol = 1e-8;

ConstantSet constant_solutions(ModelSpec m, const Params& p, double phi0, const Domain& dom);
FoldData fold_points(ModelSpec m, const Params& p, const Domain& dom);
InstabilityInterval instability_interval(ModelSpec m, const Params& p, const Domain& dom);
double constant_for_mass(const Domain& dom, double M);
std::array<std::complex<double>, 2> constant_dispersion(ModelSpec m, const Params& p, const Domain& dom,
                                                        double rho, int n);

// Lowest real part of the constrained spectrum of -H_D at a constant: min over radial modes
// n = 1..n_max of the dispersion roots, and delta from the (0, 1) pair.
double constant_mu1(ModelSpec m, const Params& p, const Domain& dom, double phi, int n_max = 128);

// Two solutions of f'(phi) = level straddling the argmax of f', if level < max f'.
std::optional<std::pair<double, double>> fprime_level_set(ModelSpec m, double level);

// Extreme roots phi_-(phi0) <= phi_+(phi0): the a priori enclosure of all solutions.
std::pair<double, double> solution_enclosure(ModelSpec m, const Params& p, double phi0);
// Middle root, when three constants coexist.
std::optional<double> middle_constant(ModelSpec m, const Params& p, double phi0);

}  // namespace crowd
