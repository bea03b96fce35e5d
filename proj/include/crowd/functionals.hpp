#pragma once

#include <Eigen/Dense>

#include "crowd/grid.hpp"
#include "crowd/model.hpp"
#include "crowd/shooting.hpp"

namespace crowd {

struct EnergyParts {
  double gradient = 0;     // int |phi'|^2
  double confinement = 0;  // int (phi + phi0)^2
  double potential = 0;    // int F(phi)
};

struct EnergyValue {
  double value = 0;
  EnergyParts parts;
};

// (u, v) perturbation pair on the profile grid.
struct PairField {
  Eigen::VectorXd u, v;
};

// Continuous functionals, Simpson quadrature with stored derivatives.
EnergyValue energy_E(ModelSpec m, const Params& p, double phi0, const RadialProfile& prof);

// phi0 with int 1/(1+e^{phi0-D}) = M. Weights default to Simpson on the grid.
double phi0_of_mass(const RadialGrid& g, const Eigen::VectorXd& D, double M);
double phi0_of_mass(const Eigen::VectorXd& weights, const Eigen::VectorXd& D, double M, double volume);

// D given as a profile: D.phi holds D values and D.dphi its derivative.
EnergyValue energy_FM(ModelSpec m, const Params& p, double M, const RadialProfile& D);

// Model II Lyapunov functional; dD is the radial derivative of D.
double lyapunov(const Params& p, const Eigen::VectorXd& rho, const Eigen::VectorXd& D,
                const Eigen::VectorXd& dD, const RadialGrid& g);

// Finite-volume versions used by the evolution module (gradient as a face sum).
double lyapunov_discrete(const Params& p, const Eigen::VectorXd& rho, const Eigen::VectorXd& D,
                         const RadialGrid& g);
double energy_proxy_discrete(ModelSpec m, const Params& p, const Eigen::VectorXd& D, double M,
                             const RadialGrid& g);

// -kappa Lap v + delta v - f'(phi) v, finite volumes with Neumann ends.
Eigen::VectorXd apply_Ephi(const RadialProfile& prof, const Params& p, ModelSpec m, const Eigen::VectorXd& v);

struct LambdaResult {
  double value = 0;
  Eigen::VectorXd minimizer;  // normalized, int v^2 = 1
  double multiplier = 0;      // E_phi v = value v + multiplier rho(1-rho)
};

// Smallest Rayleigh quotient of E_phi on {int v rho(1-rho) = 0}.
LambdaResult lambda_var(const RadialProfile& prof, const Params& p, ModelSpec m, bool want_vector = false);
// 2 inf L_D with u eliminated; Model II.
double lambda1(const RadialProfile& prof, const Params& p, ModelSpec m);

double constrained_rayleigh(const RadialProfile& prof, const Params& p, ModelSpec m, const Eigen::VectorXd& v);

double quad_LD(const RadialProfile& prof, const Params& p, const PairField& q);
double quad_ID(const RadialProfile& prof, const Params& p, const PairField& q);
double inner(const PairField& q1, const PairField& q2, const RadialProfile& prof, const Params& p);

// rho(1-rho) at the nodes, rejecting values below 1e-14.
Eigen::VectorXd mobility(const RadialProfile& prof);

}  // namespace crowd
