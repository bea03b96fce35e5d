#pragma once

#include <Eigen/Dense>
#include <functional>

#include "crowd/model.hpp"
#include "crowd/shooting.hpp"

namespace oracle {

// Chebyshev collocation of -kappa Lap phi + delta(phi + phi0) = f(phi) with phi'(1) = 0, on the even
// extension to [-1, 1] so that r = 0 is never a node (regularity at the center for free).
struct Collocation {
  int n = 0;  // Chebyshev degree on [-1, 1] (odd)
  Eigen::VectorXd x, phi;  // all n+1 nodes, phi even
  bool converged = false;
  int iterations = 0;
  double residual = 0;

  double eval(double r) const;  // barycentric interpolation
};

Collocation collocate(crowd::ModelSpec m, const crowd::Params& p, double phi0, int dim,
                      const std::function<double(double)>& guess, int degree = 801);

// Lambda by a dense projected eigensolve of the finite-volume E_phi.
double dense_lambda(const crowd::RadialProfile& prof, const crowd::Params& p, crowd::ModelSpec m);
// 2 inf L_D with u eliminated, dense.
double dense_lambda1(const crowd::RadialProfile& prof, const crowd::Params& p, crowd::ModelSpec m);

// Dispersion matrix of the linearization at a constant for eigenvalue lambda of -Lap, roots by
// the quadratic formula, mu = -root (sorted by real part).
std::array<std::complex<double>, 2> dispersion(const crowd::Params& p, double lambda, double rho, double h);

}  // namespace oracle
