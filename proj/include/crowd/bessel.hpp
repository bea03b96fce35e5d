#pragma once

#include "crowd/model.hpp"

namespace crowd {

double bessel_j0(double x);
double bessel_j1(double x);

// n-th positive zero of J1 (= n-th positive zero of J0', since J0' = -J1).
double bessel_j1_zero(int n);
// First positive zero of J1' = J0 - J1/x; the non-radial constant r1.
double bessel_j1prime_zero();

// Neumann Laplacian on the unit ball, radial modes: lambda_0 = 0.
double neumann_eigenvalue(const Domain& dom, int n);
// lambda_{1,0} = r1^2, first non-radial eigenvalue on the disk (reporting only).
double nonradial_eigenvalue();

}  // namespace crowd
