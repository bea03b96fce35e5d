#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "crowd/grid.hpp"
#include "crowd/model.hpp"
#include "crowd/shooting.hpp"

namespace crowd {

// cos(n pi r), n = 0..modes-1, with the radial measure sigma_d r^{d-1} dr.
// Integrals use 4-point Gauss-Legendre on every cell of the quadrature grid.
struct SpectralBasis {
  int dim = 1;
  int modes = 128;
  Eigen::VectorXd rq, wq;          // quadrature nodes and weights (measure included)
  Eigen::MatrixXd psi, dpsi, d2psi;  // rows: quadrature nodes, columns: modes
  Eigen::MatrixXd mass;            // Gram matrix
  Eigen::VectorXd means;           // int psi_n
  Eigen::MatrixXd zero_mean;       // modes x (modes-1): psi_j - (m_j/m_0) psi_0

  static SpectralBasis make(int dim, int modes = 128, int quad_cells = 1024);
};

// Smooth samples of a profile at the quadrature nodes: quintic Hermite in (phi, phi', phi''),
// with phi'' from the stationary equation at the grid nodes.
struct ProfileSamples {
  Eigen::VectorXd phi, dphi, d2phi;
};
ProfileSamples sample_profile(const RadialProfile& prof, const Params& p, ModelSpec m,
                              const SpectralBasis& basis);

// Weak form of the linearization, x = (alpha, beta) with u = zero_mean * alpha and v = psi * beta:
// B x' = A x.
struct HDOperator {
  Eigen::MatrixXd A, B;
  int nu = 0, nv = 0;
};
HDOperator assemble_HD(const RadialProfile& prof, const Params& p, ModelSpec m, const SpectralBasis& basis,
                       bool check_stationary = true);

// Model II in the variables (w, v) with u = rho(1-rho) w and int u = 0. H_D is self-adjoint for
// <.,.>, so -<q, H_D p> = 2 I_D(q, p) and the spectrum solves I x = mu S x with I = 2 I_D
// (positive definite away from kernels) and S the Gram matrix of <.,.>. No division by rho(1-rho).
struct HDPencil {
  Eigen::MatrixXd I, S;
  int nu = 0, nv = 0;
};
HDPencil assemble_HD_symmetric(const RadialProfile& prof, const Params& p, const SpectralBasis& basis,
                               bool check_stationary = true);
std::vector<std::complex<double>> pencil_eigenvalues(const HDPencil& pen);

struct StabilityReport {
  std::vector<std::complex<double>> eigenvalues;  // of -H_D on {int u = 0}, by real part
  double mu1 = 0;
  bool dynamically_stable = false;
  std::optional<double> self_adjoint_residual;
  std::optional<double> kernel_residual;
  bool indefinite_form = false;
  std::string method;  // "galerkin" or "symmetric"
  std::string diagnostic;
};

StabilityReport dynamical_spectrum(const RadialProfile& prof, const Params& p, ModelSpec m,
                                   const SpectralBasis& basis, bool check_stationary = true);

// Eigenvalues of the dense pencil -A x = mu B x, sorted.
std::vector<std::complex<double>> pencil_eigenvalues(const HDOperator& op);

// ||H_D (rho(1-rho) v, v)|| / ||(rho(1-rho) v, v)|| in the B norm; v given at the profile nodes.
double kernel_check(const RadialProfile& prof, const Params& p, ModelSpec m, const Eigen::VectorXd& v,
                    const SpectralBasis& basis);

struct SelfAdjointResult {
  double residual = 0;
  bool indefinite = false;
};
// Model II only. Random pairs (rho(1-rho) w, v) with w, v from the first `low_modes` modes and
// int u = 0; H_D applied pointwise and integrated by quadrature.
SelfAdjointResult selfadjoint_residual(const RadialProfile& prof, const Params& p, ModelSpec m,
                                       const SpectralBasis& basis, int pairs = 50, int low_modes = 16,
                                       unsigned seed = 7);

}  // namespace crowd
