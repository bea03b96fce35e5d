#pragma once

#include <Eigen/Dense>

#include "crowd/model.hpp"

namespace crowd {

// Uniform grid r_i = i/N on [0,1], shared by profiles, finite volumes and evolution.
struct RadialGrid {
  int dim = 1;
  int cells = 1024;

  int nodes() const { return cells + 1; }
  double h() const { return 1.0 / cells; }
  double r(int i) const { return static_cast<double>(i) / cells; }
  Domain domain() const { return Domain{dim}; }
  Eigen::VectorXd radii() const { return Eigen::VectorXd::LinSpaced(nodes(), 0.0, 1.0); }
  void validate() const;
};

// Composite Simpson weights including the measure sigma_d r^{d-1}; requires even cells.
Eigen::VectorXd simpson_weights(const RadialGrid& g);

// Vertex-centered finite volumes: measure of the control volume around each node.
Eigen::VectorXd fv_weights(const RadialGrid& g);
// Face transmissibilities sigma_d r_{i+1/2}^{d-1} / h, one per cell.
Eigen::VectorXd fv_faces(const RadialGrid& g);

// K v with v^T K v = sum_i t_i (v_{i+1} - v_i)^2 (Neumann stiffness).
Eigen::VectorXd fv_stiffness_apply(const Eigen::VectorXd& t, const Eigen::VectorXd& v);
double fv_dirichlet_form(const Eigen::VectorXd& t, const Eigen::VectorXd& v);

// Cubic Hermite interpolation from nodal values and derivatives.
struct HermiteSample {
  double value;
  double slope;
};
HermiteSample hermite_eval(const RadialGrid& g, const Eigen::VectorXd& f, const Eigen::VectorXd& df,
                           double r);

// d/dr of nodal values by 7-point (6th order) differences, one-sided near the ends.
Eigen::VectorXd fd_derivative(const RadialGrid& g, const Eigen::VectorXd& f);

}  // namespace crowd
