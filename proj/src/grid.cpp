#include "crowd/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crowd {

void RadialGrid::validate() const {
  if (dim != 1 && dim != 2) throw std::invalid_argument("grid dim must be 1 or 2");
  if (cells < 4 || cells % 2 != 0) throw std::invalid_argument("grid cells must be even and >= 4");
}

Eigen::VectorXd simpson_weights(const RadialGrid& g) {
  g.validate();
  const int n = g.nodes();
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    double c = (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    w[i] = c * g.h() / 3.0 * (g.dim == 2 ? g.r(i) : 1.0);
  }
  return w * g.domain().sigma();
}

Eigen::VectorXd fv_weights(const RadialGrid& g) {
  g.validate();
  const int n = g.nodes();
  const double h = g.h();
  Eigen::VectorXd w(n);
  if (g.dim == 1) {
    w.setConstant(h);
    w[0] = w[n - 1] = h / 2;
  } else {
    // int r dr over [r_i - h/2, r_i + h/2] clipped to [0,1]
    for (int i = 0; i < n; ++i) w[i] = g.r(i) * h;
    w[0] = h * h / 8;
    w[n - 1] = h / 2 - h * h / 8;
  }
  return w * g.domain().sigma();
}

Eigen::VectorXd fv_faces(const RadialGrid& g) {
  g.validate();
  Eigen::VectorXd t(g.cells);
  for (int i = 0; i < g.cells; ++i) {
    double rf = (i + 0.5) * g.h();
    t[i] = (g.dim == 2 ? rf : 1.0) / g.h();
  }
  return t * g.domain().sigma();
}

Eigen::VectorXd fv_stiffness_apply(const Eigen::VectorXd& t, const Eigen::VectorXd& v) {
  const Eigen::Index m = t.size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    double flux = t[i] * (v[i + 1] - v[i]);
    out[i] -= flux;
    out[i + 1] += flux;
  }
  return out;
}

double fv_dirichlet_form(const Eigen::VectorXd& t, const Eigen::VectorXd& v) {
  double s = 0;
  for (Eigen::Index i = 0; i < t.size(); ++i) s += t[i] * (v[i + 1] - v[i]) * (v[i + 1] - v[i]);
  return s;
}

HermiteSample hermite_eval(const RadialGrid& g, const Eigen::VectorXd& f, const Eigen::VectorXd& df,
                           double r) {
  const double h = g.h();
  int i = std::clamp(static_cast<int>(r / h), 0, g.cells - 1);
  double s = (r - i * h) / h;
  double s2 = s * s, s3 = s2 * s;
  double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  double d00 = (6 * s2 - 6 * s) / h, d10 = 3 * s2 - 4 * s + 1, d01 = (-6 * s2 + 6 * s) / h, d11 = 3 * s2 - 2 * s;
  return {h00 * f[i] + h10 * h * df[i] + h01 * f[i + 1] + h11 * h * df[i + 1],
          d00 * f[i] + d10 * df[i] + d01 * f[i + 1] + d11 * df[i + 1]};
}

Eigen::VectorXd fd_derivative(const RadialGrid& g, const Eigen::VectorXd& f) {
  const int N = g.cells;
  if (N < 6) throw std::invalid_argument("fd_derivative needs at least 6 cells");
  // 7-point weights for each position of the evaluation node inside the stencil
  Eigen::Matrix<double, 7, 7> W;
  for (int off = 0; off < 7; ++off) {
    Eigen::Matrix<double, 7, 7> V;
    Eigen::Matrix<double, 7, 1> rhs = Eigen::Matrix<double, 7, 1>::Zero();
    for (int k = 0; k < 7; ++k)
      for (int j = 0; j < 7; ++j) V(k, j) = std::pow(static_cast<double>(j - off), k);
    rhs[1] = 1;
    W.col(off) = V.fullPivLu().solve(rhs);
  }
  Eigen::VectorXd out(N + 1);
  for (int i = 0; i <= N; ++i) {
    int s0 = std::clamp(i - 3, 0, N - 6);
    double dd = 0;
    for (int j = 0; j < 7; ++j) dd += W(j, i - s0) * f[s0 + j];
    out[i] = dd / g.h();
  }
  return out;
}

}  // namespace crowd
