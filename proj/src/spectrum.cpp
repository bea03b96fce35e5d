#include "crowd/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>


namespace crowd {
namespace {

constexpr double kGaussX[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                               0.8611363115940526};
constexpr double kGaussW[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                               0.3478548451374538};

// Quintic Hermite basis on [0,1]: value, first and second derivative in t.
struct Quintic {
  double v[6], d1[6], d2[6];
};

Quintic quintic(double t) {
  static constexpr double C[6][6] = {
      {1, 0, 0, -10, 15, -6},      // f0
      {0, 1, 0, -6, 8, -3},        // h f0'
      {0, 0, 0.5, -1.5, 1.5, -0.5},  // h^2 f0''
      {0, 0, 0, 10, -15, 6},       // f1
      {0, 0, 0, -4, 7, -3},        // h f1'
      {0, 0, 0, 0.5, -1, 0.5},     // h^2 f1''
  };
  Quintic q{};
  for (int b = 0; b < 6; ++b) {
    double p = 0, dp = 0, ddp = 0;
    for (int k = 5; k >= 0; --k) p = p * t + C[b][k];
    for (int k = 5; k >= 1; --k) dp = dp * t + k * C[b][k];
    for (int k = 5; k >= 2; --k) ddp = ddp * t + k * (k - 1) * C[b][k];
    q.v[b] = p;
    q.d1[b] = dp;
    q.d2[b] = ddp;
  }
  return q;
}

Eigen::VectorXd nodal_second_derivative(const RadialProfile& prof, const Params& p, ModelSpec m) {
  Eigen::VectorXd out(prof.phi.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    double lap = (p.delta * (prof.phi[i] + prof.phi0) - eval_f(m, prof.phi[i])) / p.kappa;
    if (prof.dim == 1) out[i] = lap;
    else out[i] = i == 0 ? 0.5 * lap : lap - prof.dphi[i] / prof.r[i];
  }
  return out;
}

// W-weighted Gram product X^T diag(w) Y.
Eigen::MatrixXd gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& w, const Eigen::MatrixXd& Y) {
  return X.transpose() * (w.asDiagonal() * Y);
}

double one_minus_two_rho(double phi) { return std::tanh(-0.5 * phi); }

void check_inputs(const RadialProfile& prof, const Params& p, ModelSpec m, const SpectralBasis& basis,
                  bool check_stationary) {
  p.validate();
  if (basis.dim != prof.dim) throw std::invalid_argument("basis and profile dimensions differ");
  if (!prof.phi.allFinite() || !prof.dphi.allFinite()) throw std::invalid_argument("profile is not finite");
  if (check_stationary) {
    double res = bvp_residual(m, p, prof);
    if (!(res <= 1e-6))
      throw std::invalid_argument("profile is not stationary (residual " + std::to_string(res) + ")");
  }
}

// Laplacian of the modes at the quadrature nodes.
Eigen::MatrixXd mode_laplacian(const SpectralBasis& b) {
  if (b.dim == 1) return b.d2psi;
  return b.d2psi + b.rq.cwiseInverse().asDiagonal() * b.dpsi;
}

std::vector<std::complex<double>> sorted(std::vector<std::complex<double>> ev) {
  std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return std::abs(a.imag()) < std::abs(b.imag());
  });
  return ev;
}

}  // namespace

SpectralBasis SpectralBasis::make(int dim, int modes, int quad_cells) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("basis dim must be 1 or 2");
  if (modes < 2) throw std::invalid_argument("basis needs at least 2 modes");
  if (quad_cells < 1) throw std::invalid_argument("quad_cells must be positive");
  SpectralBasis b;
  b.dim = dim;
  b.modes = modes;
  const int Q = 4 * quad_cells;
  const double h = 1.0 / quad_cells, sig = Domain{dim}.sigma();
  b.rq.resize(Q);
  b.wq.resize(Q);
  for (int c = 0; c < quad_cells; ++c)
    for (int k = 0; k < 4; ++k) {
      double r = (c + 0.5 * (1 + kGaussX[k])) * h;
      b.rq[4 * c + k] = r;
      b.wq[4 * c + k] = 0.5 * h * kGaussW[k] * sig * (dim == 2 ? r : 1.0);
    }
  b.psi.resize(Q, modes);
  b.dpsi.resize(Q, modes);
  b.d2psi.resize(Q, modes);
  for (int n = 0; n < modes; ++n) {
    double k = n * M_PI;
    for (int q = 0; q < Q; ++q) {
      double c = std::cos(k * b.rq[q]), s = std::sin(k * b.rq[q]);
      b.psi(q, n) = c;
      b.dpsi(q, n) = -k * s;
      b.d2psi(q, n) = -k * k * c;
    }
  }
  b.mass = gram(b.psi, b.wq, b.psi);
  b.means = b.psi.transpose() * b.wq;
  b.zero_mean = Eigen::MatrixXd::Zero(modes, modes - 1);
  for (int j = 1; j < modes; ++j) {
    b.zero_mean(j, j - 1) = 1;
    b.zero_mean(0, j - 1) = -b.means[j] / b.means[0];
  }
  return b;
}

ProfileSamples sample_profile(const RadialProfile& prof, const Params& p, ModelSpec m,
                              const SpectralBasis& basis) {
  const RadialGrid& g = prof.grid;
  const double h = g.h();
  Eigen::VectorXd d2 = nodal_second_derivative(prof, p, m);
  const Eigen::Index Q = basis.rq.size();
  ProfileSamples s{Eigen::VectorXd(Q), Eigen::VectorXd(Q), Eigen::VectorXd(Q)};
  for (Eigen::Index q = 0; q < Q; ++q) {
    double r = basis.rq[q];
    int i = std::clamp(static_cast<int>(r / h), 0, g.cells - 1);
    Quintic b = quintic((r - i * h) / h);
    double nodal[6] = {prof.phi[i],     h * prof.dphi[i],     h * h * d2[i],
                       prof.phi[i + 1], h * prof.dphi[i + 1], h * h * d2[i + 1]};
    double v = 0, d1 = 0, dd = 0;
    for (int k = 0; k < 6; ++k) {
      v += b.v[k] * nodal[k];
      d1 += b.d1[k] * nodal[k];
      dd += b.d2[k] * nodal[k];
    }
    s.phi[q] = v;
    s.dphi[q] = d1 / h;
    s.d2phi[q] = dd / (h * h);
  }
  return s;
}

HDOperator assemble_HD(const RadialProfile& prof, const Params& p, ModelSpec m, const SpectralBasis& basis,
                       bool check_stationary) {
  check_inputs(prof, p, m, basis, check_stationary);
  ProfileSamples s = sample_profile(prof, p, m, basis);
  const Eigen::Index Q = basis.rq.size();
  Eigen::VectorXd wc(Q), wdrift(Q), wh(Q);
  for (Eigen::Index q = 0; q < Q; ++q) {
    double phi = s.phi[q];
    wc[q] = basis.wq[q] * rho_one_minus_rho(phi);
    wdrift[q] = basis.wq[q] * one_minus_two_rho(phi) * s.dphi[q];
    wh[q] = basis.wq[q] * h_of_rho(m, rho_of_phi(phi));
  }
  const Eigen::MatrixXd& Psi = basis.psi;
  const Eigen::MatrixXd& dPsi = basis.dpsi;
  Eigen::MatrixXd K = gram(dPsi, basis.wq, dPsi);
  // A_uu(i,j) = -int psi_i' psi_j' + int (1-2rho) phi' psi_j psi_i'
  Eigen::MatrixXd Auu = -K + dPsi.transpose() * (wdrift.asDiagonal() * Psi);
  Eigen::MatrixXd Auv = dPsi.transpose() * (wc.asDiagonal() * dPsi);
  Eigen::MatrixXd Avu = Psi.transpose() * (wh.asDiagonal() * Psi);
  Eigen::MatrixXd Avv = -p.kappa * K - p.delta * basis.mass;

  const Eigen::MatrixXd& P = basis.zero_mean;
  HDOperator op;
  op.nu = static_cast<int>(P.cols());
  op.nv = basis.modes;
  const int n = op.nu + op.nv;
  op.A.resize(n, n);
  op.B = Eigen::MatrixXd::Zero(n, n);
  op.A.topLeftCorner(op.nu, op.nu) = P.transpose() * Auu * P;
  op.A.topRightCorner(op.nu, op.nv) = P.transpose() * Auv;
  op.A.bottomLeftCorner(op.nv, op.nu) = Avu * P;
  op.A.bottomRightCorner(op.nv, op.nv) = Avv;
  op.B.topLeftCorner(op.nu, op.nu) = P.transpose() * basis.mass * P;
  op.B.bottomRightCorner(op.nv, op.nv) = basis.mass;
  return op;
}

std::vector<std::complex<double>> pencil_eigenvalues(const HDOperator& op) {
  Eigen::LLT<Eigen::MatrixXd> llt(op.B);
  if (llt.info() != Eigen::Success) throw std::runtime_error("mass matrix is not positive definite");
  Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd C = -op.A;
  C = L.triangularView<Eigen::Lower>().solve(C);
  C = L.triangularView<Eigen::Lower>().solve(C.transpose()).transpose();
  Eigen::EigenSolver<Eigen::MatrixXd> es(C, false);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver did not converge");
  std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  for (const auto& z : ev)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw std::runtime_error("eigensolver returned non-finite values");
  return sorted(std::move(ev));
}

HDPencil assemble_HD_symmetric(const RadialProfile& prof, const Params& p, const SpectralBasis& basis,
                               bool check_stationary) {
  const ModelSpec m{ModelKind::II};
  check_inputs(prof, p, m, basis, check_stationary);
  ProfileSamples s = sample_profile(prof, p, m, basis);
  const Eigen::Index Q = basis.rq.size();
  const int nb = basis.modes;
  Eigen::VectorXd c(Q);
  for (Eigen::Index q = 0; q < Q; ++q) c[q] = rho_one_minus_rho(s.phi[q]);
  Eigen::VectorXd wc = basis.wq.cwiseProduct(c);

  // int u = int c w = 0
  Eigen::VectorXd cm = basis.psi.transpose() * wc;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(nb, nb - 1);
  for (int j = 1; j < nb; ++j) {
    P(j, j - 1) = 1;
    P(0, j - 1) = -cm[j] / cm[0];
  }
  const Eigen::MatrixXd& Psi = basis.psi;
  Eigen::MatrixXd Mc = gram(Psi, wc, Psi);
  Eigen::MatrixXd Kc = gram(basis.dpsi, wc, basis.dpsi);
  Eigen::MatrixXd K = gram(basis.dpsi, basis.wq, basis.dpsi);
  // z = -kappa Lap v + delta v - c w
  Eigen::MatrixXd Zv = -p.kappa * mode_laplacian(basis) + p.delta * Psi;
  Eigen::MatrixXd Zu = -(c.asDiagonal() * Psi);

  HDPencil pen;
  pen.nu = nb - 1;
  pen.nv = nb;
  const int n = pen.nu + pen.nv;
  pen.I.resize(n, n);
  pen.S.resize(n, n);
  Eigen::MatrixXd Iuv = P.transpose() * (-Kc + gram(Zu, basis.wq, Zv));
  pen.I.topLeftCorner(pen.nu, pen.nu) = P.transpose() * (Kc + gram(Zu, basis.wq, Zu)) * P;
  pen.I.topRightCorner(pen.nu, pen.nv) = Iuv;
  pen.I.bottomLeftCorner(pen.nv, pen.nu) = Iuv.transpose();
  pen.I.bottomRightCorner(pen.nv, pen.nv) = Kc + gram(Zv, basis.wq, Zv);
  Eigen::MatrixXd Suv = -P.transpose() * Mc;
  pen.S.topLeftCorner(pen.nu, pen.nu) = P.transpose() * Mc * P;
  pen.S.topRightCorner(pen.nu, pen.nv) = Suv;
  pen.S.bottomLeftCorner(pen.nv, pen.nu) = Suv.transpose();
  pen.S.bottomRightCorner(pen.nv, pen.nv) = p.delta * basis.mass + p.kappa * K;
  return pen;
}

std::vector<std::complex<double>> pencil_eigenvalues(const HDPencil& pen) {
  // S x = theta I x with theta = 1/mu; I is the definite matrix
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(pen.S, pen.I, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("dissipation matrix is not positive definite");
  std::vector<std::complex<double>> ev;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    double th = es.eigenvalues()[i];
    if (th == 0) continue;  // infinite mu
    ev.emplace_back(1.0 / th, 0.0);
  }
  return sorted(std::move(ev));
}

StabilityReport dynamical_spectrum(const RadialProfile& prof, const Params& p, ModelSpec m,
                                   const SpectralBasis& basis, bool check_stationary) {
  StabilityReport rep;
  HDOperator op = assemble_HD(prof, p, m, basis, check_stationary);
  rep.method = "galerkin";
  rep.eigenvalues = pencil_eigenvalues(op);
  if (m.kind == ModelKind::II) {
    // The symmetric pencil gives an exactly real spectrum but represents u/rho(1-rho), which the
    // cosines resolve poorly on steep profiles; keep it only when it agrees with the plain pencil.
    try {
      auto sym = pencil_eigenvalues(assemble_HD_symmetric(prof, p, basis, false));
      double a = rep.eigenvalues.front().real(), b = sym.front().real();
      if (std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(a))) {
        rep.method = "symmetric";
        rep.eigenvalues = std::move(sym);
      } else {
        rep.diagnostic = "symmetric pencil unresolved (mu1 " + std::to_string(b) + "), kept galerkin";
      }
    } catch (const std::runtime_error& e) {
      rep.diagnostic = std::string("symmetric pencil failed: ") + e.what();
    }
  }
  if (rep.eigenvalues.empty()) throw std::runtime_error("no eigenvalues");
  rep.mu1 = rep.eigenvalues.front().real();
  rep.dynamically_stable = rep.mu1 > 0;
  if (m.kind == ModelKind::II) {
    SelfAdjointResult sa = selfadjoint_residual(prof, p, m, basis);
    rep.self_adjoint_residual = sa.residual;
    rep.indefinite_form = sa.indefinite;
  }
  return rep;
}

double kernel_check(const RadialProfile& prof, const Params& p, ModelSpec m, const Eigen::VectorXd& v,
                    const SpectralBasis& basis) {
  if (v.size() != prof.phi.size()) throw std::invalid_argument("kernel_check: v must live on the profile grid");
  if (v.cwiseAbs().maxCoeff() == 0) throw std::invalid_argument("kernel_check: v is zero");
  HDOperator op = assemble_HD(prof, p, m, basis, false);
  ProfileSamples s = sample_profile(prof, p, m, basis);
  Eigen::VectorXd dv = fd_derivative(prof.grid, v);
  const Eigen::Index Q = basis.rq.size();
  Eigen::VectorXd uq(Q), vq(Q);
  for (Eigen::Index q = 0; q < Q; ++q) {
    vq[q] = hermite_eval(prof.grid, v, dv, basis.rq[q]).value;
    uq[q] = rho_one_minus_rho(s.phi[q]) * vq[q];
  }
  const Eigen::MatrixXd& P = basis.zero_mean;
  Eigen::VectorXd x(op.nu + op.nv);
  Eigen::VectorXd bu = P.transpose() * (basis.psi.transpose() * (basis.wq.asDiagonal() * uq));
  Eigen::VectorXd bv = basis.psi.transpose() * (basis.wq.asDiagonal() * vq);
  x.head(op.nu) = op.B.topLeftCorner(op.nu, op.nu).llt().solve(bu);
  x.tail(op.nv) = basis.mass.llt().solve(bv);
  Eigen::VectorXd y = op.B.llt().solve(op.A * x);
  return std::sqrt(y.dot(op.B * y) / x.dot(op.B * x));
}

SelfAdjointResult selfadjoint_residual(const RadialProfile& prof, const Params& p, ModelSpec m,
                                       const SpectralBasis& basis, int pairs, int low_modes, unsigned seed) {
  if (m.kind != ModelKind::II) throw std::invalid_argument("selfadjoint_residual: Model II only");
  if (basis.dim != prof.dim) throw std::invalid_argument("basis and profile dimensions differ");
  low_modes = std::min(low_modes, basis.modes);
  ProfileSamples s = sample_profile(prof, p, m, basis);
  const Eigen::Index Q = basis.rq.size();
  const double d1 = prof.dim - 1.0;
  Eigen::VectorXd c(Q), l(Q);
  for (Eigen::Index q = 0; q < Q; ++q) {
    c[q] = rho_one_minus_rho(s.phi[q]);
    l[q] = one_minus_two_rho(s.phi[q]) * s.dphi[q];  // c'/c
  }
  Eigen::VectorXd cm = basis.psi.transpose() * basis.wq.cwiseProduct(c);
  Eigen::MatrixXd lap = mode_laplacian(basis);

  // u = c w; values of w, v and their derivatives at the quadrature nodes
  struct Pair {
    Eigen::VectorXd w, dw, d2w, v, dv, d2v, lapv;
  };
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  auto make_pair = [&]() {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(basis.modes), b = Eigen::VectorXd::Zero(basis.modes);
    for (int j = 1; j < low_modes; ++j) a[j] = U(rng);
    for (int j = 0; j < low_modes; ++j) b[j] = U(rng);
    a[0] = -a.tail(basis.modes - 1).dot(cm.tail(basis.modes - 1)) / cm[0];
    return Pair{basis.psi * a, basis.dpsi * a, basis.d2psi * a, basis.psi * b, basis.dpsi * b, basis.d2psi * b,
                lap * b};
  };
  // H_1 = div(c grad(w - v)), H_2 = kappa Lap v - delta v + c w
  auto H1 = [&](const Pair& x) {
    Eigen::VectorXd out(Q);
    for (Eigen::Index q = 0; q < Q; ++q) {
      double g1 = x.dw[q] - x.dv[q], g2 = x.d2w[q] - x.d2v[q];
      out[q] = c[q] * (g2 + l[q] * g1 + d1 * g1 / basis.rq[q]);
    }
    return out;
  };
  auto H2 = [&](const Pair& x) {
    return Eigen::VectorXd(p.kappa * x.lapv - p.delta * x.v + c.cwiseProduct(x.w));
  };
  auto form = [&](const Pair& x) {
    Eigen::ArrayXd cw = c.array() * x.w.array();
    return (basis.wq.array() * (cw * x.w.array() - 2 * cw * x.v.array() + p.delta * x.v.array().square() +
                                p.kappa * x.dv.array().square()))
        .sum();
  };
  // <p1, q> = int q_u (u1/c - v1) + int q_v (-kappa Lap v1 + delta v1 - u1)
  auto pairing = [&](const Pair& x, const Eigen::VectorXd& qu, const Eigen::VectorXd& qv) {
    return (basis.wq.array() * (qu.array() * (x.w - x.v).array() - qv.array() * H2(x).array())).sum();
  };

  SelfAdjointResult res;
  for (int k = 0; k < pairs; ++k) {
    Pair a = make_pair(), b = make_pair();
    double na = form(a), nb = form(b);
    if (na < 0 || nb < 0) res.indefinite = true;
    double asym = pairing(a, H1(b), H2(b)) - pairing(b, H1(a), H2(a));
    res.residual = std::max(res.residual, std::abs(asym) / std::sqrt(std::abs(na) * std::abs(nb)));
  }
  return res;
}

}  // namespace crowd
