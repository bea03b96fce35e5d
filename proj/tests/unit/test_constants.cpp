#include <doctest.h>

#include <cmath>

#include "crowd/bessel.hpp"
#include "crowd/constants.hpp"
#include "oracles/oracles.hpp"

using namespace crowd;

namespace {
const ModelSpec kI{ModelKind::I}, kII{ModelKind::II};
}

TEST_CASE("number of constants") {
  Params p = default_params(kI);
  auto fd = fold_points(kI, p, Domain{1});
  REQUIRE(fd.has_folds);
  CHECK(fd.phi0_minus < fd.phi0_plus);
  double mid = 0.5 * (fd.phi0_minus + fd.phi0_plus);
  auto cs = constant_solutions(kI, p, mid, Domain{1});
  REQUIRE(cs.roots.size() == 3);
  CHECK(cs.roots[0].branch_label == ConstantBranch::lower);
  CHECK(cs.roots[1].branch_label == ConstantBranch::middle);
  CHECK(cs.roots[2].branch_label == ConstantBranch::upper);
  for (const auto& r : cs.roots) CHECK(k_of(kI, p, r.phi) == doctest::Approx(mid).epsilon(1e-12));
  CHECK(constant_solutions(kI, p, 0.5 * fd.phi0_minus, Domain{1}).roots.size() == 1);
  CHECK(constant_solutions(kI, p, 2 * fd.phi0_plus, Domain{1}).roots.size() == 1);

  // delta at or above max f' removes the folds
  Params big{5e-4, 1 / (6 * std::sqrt(3.0))};
  CHECK_FALSE(fold_points(kI, big, Domain{1}).has_folds);
  for (double phi0 : {-5.0, 0.0, 3.0, 40.0}) CHECK(constant_solutions(kI, big, phi0, Domain{1}).roots.size() == 1);
  Params p2{1e-2, 0.3};
  CHECK_FALSE(fold_points(kII, p2, Domain{1}).has_folds);
  CHECK(constant_solutions(kII, p2, 1.0, Domain{1}).roots.front().branch_label == ConstantBranch::unique);
}

TEST_CASE("folds are degenerate and masses sit inside (0, |Omega|)") {
  for (auto m : {kI, kII}) {
    Params p = default_params(m);
    for (int d : {1, 2}) {
      Domain dom{d};
      auto fd = fold_points(m, p, dom);
      REQUIRE(fd.has_folds);
      // Model II: the lower root at phi0+ is near -990 and its mass underflows
      CHECK(fd.M_minus >= 0);
      CHECK(fd.M_minus < fd.M_plus);
      CHECK(fd.M_plus <= dom.volume());
      CHECK(eval_fprime(m, fd.phi_at_folds.first) == doctest::Approx(p.delta).epsilon(1e-10));
      CHECK(eval_fprime(m, fd.phi_at_folds.second) == doctest::Approx(p.delta).epsilon(1e-10));
      auto at_minus = constant_solutions(m, p, fd.phi0_minus, dom);
      auto at_plus = constant_solutions(m, p, fd.phi0_plus, dom);
      CHECK(at_minus.degenerate);
      CHECK(at_plus.degenerate);
      CHECK(at_minus.roots.size() >= 2);
    }
  }
}

TEST_CASE("instability interval endpoints") {
  for (auto m : {kI, kII}) {
    Params p = default_params(m);
    for (int d : {1, 2}) {
      Domain dom{d};
      auto ii = instability_interval(m, p, dom);
      REQUIRE_FALSE(ii.empty);
      double level = p.kappa * neumann_eigenvalue(dom, 1) + p.delta;
      CHECK(eval_fprime(m, ii.phi_lo) == doctest::Approx(level).epsilon(1e-10));
      CHECK(eval_fprime(m, ii.phi_hi) == doctest::Approx(level).epsilon(1e-10));
      CHECK(ii.mass_lo < ii.mass_hi);
      // variational instability of a constant is exactly membership in the interval
      auto fd = fold_points(m, p, dom);
      for (int i = 0; i <= 200; ++i) {
        double phi0 = fd.phi0_minus + (fd.phi0_plus - fd.phi0_minus) * i / 200.0;
        for (const auto& r : constant_solutions(m, p, phi0, dom).roots) {
          bool inside = r.phi > ii.phi_lo && r.phi < ii.phi_hi;
          if (std::min(std::abs(r.phi - ii.phi_lo), std::abs(r.phi - ii.phi_hi)) > 1e-9)
            CHECK(r.variationally_unstable == inside);
        }
      }
    }
  }
  Params stiff{1.0, 1e-3};
  CHECK(instability_interval(kI, stiff, Domain{1}).empty);
}

TEST_CASE("constant for a prescribed mass") {
  CHECK(constant_for_mass(Domain{1}, 0.5) == doctest::Approx(0.0).scale(1e-15));
  CHECK(constant_for_mass(Domain{1}, 0.75) == doctest::Approx(std::log(3.0)));
  CHECK(constant_for_mass(Domain{2}, M_PI / 4) == doctest::Approx(-std::log(3.0)));
  CHECK_THROWS(constant_for_mass(Domain{1}, 1.0));
  CHECK_THROWS(constant_for_mass(Domain{1}, 0.0));
  for (double M : {0.01, 0.3, 0.99}) {
    double phi = constant_for_mass(Domain{1}, M);
    CHECK(rho_of_phi(phi) == doctest::Approx(M).epsilon(1e-13));
  }
}

TEST_CASE("dispersion relation") {
  Params p = default_params(kI);
  Domain dom{1};
  for (double rho : {0.05, 0.2, 0.5, 0.8}) {
    for (int n : {1, 2, 5}) {
      double lam = neumann_eigenvalue(dom, n);
      auto mu = constant_dispersion(kI, p, dom, rho, n);
      double fp = rho * (1 - rho) * (1 - 2 * rho);
      // Vieta: sum and product of the roots
      CHECK((mu[0] + mu[1]).real() == doctest::Approx((p.kappa + 1) * lam + p.delta).epsilon(1e-12));
      CHECK((mu[0] * mu[1]).real() ==
            doctest::Approx(lam * (p.kappa * lam + p.delta - fp)).epsilon(1e-10).scale(1e-14));
      auto o = oracle::dispersion(p, lam, rho, 1 - 2 * rho);
      CHECK(std::abs(mu[0] - o[0]) < 1e-10 * std::abs(o[1]));
      CHECK(std::abs(mu[1] - o[1]) < 1e-10 * std::abs(o[1]));
    }
    auto m0 = constant_dispersion(kI, p, dom, rho, 0);
    CHECK(std::abs(m0[0]) < 1e-15);
    CHECK(m0[1].real() == doctest::Approx(p.delta));
  }
  // Model II at rho = 1/2, n = 1: f' = 1/4
  Params q = default_params(kII);
  double lam = M_PI * M_PI;
  auto mu = constant_dispersion(kII, q, dom, 0.5, 1);
  double B = (q.kappa + 1) * lam + q.delta, C = lam * (q.kappa * lam + q.delta - 0.25);
  CHECK(mu[0].real() == doctest::Approx(0.5 * (B - std::sqrt(B * B - 4 * C))).epsilon(1e-10));
  CHECK_THROWS(constant_dispersion(kII, q, dom, 1.0, 1));
}

TEST_CASE("constant mu1 follows the sign of the instability criterion") {
  for (auto m : {kI, kII}) {
    Params p = default_params(m);
    Domain dom{1};
    auto ii = instability_interval(m, p, dom);
    double mid = 0.5 * (ii.phi_lo + ii.phi_hi);
    CHECK(constant_mu1(m, p, dom, mid) < 0);
    CHECK(constant_mu1(m, p, dom, ii.phi_hi + 1) > 0);
    CHECK(constant_mu1(m, p, dom, ii.phi_lo - 1) > 0);
    CHECK(constant_mu1(m, p, dom, -40.0) <= p.delta);
  }
}

TEST_CASE("extreme roots decrease in phi0 and the middle root increases") {
  for (auto m : {kI, kII}) {
    Params p = default_params(m);
    auto fd = fold_points(m, p, Domain{1});
    double prev_lo = INFINITY, prev_hi = INFINITY, prev_mid = -INFINITY;
    for (int i = 1; i < 100; ++i) {
      double phi0 = fd.phi0_minus + (fd.phi0_plus - fd.phi0_minus) * i / 100.0;
      auto [lo, hi] = solution_enclosure(m, p, phi0);
      auto mid = middle_constant(m, p, phi0);
      REQUIRE(mid);
      CHECK(lo < *mid);
      CHECK(*mid < hi);
      CHECK(lo < prev_lo);
      CHECK(hi < prev_hi);
      CHECK(*mid > prev_mid);
      prev_lo = lo;
      prev_hi = hi;
      prev_mid = *mid;
    }
    CHECK_FALSE(middle_constant(m, p, 2 * fd.phi0_plus));
  }
}
