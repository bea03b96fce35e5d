#include "crowd/bessel.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace crowd {
namespace {

// Miller's backward recurrence, normalized by J0 + 2 sum J_{2k} = 1.
std::pair<double, double> bessel_j01(double x) {
  if (x == 0.0) return {1.0, 0.0};
  double ax = std::abs(x);
  int m = 2 * (static_cast<int>(ax + 25.0 + 4.0 * std::cbrt(ax)) / 2 + 1);
  double jp1 = 0.0, j = 1e-300, norm = 0.0, j0 = 0.0, j1 = 0.0;
  for (int k = m; k >= 1; --k) {
    double jm1 = 2.0 * k / ax * j - jp1;
    jp1 = j;
    j = jm1;
    if (k == 1) j1 = jp1;
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * j;
    if (std::abs(j) > 1e250) {
      j *= 1e-250;
      jp1 *= 1e-250;
      norm *= 1e-250;
      j1 *= 1e-250;
    }
  }
  j0 = j;
  norm += j0;
  j0 /= norm;
  j1 /= norm;
  if (x < 0) j1 = -j1;
  return {j0, j1};
}

template <class Fn>
double bisect(Fn&& fn, double lo, double hi) {
  double flo = fn(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    double fm = fn(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double bessel_j0(double x) { return bessel_j01(x).first; }
double bessel_j1(double x) { return bessel_j01(x).second; }

double bessel_j1_zero(int n) {
  if (n < 1) throw std::invalid_argument("bessel_j1_zero: n must be >= 1");
  if (n > 100000) throw std::invalid_argument("bessel_j1_zero: n too large");
  static std::mutex mu;
  static std::map<int, double> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
  }
  // McMahon's asymptotic guess is within 0.01 already at n=1
  double beta = (n + 0.25) * M_PI;
  double guess = beta - 3.0 / (8.0 * beta);
  double z = bisect(bessel_j1, guess - 0.4, guess + 0.4);
  std::lock_guard<std::mutex> lock(mu);
  cache[n] = z;
  return z;
}

double bessel_j1prime_zero() {
  static const double z = bisect([](double x) { return bessel_j0(x) - bessel_j1(x) / x; }, 1.5, 2.2);
  return z;
}

double neumann_eigenvalue(const Domain& dom, int n) {
  dom.validate();
  if (n < 0) throw std::invalid_argument("neumann_eigenvalue: n must be >= 0");
  if (n == 0) return 0.0;
  if (dom.dim == 1) return (n * M_PI) * (n * M_PI);
  double z = bessel_j1_zero(n);
  return z * z;
}

double nonradial_eigenvalue() {
  double z = bessel_j1prime_zero();
  return z * z;
}

}  // namespace crowd
