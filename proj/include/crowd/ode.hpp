#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace crowd {

enum class OdeStatus { ok, stopped, step_underflow, too_many_steps, non_finite };

// Dormand-Prince 5(4) with elementary step control. Integrates in either direction.
// The last accepted step size is kept between calls so consecutive node-to-node
// integrations do not restart from scratch.
template <class Scalar, int N>
class Dopri5 {
 public:
  using State = Eigen::Matrix<Scalar, N, 1>;

  Scalar rtol = Scalar(1e-10);
  Scalar atol = Scalar(1e-12);
  long max_steps = 200000;
  long steps_taken = 0;

  // obs(t, y) is called after each accepted step; returning false stops the integration.
  template <class Rhs, class Observer>
  OdeStatus integrate(Rhs&& f, Scalar t0, Scalar t1, State& y, Observer&& obs) {
    using std::abs;
    const Scalar span = t1 - t0;
    if (span == Scalar(0)) return OdeStatus::ok;
    const Scalar dir = span > 0 ? Scalar(1) : Scalar(-1);
    Scalar t = t0;
    Scalar h = h_ > Scalar(0) ? std::min(h_, abs(span)) : std::min(abs(span), Scalar(1e-3));
    const Scalar hmin = Scalar(16) * std::numeric_limits<Scalar>::epsilon() * std::max(abs(t0), abs(t1));
    State k1 = f(t, y), k2, k3, k4, k5, k6, k7, ynew, err;
    bool last_rejected = false;
    while (dir * (t1 - t) > Scalar(0)) {
      if (++steps_taken > max_steps) return OdeStatus::too_many_steps;
      bool final_step = false;
      const Scalar hp = h;
      if (h >= abs(t1 - t)) {
        h = abs(t1 - t);
        final_step = true;
      }
      const Scalar s = dir * h;
      k2 = f(t + s * c2, y + s * (a21 * k1));
      k3 = f(t + s * c3, y + s * (a31 * k1 + a32 * k2));
      k4 = f(t + s * c4, y + s * (a41 * k1 + a42 * k2 + a43 * k3));
      k5 = f(t + s * c5, y + s * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      k6 = f(t + s, y + s * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      ynew = y + s * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7 = f(t + s, ynew);
      err = s * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      if (!ynew.allFinite() || !k7.allFinite()) {
        h *= Scalar(0.25);
        if (h < hmin) return OdeStatus::non_finite;
        last_rejected = true;
        continue;
      }
      Scalar en = 0;
      for (int i = 0; i < y.size(); ++i) {
        Scalar sc = atol + rtol * std::max(abs(y[i]), abs(ynew[i]));
        en += (err[i] / sc) * (err[i] / sc);
      }
      en = std::sqrt(en / Scalar(y.size()));
      if (en <= Scalar(1)) {
        t = final_step ? t1 : t + s;
        y = ynew;
        k1 = k7;
        Scalar fac = en == Scalar(0) ? Scalar(5) : Scalar(0.9) * std::pow(en, Scalar(-0.2));
        fac = std::clamp(fac, Scalar(0.2), last_rejected ? Scalar(1) : Scalar(5));
        h = h * fac;
        h_ = final_step ? std::max(hp, h) : h;
        last_rejected = false;
        if (!obs(t, y)) return OdeStatus::stopped;
      } else {
        h *= std::max(Scalar(0.2), Scalar(0.9) * std::pow(en, Scalar(-0.2)));
        last_rejected = true;
        h_ = h;
        if (h < hmin) return OdeStatus::step_underflow;
      }
    }
    return OdeStatus::ok;
  }

  template <class Rhs>
  OdeStatus integrate(Rhs&& f, Scalar t0, Scalar t1, State& y) {
    return integrate(f, t0, t1, y, [](Scalar, const State&) { return true; });
  }

  void reset_step(Scalar h = Scalar(0)) { h_ = h; }

 private:
  Scalar h_ = Scalar(0);

  static constexpr Scalar c2 = Scalar(1) / 5, c3 = Scalar(3) / 10, c4 = Scalar(4) / 5, c5 = Scalar(8) / 9;
  static constexpr Scalar a21 = Scalar(1) / 5;
  static constexpr Scalar a31 = Scalar(3) / 40, a32 = Scalar(9) / 40;
  static constexpr Scalar a41 = Scalar(44) / 45, a42 = Scalar(-56) / 15, a43 = Scalar(32) / 9;
  static constexpr Scalar a51 = Scalar(19372) / 6561, a52 = Scalar(-25360) / 2187,
                          a53 = Scalar(64448) / 6561, a54 = Scalar(-212) / 729;
  static constexpr Scalar a61 = Scalar(9017) / 3168, a62 = Scalar(-355) / 33, a63 = Scalar(46732) / 5247,
                          a64 = Scalar(49) / 176, a65 = Scalar(-5103) / 18656;
  static constexpr Scalar b1 = Scalar(35) / 384, b3 = Scalar(500) / 1113, b4 = Scalar(125) / 192,
                          b5 = Scalar(-2187) / 6784, b6 = Scalar(11) / 84;
  // difference between the 5th and embedded 4th order weights
  static constexpr Scalar e1 = b1 - Scalar(5179) / 57600, e3 = b3 - Scalar(7571) / 16695,
                          e4 = b4 - Scalar(393) / 640, e5 = b5 - Scalar(-92097) / 339200,
                          e6 = b6 - Scalar(187) / 2100, e7 = Scalar(-1) / 40;
};

}  // namespace crowd
