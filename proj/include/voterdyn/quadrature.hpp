#pragma once

#include <cmath>

#include "voterdyn/errors.hpp"

namespace voterdyn {

/// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance `tol`.
/// Throws NumericError when the recursion depth is exhausted first.
template <class F>
double integrate(F&& f, double a, double b, double tol = 1e-8, int max_depth = 48) {
  if (a == b) return 0.0;
  struct Panel {
    double a, b, fa, fm, fb, whole;
  };
  auto simpson = [](double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  };
  double worst = 0.0;
  auto recurse = [&](auto&& self, const Panel& p, double eps, int depth) -> double {
    const double m = 0.5 * (p.a + p.b);
    const double lm = 0.5 * (p.a + m);
    const double rm = 0.5 * (m + p.b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(p.a, m, p.fa, flm, p.fm);
    const double right = simpson(m, p.b, p.fm, frm, p.fb);
    const double delta = left + right - p.whole;
    if (std::fabs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
    if (depth <= 0) {
      worst = std::fmax(worst, std::fabs(delta) / 15.0);
      return left + right + delta / 15.0;
    }
    return self(self, Panel{p.a, m, p.fa, flm, p.fm, left}, 0.5 * eps, depth - 1) +
           self(self, Panel{m, p.b, p.fm, frm, p.fb, right}, 0.5 * eps, depth - 1);
  };
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double value = recurse(recurse, Panel{a, b, fa, fm, fb, simpson(a, b, fa, fm, fb)}, tol, max_depth);
  if (worst > 0.0 || !std::isfinite(value)) throw NumericError("adaptive Simpson did not converge", worst);
  return value;
}

}  // namespace voterdyn
