#pragma once

#include <cmath>
#include <functional>

// Test-side reference integrators, deliberately unrelated to the library's
// Gauss-Kronrod machinery.
namespace oracle {

inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                          double fb, double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15 * eps) return left + right + delta / 15;
  return simpson_rec(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

// Adaptive Simpson with absolute tolerance eps.
inline double simpson(const std::function<double(double)>& f, double a, double b, double eps, int depth = 50) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, eps, depth);
}

}  // namespace oracle
