#pragma once

#include <functional>
#include <span>
#include <vector>

namespace qpat::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;
  int intervals = 0;
  bool converged = true;
};

struct Tolerance {
  double abs = 1e-13;
  double rel = 1e-10;
  int max_intervals = 4000;
};

using Integrand = std::function<double(double)>;

/// Globally adaptive 15-point Gauss-Kronrod integration over the partition
/// given by `breakpoints` (sorted, at least two entries). Intervals are
/// bisected worst-first until the summed error estimate meets the tolerance.
/// The refinement order is deterministic.
Result integrate(const Integrand& f, std::span<const double> breakpoints, const Tolerance& tol = {});

inline Result integrate(const Integrand& f, double a, double b, const Tolerance& tol = {}) {
  const double bp[2] = {a, b};
  return integrate(f, bp, tol);
}

/// Partition of [a, b] that grades geometrically (ratio 1/2) toward `focus`
/// until the innermost piece is shorter than `scale`, at most `max_levels`
/// pieces per side. `focus` is clamped into [a, b].
std::vector<double> graded_breakpoints(double a, double b, double focus, double scale, int max_levels = 40);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const Rule& gauss_legendre(int n);

/// Fixed-order composite Gauss-Legendre on `segments` equal pieces.
double composite_gauss(const Integrand& f, double a, double b, int segments, int order);

/// Cumulative integral of tabulated samples with fourth-order local cubic
/// interpolation. Entry i holds the integral from `start` to ts[i]; the first
/// piece [start, ts[0]] uses the cubic through the first four samples.
std::vector<double> cumulative_integral(std::span<const double> ts, std::span<const double> ys, double start);

/// Cubic Lagrange interpolation of tabulated data (clamped to the table).
double interpolate_cubic(std::span<const double> ts, std::span<const double> ys, double t);

}  // namespace qpat::quad
