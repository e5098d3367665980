#pragma once

namespace qpat::hg {

/// Largest anisotropy the inversion resolves; h diverges like c(n)/(1-g).
inline constexpr double kSaturation = 1.0 - 1e-9;
inline constexpr int kBisectionSteps = 50;

/// h(g) = sigma_g / sigma_s for a Henyey-Greenstein medium.
///   n = 2: (1 + g^2) / (pi (1 - g^2))
///   n = 3: integral over [0, pi] of (1 - g^2) / (4 pi (1 + g^2 - 2 g cos t)^{3/2})
/// Throws ArgumentError unless 0 <= g < 1.
double h_of_g(double g, int dimension);

/// Limit of (1 - g) h(g) as g -> 1: 1/pi (n = 2), 1/(2 pi) (n = 3).
double edge_constant(int dimension);

/// Inverse of h_of_g. Closed form for n = 2, bisection for n = 3.
/// Throws OutOfRangeError if value < h(0), SaturationError if value exceeds
/// h(kSaturation).
double invert_h(double value, int dimension);

}  // namespace qpat::hg
