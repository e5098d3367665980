#include "qpat/hgmodel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "qpat/error.hpp"
#include "qpat/quadrature.hpp"

namespace qpat::hg {

namespace {

constexpr double pi = std::numbers::pi;

void check_dimension(int n) {
  if (n != 2 && n != 3) throw UnsupportedDimensionError("HG map: dimension must be 2 or 3");
}

}  // namespace

double h_of_g(double g, int n) {
  check_dimension(n);
  if (!(g >= 0.0 && g < 1.0)) throw ArgumentError("h_of_g: anisotropy must lie in [0, 1)");
  if (n == 2) return (1.0 + g * g) / (pi * (1.0 - g * g));
  if (g == 0.0) return 0.25;
  const double num = (1.0 - g * g) / (4.0 * pi);
  auto integrand = [=](double t) {
    const double sh = std::sin(0.5 * t);
    const double q = (1.0 - g) * (1.0 - g) + 4.0 * g * sh * sh;
    return num / (q * std::sqrt(q));
  };
  // Forward peak at t = 0 of angular width ~ (1 - g).
  const auto bp = quad::graded_breakpoints(0.0, pi, 0.0, 1.0 - g);
  return quad::integrate(integrand, bp, {1e-10, 1e-14, 20000}).value;
}

double edge_constant(int n) {
  check_dimension(n);
  return n == 2 ? 1.0 / pi : 1.0 / (2.0 * pi);
}

double invert_h(double value, int n) {
  check_dimension(n);
  const double h0 = h_of_g(0.0, n);
  if (!std::isfinite(value) || value < h0 * (1.0 - 1e-14)) {
    std::ostringstream os;
    os << "invert_h: value " << value << " below h(0) = " << h0;
    throw OutOfRangeError(os.str());
  }
  const double hmax = h_of_g(kSaturation, n);
  if (value > hmax) {
    std::ostringstream os;
    os << "invert_h: value " << value << " above h(" << kSaturation << ") = " << hmax << "; g is in the bracket";
    throw SaturationError(os.str(), kSaturation, 1.0);
  }
  if (value <= h0) return 0.0;
  if (n == 2) {
    const double ph = pi * value;
    return std::sqrt((ph - 1.0) / (ph + 1.0));
  }
  // h is strictly increasing, so bisection always converges.
  double lo = 0.0;
  double hi = kSaturation;
  for (int i = 0; i < kBisectionSteps; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (h_of_g(mid, n) < value) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace qpat::hg
