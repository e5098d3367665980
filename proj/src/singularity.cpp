#include "qpat/singularity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qpat/error.hpp"
#include "qpat/parallel.hpp"
#include "qpat/quadrature.hpp"

namespace qpat {

std::vector<double> eps_schedule(const DomainGeometry& geometry, const BoundaryPair& pair, double t0,
                                 const Vec3& w, double eps_min, double eps_max) {
  if (!(eps_min > 0.0) || !(eps_max > eps_min)) throw ArgumentError("eps_schedule: need 0 < eps_min < eps_max");
  const Vec3 x = pair.point + t0 * pair.direction;
  const double room = geometry.exit_time(x, w);
  std::vector<double> out;
  for (double e = eps_max; e >= eps_min * (1 - 1e-12); e *= 0.5)
    if (e < room) out.push_back(e);
  return out;
}

SingularSamples probe_alpha1(const OpticalMedium& medium, const BoundaryPair& pair, double t0,
                             std::span<const double> eps, const Vec3& w, const KernelQuadrature& q) {
  const auto& geo = medium.geometry();
  const double inc = geo.incidence(pair);
  if (std::abs(norm(w) - 1.0) > 1e-12) throw NormalizationError("probe_alpha1: offset direction is not a unit vector");
  if (std::abs(dot(w, pair.direction)) > 1e-12) throw ArgumentError("probe_alpha1: offset direction not orthogonal to v'");
  const double tau = geo.exit_time(pair.point, pair.direction);
  if (!(t0 > 0.0 && t0 < tau)) throw ArgumentError("probe_alpha1: t0 outside the open chord");
  for (std::size_t i = 1; i < eps.size(); ++i)
    if (!(eps[i] < eps[i - 1])) throw ArgumentError("probe_alpha1: eps must be strictly decreasing");
  const Vec3 x = pair.point + t0 * pair.direction;
  for (double e : eps) {
    if (!(e > 0.0) || !geo.contains(x + e * w)) {
      std::ostringstream os;
      os << "probe_alpha1: probe point for eps = " << e << " is not inside the domain";
      throw ArgumentError(os.str());
    }
  }
  const Vec3 path[2] = {x, pair.point};
  const double norm_factor = medium.attenuation(path) * inc;
  SingularSamples s{pair, t0, w, medium.dimension(), {eps.begin(), eps.end()}, std::vector<double>(eps.size())};
  parallel_for(eps.size(), [&](std::size_t i) { s.f[i] = alpha1(medium, x + eps[i] * w, pair, q) / norm_factor; });
  return s;
}

SingularFit fit_singular(const SingularSamples& samples) {
  return fit_singular(samples, samples.dimension == 2 ? SingularLaw::log : SingularLaw::power);
}

SingularFit fit_singular(const SingularSamples& s, SingularLaw law) {
  const std::size_t m = s.eps.size();
  if (m != s.f.size()) throw FitError("fit_singular: eps and f differ in length");
  if (m < 4) throw FitError("fit_singular: need at least four samples");
  const double spread = *std::max_element(s.eps.begin(), s.eps.end()) / *std::min_element(s.eps.begin(), s.eps.end());
  if (!(spread >= 8.0)) throw FitError("fit_singular: samples must span a factor 8 in eps");
  for (std::size_t i = 1; i < m; ++i)
    if (!(s.eps[i] < s.eps[i - 1])) throw FitError("fit_singular: eps must be strictly decreasing");

  SingularFit fit{s.pair, s.t0, s.eps, s.f, law, 0.0, 0.0, 0.0, 0.0, std::vector<double>(m)};
  double scale = 0.0;
  for (double v : s.f) scale += v * v;
  scale = std::sqrt(scale / m);

  if (law == SingularLaw::log) {
    // Least squares for f = a ln(1/eps) + b.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double x = std::log(1.0 / s.eps[i]);
      sx += x;
      sy += s.f[i];
      sxx += x * x;
      sxy += x * s.f[i];
    }
    const double den = m * sxx - sx * sx;
    fit.coefficient = (m * sxy - sx * sy) / den;
    fit.offset = (sy - fit.coefficient * sx) / m;
    double r2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      fit.model[i] = fit.coefficient * std::log(1.0 / s.eps[i]) + fit.offset;
      r2 += (s.f[i] - fit.model[i]) * (s.f[i] - fit.model[i]);
    }
    fit.residual = scale > 0.0 ? std::sqrt(r2 / m) / scale : 0.0;
    return fit;
  }

  // Power law: g = eps^p f tends to a constant; one-term Richardson assuming an
  // O(eps) correction.
  const double p = s.dimension == 2 ? 1.0 : s.dimension - 2.0;
  std::vector<double> g(m), lim(m - 1);
  for (std::size_t i = 0; i < m; ++i) g[i] = std::pow(s.eps[i], p) * s.f[i];
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double r = s.eps[i + 1] / s.eps[i];
    lim[i] = (g[i + 1] - r * g[i]) / (1 - r);
  }
  fit.coefficient = lim.back();
  // Spread of the last three extrapolants.
  double dev = 0.0;
  for (std::size_t i = m - 4; i < m - 1; ++i) dev = std::max(dev, std::abs(lim[i] - fit.coefficient));
  const double ref = std::max(std::abs(fit.coefficient), 1e-300);
  fit.residual = scale > 0.0 ? dev / ref : 0.0;
  const double d1 = std::abs(g[m - 3] - g[m - 2]), d2 = std::abs(g[m - 2] - g[m - 1]);
  fit.observed_order = (d1 > 0 && d2 > 0) ? std::log(d1 / d2) / std::log(s.eps[m - 3] / s.eps[m - 2]) : 0.0;
  for (std::size_t i = 0; i < m; ++i) fit.model[i] = fit.coefficient / std::pow(s.eps[i], p);
  return fit;
}

double singular_coefficient(const OpticalMedium& medium, const Vec3& x, const Vec3& v) {
  const double sa = medium.sigma_a(x, v);
  if (medium.dimension() == 2) return sa * (medium.k_cos(x, 1.0) + medium.k_cos(x, -1.0));
  const double g = medium.anisotropy(x);
  auto f = [&](double t) { return medium.k_cos(x, std::cos(t)); };
  const auto bp = quad::graded_breakpoints(0.0, std::numbers::pi, 0.0, std::max(1.0 - g, 1e-6));
  return sa * quad::integrate(f, bp, {1e-15, 1e-12, 4000}).value;
}

}  // namespace qpat
