#pragma once

#include <vector>

#include "qpat/kernels.hpp"

namespace qpat {

enum class SingularLaw { log, power };

/// Normalised single-scattering samples near x = x' + t0 v'.
struct SingularSamples {
  BoundaryPair pair;
  double t0 = 0.0;
  Vec3 offset_direction;
  int dimension = 2;
  std::vector<double> eps;  ///< strictly decreasing
  std::vector<double> f;    ///< alpha_1(x + eps w) / (E(x, x') |nu . v'|)
};

struct SingularFit {
  BoundaryPair pair;
  double t0 = 0.0;
  std::vector<double> eps;
  std::vector<double> f;
  SingularLaw law = SingularLaw::log;
  double coefficient = 0.0;  ///< a (log law) or the limit of eps^{n-2} f (power law)
  double offset = 0.0;       ///< b of the log law; unused for the power law
  double residual = 0.0;     ///< relative misfit, comparable between laws
  double observed_order = 0.0;  ///< power law: observed convergence order of eps^{n-2} f
  std::vector<double> model;    ///< fitted model evaluated at eps
};

/// Geometric schedule eps_max, eps_max/2, ... down to eps_min, keeping only
/// values whose probe point stays inside the domain.
std::vector<double> eps_schedule(const DomainGeometry& geometry, const BoundaryPair& pair, double t0,
                                 const Vec3& offset_direction, double eps_min = 0x1p-14, double eps_max = 0x1p-4);

/// Samples f(eps) = alpha_1(x + eps w, x', v') / (E(x, x') |nu(x') . v'|) at
/// x = x' + t0 v'. `w` must be a unit vector orthogonal to v'.
SingularSamples probe_alpha1(const OpticalMedium& medium, const BoundaryPair& pair, double t0,
                             std::span<const double> eps, const Vec3& w, const KernelQuadrature& q = {});

/// Fits the asymptotic law: log for n = 2, power eps^{2-n} for n >= 3.
SingularFit fit_singular(const SingularSamples& samples);
/// Fits a prescribed law regardless of the dimension (power uses exponent
/// n - 2, or 1 when n = 2).
SingularFit fit_singular(const SingularSamples& samples, SingularLaw law);

/// Analytic leading coefficient for the medium at x = x' + t0 v':
/// sigma_a (k(1) + k(-1)) in n = 2, sigma_a * int_0^pi k(cos t) dt in n = 3.
double singular_coefficient(const OpticalMedium& medium, const Vec3& x, const Vec3& v);

}  // namespace qpat
