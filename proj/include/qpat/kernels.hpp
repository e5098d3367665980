#pragma once

#include <span>
#include <vector>

#include "qpat/medium.hpp"

namespace qpat {

/// Points closer than this to the source ray are treated as on the ray.
inline constexpr double kOnRayTolerance = 1e-9;

/// Ballistic profile eta(t) = sigma_a(x' + t v', v') E(x' + t v', x') along a chord.
struct LineProfile {
  BoundaryPair pair;
  std::vector<double> ts;
  std::vector<double> values;
};

struct KernelColumn {
  BoundaryPair pair;
  std::vector<Vec3> points;
  std::vector<double> values;
};

struct ColumnDistance {
  double ballistic = 0.0;   ///< integral of |eta - eta~| along the chord
  double scattering = 0.0;  ///< sum of cell_volume * |Gamma1 - Gamma1~| / |nu . v'|
  double column_norm = 0.0; ///< ballistic + scattering
  std::size_t skipped = 0;  ///< points on the source ray, left out of the sum
};

struct KernelQuadrature {
  double rel_tol = 1e-10;
  double abs_tol = 1e-15;
  int max_intervals = 4000;
  int grading_levels = 40;
};

/// Tolerances for the n = 2 double-scattering kernel (1% target accuracy).
struct Alpha2Quadrature {
  double rel_tol = 1e-4;
  int max_intervals = 400;
};

/// eta at the given times; ts must lie in [0, tau_+] (ArgumentError otherwise).
LineProfile eta_profile(const OpticalMedium& medium, const BoundaryPair& pair, std::span<const double> ts);

/// Single-scattering kernel alpha_1(x, x', v'). Throws SingularityError when x
/// lies on the source ray and DomainError when x is outside the domain.
double alpha1(const OpticalMedium& medium, const Vec3& x, const BoundaryPair& pair, const KernelQuadrature& q = {});

/// Double-scattering kernel alpha_2(x, x', v') for n = 2 (nested adaptive
/// quadrature in polar coordinates about x).
double alpha2(const OpticalMedium& medium, const Vec3& x, const BoundaryPair& pair, const Alpha2Quadrature& q = {});

/// Singular weight: n = 2 gives 1 + ln((|a| - a.v') / (|d| - d.v')) with
/// d = x - x' and a = d - tau_+ v'; n >= 3 gives |d_perp|^{2-n}.
double weight_w(const DomainGeometry& geometry, const Vec3& x, const BoundaryPair& pair);

/// Gamma_1 approximation at each point: alpha_1 + alpha_2 (n = 2, when
/// with_alpha2) or alpha_1. On-ray points get +inf.
KernelColumn kernel_column(const OpticalMedium& medium, const BoundaryPair& pair, std::span<const Vec3> points,
                           bool with_alpha2 = true);

/// L1 column distances between two media for one incoming pair. `volumes`
/// are the cell measures attached to `points`; `chord_samples` is the number
/// of trapezoid nodes along the chord.
ColumnDistance kernel_column_distance(const OpticalMedium& a, const OpticalMedium& b, const BoundaryPair& pair,
                                      std::span<const Vec3> points, std::span<const double> volumes,
                                      bool with_alpha2 = true, std::size_t chord_samples = 4001);

/// Optical depth from x' to x' + t v' along a chord: exact for constant
/// sigma, otherwise a cubic table on R/256 steps.
class RayDepth {
 public:
  RayDepth(const OpticalMedium& medium, const BoundaryPair& pair, double tau);
  double operator()(double t) const;

 private:
  double constant_ = 0.0;
  std::vector<double> ts_;
  std::vector<double> depth_;
};

/// Trapezoid integral of |f| with sign changes located by linear interpolation.
double abs_trapezoid(std::span<const double> ts, std::span<const double> f);

}  // namespace qpat
