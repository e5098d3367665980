#pragma once

#include <optional>
#include <span>

#include "qpat/field.hpp"
#include "qpat/geometry.hpp"

namespace qpat {

/// Henyey-Greenstein kernel k(lambda) for scattering-angle cosine lambda:
///   n = 2: sigma_s (1 - g^2) / (2 pi (1 + g^2 - 2 g lambda))
///   n = 3: sigma_s (1 - g^2) / (4 pi (1 + g^2 - 2 g lambda)^{3/2})
/// Throws ArgumentError for g outside [0, 1) or lambda outside [-1, 1].
double hg_phase(double lambda, double g, double sigma_s, int dimension);

/// Measure of the unit sphere S^{n-1}: 2 pi (n = 2) or 4 pi (n = 3).
double sphere_measure(int dimension);

enum class PhaseKind { none, isotropic, henyey_greenstein };

struct PhaseFunction {
  PhaseKind kind = PhaseKind::none;
  CoefficientField sigma_s = CoefficientField::constant(0.0);
  CoefficientField g = CoefficientField::constant(0.0);

  static PhaseFunction none() { return {}; }
  static PhaseFunction isotropic(CoefficientField sigma_s) {
    return {PhaseKind::isotropic, std::move(sigma_s), CoefficientField::constant(0.0)};
  }
  static PhaseFunction henyey_greenstein(CoefficientField sigma_s, CoefficientField g) {
    return {PhaseKind::henyey_greenstein, std::move(sigma_s), std::move(g)};
  }
};

struct CoefficientValues {
  double sigma = 0.0;
  double sigma_a = 0.0;
  double sigma_s = 0.0;
  std::optional<double> k;
};

/// Suprema/infima observed on the validation lattice.
struct SampledBounds {
  double sigma_max = 0.0;
  double sigma_a_min = 0.0;
  double sigma_a_max = 0.0;
  double sigma_s_min = 0.0;
  double sigma_s_max = 0.0;
  double k_max = 0.0;
};

/// Optical coefficients on a disk/ball: total attenuation sigma(x, v) and a
/// scattering kernel k(x, v', v) = k(x, v'.v) built from the phase
/// description. Immutable after construction.
class OpticalMedium {
 public:
  /// Validates sigma_a >= sigma0 > 0 and 0 <= sigma, k <= bound on a lattice
  /// of interior points and directions; throws ArgumentError on violation.
  OpticalMedium(DomainGeometry geometry, CoefficientField sigma, PhaseFunction phase, double sigma0, double bound);

  /// Builds sigma = sigma_a + sigma_s.
  static OpticalMedium from_absorption(DomainGeometry geometry, const CoefficientField& sigma_a, PhaseFunction phase,
                                       double sigma0, double bound);

  /// Copy with a different total attenuation outside the domain (default 0).
  OpticalMedium with_exterior(CoefficientField exterior) const;

  const DomainGeometry& geometry() const { return geometry_; }
  int dimension() const { return geometry_.dimension(); }
  const PhaseFunction& phase() const { return phase_; }
  const CoefficientField& sigma_field() const { return sigma_; }
  double sigma0() const { return sigma0_; }
  double bound() const { return bound_; }
  const SampledBounds& sampled_bounds() const { return bounds_; }

  double sigma(const Vec3& x, const Vec3& v) const;
  double sigma_s(const Vec3& x) const;
  double sigma_a(const Vec3& x, const Vec3& v) const { return sigma(x, v) - sigma_s(x); }
  /// Anisotropy g(x) (0 unless the phase is Henyey-Greenstein).
  double anisotropy(const Vec3& x) const;
  /// Scattering kernel from incoming direction v_in to outgoing v_out.
  double k(const Vec3& x, const Vec3& v_in, const Vec3& v_out) const;
  /// Kernel as a function of the scattering cosine.
  double k_cos(const Vec3& x, double lambda) const;

  CoefficientValues evaluate(const Vec3& x, const Vec3& v, const std::optional<Vec3>& v_out = std::nullopt) const;

  /// Integral of sigma along the straight segment from `from` to `to`, with
  /// sigma evaluated in the direction of travel.
  double optical_depth(const Vec3& from, const Vec3& to) const;
  /// Cheaper variant for nested kernel quadratures (about 1e-6 relative for
  /// smooth coefficients): 6-point Gauss on R/4 segments.
  double optical_depth_coarse(const Vec3& from, const Vec3& to) const;

  /// E(x_0, ..., x_m): attenuation along the broken path travelled from x_m
  /// back to x_0 (segment i goes from x_{i+1} to x_i).
  double attenuation(std::span<const Vec3> path) const;

  /// Step of the midpoint rule used for line integrals of gridded
  /// coefficients; +inf for analytic ones (composite Gauss is used instead).
  double line_step() const { return step_; }

  bool has_scattering() const { return phase_.kind != PhaseKind::none; }
  bool is_constant() const;

 private:
  bool inside(const Vec3& x) const { return geometry_.in_closure(x); }
  void validate();

  DomainGeometry geometry_;
  CoefficientField sigma_;
  PhaseFunction phase_;
  CoefficientField exterior_ = CoefficientField::constant(0.0);
  double sigma0_;
  double bound_;
  double step_;
  double smooth_segment_;
  SampledBounds bounds_;
};

}  // namespace qpat
