#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qpat/kernels.hpp"
#include "qpat/medium.hpp"

namespace qpat {

/// One inequality LHS <= RHS evaluated numerically. `passed` allows the
/// relative tolerance budget; `margin` is the raw RHS - LHS and is kept even
/// when negative.
struct StabilityReport {
  std::string id;
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 1.0;  ///< explicit constant already folded into rhs
  double tolerance = 0.0;
  double margin = 0.0;
  bool passed = false;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> details;
  std::string note;

  double detail(const std::string& key) const;
};

struct HarnessSampling {
  std::uint64_t seed = 1;
  std::size_t pairs = 4;            ///< extra incoming pairs for column-norm sups
  int grid_cells = 24;              ///< cells per side for column L1 norms
  std::size_t sup_points = 32;      ///< random (z, z', w') configurations for L-infinity sups
  std::size_t near_ray_points = 6;  ///< extra near-ray configurations on random chords
  std::vector<double> eps = {0x1p-4, 0x1p-8, 0x1p-12};
  std::size_t kernel_samples = 1000;
  double near_ray_fraction = 0.25;
};

/// Ballistic inequality: int |eta - eta~| dt against the sampled
/// sup of the L1 column distance (ballistic + alpha_1 columns) over a pair set
/// that includes `pair`. Tolerance 2%.
StabilityReport check_ballistic_stability(const OpticalMedium& a, const OpticalMedium& b, const BoundaryPair& pair,
                                          const HarnessSampling& sampling = {});

/// Leading singular coefficients E sigma_a (k(1) + k(-1)) (n = 2) or the
/// theta integral (n = 3) at x compared with the sampled sup of
/// |Gamma1 - Gamma1~| / (|nu . v'| w_n), Gamma1 ~ alpha_1 + alpha_2 (n = 2) or
/// alpha_1 (n = 3). Tolerance 5%.
StabilityReport check_single_scattering_stability(const OpticalMedium& a, const OpticalMedium& b,
                                                  const BoundaryPair& pair, const Vec3& x,
                                                  const HarnessSampling& sampling = {});

/// int |h - h~| dt against C times the column-norm estimate, with
/// C = e^{D max(|s|,|s~|)} e^{D(|s| + |s~|)} (|sa| + |sa~|) / (s0 s0~).
/// Throws PreconditionError when sigma(x, v) != sigma(x, -v) on the sample
/// lattice. Tolerance 5%.
StabilityReport check_h_stability(const OpticalMedium& a, const OpticalMedium& b, const BoundaryPair& pair,
                                  const HarnessSampling& sampling = {});

/// Explicit alpha_1 bounds at seeded (x, pair) samples (log bound for n = 2,
/// transverse-distance bound for n = 3) plus the alpha_2 / alpha_1
/// separation along x + eps v'_perp (n = 2). Never throws on failure.
std::vector<StabilityReport> check_kernel_bounds(const OpticalMedium& medium, const HarnessSampling& sampling = {});

struct LineProbe {
  BoundaryPair pair;
  double t0;  ///< probe at pair.point + t0 pair.direction
};

/// Pointwise |E sigma_a sigma_g - E~ sigma_a~ sigma_g~| at the probes against
/// the same sup as check_single_scattering_stability. Throws ArgumentError for
/// non-HG media and PreconditionError when sigma_s < sigma_s0 on the lattice.
StabilityReport check_hg_sigma_g_stability(const OpticalMedium& a, const OpticalMedium& b,
                                           std::span<const LineProbe> probes, double sigma_s0 = 1e-3,
                                           const HarnessSampling& sampling = {});

/// Coefficients averaged pointwise (sigma, sigma_s and g), same geometry.
OpticalMedium midpoint_medium(const OpticalMedium& a, const OpticalMedium& b);

/// Smooth HG disk and a perturbed partner, reproducible from the seed.
std::pair<OpticalMedium, OpticalMedium> seeded_medium_pair(std::uint64_t seed);

}  // namespace qpat
