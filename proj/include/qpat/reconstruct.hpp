#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qpat/kernels.hpp"
#include "qpat/singularity.hpp"

namespace qpat {

struct ReconstructionConfig {
  double collar = 0.05;           ///< width of the boundary layer where sigma is known
  int smoothing_half_width = 5;   ///< moving-average half-width for d h / d t
  double sigma_s_floor = 1e-3;    ///< points with smaller sigma_s are excluded from g recovery
  std::vector<BoundaryPair> lines;
  /// Known sigma(x, v) inside the collar; when empty no overwrite happens.
  std::function<double(const Vec3&, const Vec3&)> known_sigma;
};

struct ScatteringFreeResult {
  std::vector<double> ts;
  std::vector<double> sigma_a;
  std::vector<double> zeta;
  bool flagged = false;  ///< zeta fell below exp(-bound * chord)
};

struct LineReconstruction {
  BoundaryPair pair;
  std::vector<double> ts;
  std::vector<double> sigma;
  std::vector<double> sigma_a;
  std::vector<double> h;
  double offset = 0.0;                 ///< constant added to interior sigma by collar reconciliation
  double inconsistent_fraction = 0.0;  ///< share of samples with sigma < sigma_a - tol
  std::size_t clamped = 0;             ///< negative sigma_a samples set to zero
  std::vector<std::string> warnings;
};

enum class GStatus { ok, out_of_range, saturated, excluded };

struct GFieldResult {
  std::vector<double> g;  ///< NaN unless status is ok
  std::vector<GStatus> status;
  std::vector<std::size_t> out_of_range;
  std::vector<std::size_t> saturated;
  std::vector<std::size_t> excluded;
};

/// k = 0 data: zeta = 1 - int_0^t eta, sigma_a = eta / zeta. `bound` is the
/// a-priori sup of sigma used for the zeta floor check (0 disables it).
ScatteringFreeResult recover_sigma_a_scattering_free(const LineProfile& profile, double chord, double bound = 0.0);

/// h(t) = ln(eta(t; y0, v0) / eta(tau - t; y1, v1)) where `reverse` is the
/// profile of the reversed experiment. Reverse samples are interpolated when
/// their times do not mirror the forward ones. A positive `bound` asserts
/// |h| <= bound.
std::vector<double> recover_h_profile(const LineProfile& forward, const LineProfile& reverse, double bound = 0.0);

/// sigma = -h'/2 (smoothed central differences), collar overwrite with offset
/// reconciliation, sigma_a = eta exp(int_0^t sigma). Requires uniform spacing.
LineReconstruction recover_sigma_symmetric(std::span<const double> h, const LineProfile& profile,
                                           const ReconstructionConfig& config, double chord);

/// sigma_g = coefficient / sigma_a per probe. Throws DomainError when
/// sigma_a < sigma0 / 2 at a probe.
std::vector<double> recover_sigma_g(std::span<const double> coefficients, std::span<const double> sigma_a,
                                    double sigma0);

/// g = h^{-1}(sigma_g / (sigma - sigma_a)) pointwise, with failures reported.
GFieldResult recover_g_field(std::span<const double> sigma_g, std::span<const double> sigma,
                             std::span<const double> sigma_a, int dimension, double sigma_s_floor = 1e-3);

/// Per-probe output of the end-to-end anisotropy pipeline.
struct GProbe {
  Vec3 x;
  double sigma = 0.0;
  double sigma_a = 0.0;
  double sigma_g = 0.0;
  double g = 0.0;
  GStatus status = GStatus::ok;
  std::vector<SingularFit> fits;  ///< one per probing direction
};

struct GPipelineOptions {
  std::size_t chord_samples = 1001;
  std::vector<double> directions = {0.3, 1.9};  ///< probing angles (radians) through every probe point
  double eps_min = 1e-4;
  double eps_max = 1e-2;
};

/// Runs the ballistic, singular and HG stages from synthetic kernel-level data
/// of `medium` (n = 2): sigma and sigma_a along each chord from the two-sided
/// ballistic profiles, single-scattering fits normalised with the
/// reconstructed attenuation, then sigma_g and g.
std::vector<GProbe> run_g_pipeline(const OpticalMedium& medium, std::span<const Vec3> probes,
                                   const ReconstructionConfig& config, const GPipelineOptions& options = {});

}  // namespace qpat
