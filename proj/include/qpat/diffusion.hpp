#pragma once

#include <functional>
#include <vector>

#include "qpat/field.hpp"
#include "qpat/transport.hpp"

namespace qpat {

/// div(D grad I) = H in the disk with I = phi on the boundary. H = sigma_a I
/// is the internal measurement; I is the diffusive intensity.
struct DiffusionProblem {
  SpatialGrid grid;
  CoefficientField D;
  std::function<double(const Vec3&)> phi;
  std::vector<double> H;  ///< per cell, ignored outside the disk
};

struct DiffusionOptions {
  double rel_tol = 1e-10;
  int max_iterations = 20000;
  double theta_floor = 1e-6;  ///< smallest boundary fraction of a cut edge
};

struct DiffusionSolution {
  EnergyMap intensity;
  std::vector<double> residuals;       ///< relative residual per CG iteration
  std::vector<std::size_t> nonpositive;  ///< active cells with I <= 0
  double phi_min = 0.0;
  double phi_max = 0.0;
};

/// Symmetric cut-cell 5-point scheme: interior edges use harmonic-mean face
/// coefficients, edges crossing the circle end at the boundary point with
/// Dirichlet data. Jacobi-preconditioned CG.
/// Throws ArgumentError for D <= 0, phi <= 0, H < 0 or a size mismatch,
/// ConvergenceError (with the residual history) if CG stalls.
DiffusionSolution solve_intensity(const DiffusionProblem& problem, const DiffusionOptions& options = {});

struct DiffusiveAbsorption {
  EnergyMap sigma_a;
  std::vector<std::size_t> excluded;     ///< I <= i_min, value set to NaN
  std::vector<std::size_t> below_sigma0;  ///< recovered sigma_a < sigma0
};

/// sigma_a = H / I cellwise. Throws DataInconsistencyError when more than 10%
/// of the active cells have I <= i_min.
DiffusiveAbsorption recover_sigma_a_diffusive(const EnergyMap& H, const EnergyMap& I, double i_min,
                                              double sigma0 = 0.0);

/// Default i_min: 1e-8 max phi.
inline double default_i_min(const DiffusionSolution& s) { return 1e-8 * s.phi_max; }

/// Estimate of C in |d sigma_a| <= C delta |sigma_a| for a relative
/// perturbation delta of H, taken as the worst over a uniform and an
/// alternating-sign perturbation.
double diffusion_stability_constant(const DiffusionProblem& problem, double delta = 1e-3,
                                    const DiffusionOptions& options = {});

}  // namespace qpat
