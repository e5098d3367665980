#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "qpat/field.hpp"
#include "qpat/kernels.hpp"
#include "qpat/medium.hpp"

namespace qpat {

/// N_v equispaced directions theta_j = 2 pi j / N_v, weight 2 pi / N_v each.
struct AngularGrid {
  int count = 64;
  double weight() const;
  Vec3 direction(int j) const;
  double angle(int j) const;
};

/// N x N cell-centred grid on the square circumscribing the disk; cells whose
/// centre lies in the open disk are active.
class SpatialGrid {
 public:
  SpatialGrid(const DomainGeometry& geometry, int cells_per_side);

  int side() const { return n_; }
  double spacing() const { return h_; }
  double cell_volume() const { return h_ * h_; }
  std::size_t cell_count() const { return static_cast<std::size_t>(n_) * n_; }
  Vec3 center(int i, int j) const;
  Vec3 center(std::size_t cell) const { return center(static_cast<int>(cell / n_), static_cast<int>(cell % n_)); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }
  bool active(std::size_t cell) const { return mask_[cell] != 0; }
  std::size_t active_count() const;
  const DomainGeometry& geometry() const { return geometry_; }
  bool operator==(const SpatialGrid& o) const { return n_ == o.n_ && geometry_ == o.geometry_; }

 private:
  DomainGeometry geometry_;
  int n_;
  double h_;
  Vec3 origin_;
  std::vector<char> mask_;
};

/// u(x_c, v_j) for every cell c and direction j (index c * N_v + j).
struct TransportField {
  SpatialGrid grid;
  AngularGrid angles;
  std::vector<double> values;

  double l1_norm() const;  ///< sum over active cells and directions of |u| h^2 (2 pi / N_v)
};

/// H(x_c) per cell; zero outside the disk.
struct EnergyMap {
  SpatialGrid grid;
  std::vector<double> values;

  double integral() const;  ///< sum of H h^2
  GridData to_grid() const;
  /// Bilinear interpolation between cell centres.
  double sample(const Vec3& x) const;
};

/// Gaussian beam around an incoming pair: Gaussian in boundary arclength
/// (width_s) and in angle (width_theta), normalised to unit dxi-mass.
struct Beam {
  BoundaryPair pair;
  double width_s = 0.02;
  double width_theta = 0.02;
};

/// Boundary data phi on Gamma_-: an analytic density or a beam.
struct BoundarySource {
  std::function<double(const Vec3& xb, const Vec3& v)> density;
  std::optional<Beam> beam;

  static BoundarySource zero();
  static BoundarySource uniform(double value);
  static BoundarySource from_beam(Beam b);
  static BoundarySource from_density(std::function<double(const Vec3&, const Vec3&)> f);
  /// phi(x', v') for a given incoming configuration.
  double operator()(const Vec3& xb, const Vec3& v) const;
};

struct TransportOptions {
  int cells_per_side = 128;
  int angles = 64;
  double tol = 1e-8;
  int max_orders = 200;
  int beam_supersample = 8;   ///< sub-cells per side when averaging a beam over a cell
  int angle_supersample = 24;  ///< Gauss points across the beam's angular window
  bool keep_orders = false;
};

struct TransportSolution {
  TransportField total;
  std::vector<TransportField> orders;  ///< u_0, u_1, ... when keep_orders
  std::vector<double> order_norms;     ///< ||u_m||_1
  EnergyMap energy;
  std::vector<double> order_energy;    ///< integral of H from u_m alone
};

/// Transport sweeps and scattering for one medium on one discretisation.
class TransportSolver {
 public:
  TransportSolver(const OpticalMedium& medium, const TransportOptions& options = {});

  const SpatialGrid& grid() const { return grid_; }
  const AngularGrid& angles() const { return angles_; }
  const TransportOptions& options() const { return opt_; }

  /// Ballistic field u_0 = J phi.
  TransportField ballistic(const BoundarySource& source) const;
  /// Neumann series u = sum_m K^m u_0. Throws ConvergenceError if the last
  /// term is still above tol after max_orders terms.
  TransportSolution solve(const BoundarySource& source) const;
  /// Continues the series from a given first term with zero boundary data.
  TransportSolution solve_from(TransportField first) const;

  /// Scattering source S(x, v) = int k(x, v', v) u(x, v') dv'.
  std::vector<double> scatter(const TransportField& u) const;
  /// Solves v.grad w + sigma w = S with zero inflow by short characteristics.
  TransportField sweep(const std::vector<double>& source) const;
  EnergyMap energy_map(const TransportField& u) const;

 private:
  const OpticalMedium& medium_;
  TransportOptions opt_;
  SpatialGrid grid_;
  AngularGrid angles_;
  std::vector<double> sigma_;    // per cell and direction
  std::vector<double> sigma_a_;  // per cell and direction
  std::vector<double> kernel_;   // per cell, circulant weights k(cos(2 pi d / N_v)) * dtheta
};

/// Energy map of the full solution.
EnergyMap energy_map(const OpticalMedium& medium, const TransportField& u);

/// Scattered energy column for a delta beam at `pair`: the once-scattered
/// field is built analytically from the chord, later orders by sweeps. Values
/// approximate alpha_1 + alpha_2 + ... at the cell centres.
KernelColumn scattered_column(const OpticalMedium& medium, const BoundaryPair& pair,
                              const TransportOptions& options = {});

}  // namespace qpat
