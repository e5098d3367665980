#pragma once

#include <cstdint>
#include <vector>

#include "qpat/vec.hpp"

namespace qpat {

enum class Escape { forward, backward };

/// An incoming boundary configuration (x', v'): x' on the boundary and
/// nu(x') . v' < 0.
struct BoundaryPair {
  Vec3 point;
  Vec3 direction;
};

struct WeightedPair {
  BoundaryPair pair;
  double weight;
};

/// Open disk (n = 2) or ball (n = 3). Two-dimensional points use z = 0.
class DomainGeometry {
 public:
  static constexpr double kBoundaryTolerance = 1e-9;  // relative to radius
  static constexpr double kUnitTolerance = 1e-10;

  DomainGeometry(int dimension, Vec3 center, double radius);

  static DomainGeometry unit_disk() { return DomainGeometry(2, {}, 1.0); }
  static DomainGeometry unit_ball() { return DomainGeometry(3, {}, 1.0); }

  int dimension() const { return dim_; }
  const Vec3& center() const { return center_; }
  double radius() const { return radius_; }
  double diameter() const { return 2.0 * radius_; }

  bool contains(const Vec3& x) const;         ///< strictly inside
  bool in_closure(const Vec3& x) const;       ///< inside or within tolerance of the boundary
  double distance_to_boundary(const Vec3& x) const;  ///< positive inside

  /// tau_{+/-}(x, v): time to leave the closed domain moving along +v / -v.
  /// Throws DomainError for x outside the closure, NormalizationError for |v| != 1.
  double exit_time(const Vec3& x, const Vec3& v, Escape sign = Escape::forward) const;

  /// Length of the chord through x with direction v.
  double chord(const Vec3& x, const Vec3& v) const;

  Vec3 outward_normal(const Vec3& boundary_point) const;

  /// Boundary pair entering along v and passing through the interior point x.
  BoundaryPair entry_pair(const Vec3& x, const Vec3& v) const;
  /// Same line traversed in the opposite direction: (x' + tau_+ v', -v').
  BoundaryPair reversed(const BoundaryPair& pair) const;
  /// |nu(x') . v'|, validating that the pair is incoming.
  double incidence(const BoundaryPair& pair) const;

  /// Quasi-random sample of Gamma_- with weights summing to its
  /// dxi-measure. Bit-reproducible for a fixed seed.
  std::vector<WeightedPair> sample_incoming(std::size_t count, std::uint64_t seed) const;

  /// Total dxi-measure of Gamma_- (|dX| * integral of |cos| over a hemisphere).
  double incoming_measure() const;

  bool operator==(const DomainGeometry&) const = default;

 private:
  void check_direction(const Vec3& v) const;
  int dim_;
  Vec3 center_;
  double radius_;
};

}  // namespace qpat
