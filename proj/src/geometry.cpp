#include "qpat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "qpat/error.hpp"

namespace qpat {

DomainGeometry::DomainGeometry(int dimension, Vec3 center, double radius)
    : dim_(dimension), center_(center), radius_(radius) {
  if (dim_ != 2 && dim_ != 3) throw UnsupportedDimensionError("DomainGeometry: dimension must be 2 or 3");
  if (!(radius_ > 0.0) || !std::isfinite(radius_)) throw ArgumentError("DomainGeometry: radius must be positive");
  if (dim_ == 2 && center_.z != 0.0) throw ArgumentError("DomainGeometry: 2D center must have z = 0");
}

bool DomainGeometry::contains(const Vec3& x) const { return norm(x - center_) < radius_; }

bool DomainGeometry::in_closure(const Vec3& x) const {
  return norm(x - center_) <= radius_ * (1.0 + kBoundaryTolerance);
}

double DomainGeometry::distance_to_boundary(const Vec3& x) const { return radius_ - norm(x - center_); }

void DomainGeometry::check_direction(const Vec3& v) const {
  if (std::abs(norm(v) - 1.0) > kUnitTolerance) throw NormalizationError("direction is not a unit vector");
  if (dim_ == 2 && v.z != 0.0) throw ArgumentError("direction leaves the plane of a 2D domain");
}

double DomainGeometry::exit_time(const Vec3& x, const Vec3& v, Escape sign) const {
  check_direction(v);
  if (!in_closure(x)) throw DomainError("exit_time: point outside the domain");
  const Vec3 d = x - center_;
  const double b = (sign == Escape::forward) ? dot(d, v) : -dot(d, v);
  const double c = dot(d, d) - radius_ * radius_;
  const double disc = std::max(b * b - c, 0.0);
  const double root = std::sqrt(disc);
  double s;
  if (b > 0.0) {
    s = (c < 0.0) ? -c / (b + root) : 0.0;
  } else {
    s = -b + root;
  }
  return std::max(s, 0.0);
}

double DomainGeometry::chord(const Vec3& x, const Vec3& v) const {
  return exit_time(x, v, Escape::forward) + exit_time(x, v, Escape::backward);
}

Vec3 DomainGeometry::outward_normal(const Vec3& xb) const {
  const double r = norm(xb - center_);
  if (std::abs(r - radius_) > kBoundaryTolerance * radius_)
    throw DomainError("outward_normal: point is not on the boundary");
  return (xb - center_) * (1.0 / r);
}

BoundaryPair DomainGeometry::entry_pair(const Vec3& x, const Vec3& v) const {
  const double back = exit_time(x, v, Escape::backward);
  return {x - back * v, v};
}

BoundaryPair DomainGeometry::reversed(const BoundaryPair& pair) const {
  const double len = exit_time(pair.point, pair.direction, Escape::forward);
  return {pair.point + len * pair.direction, -pair.direction};
}

double DomainGeometry::incidence(const BoundaryPair& pair) const {
  check_direction(pair.direction);
  const double c = dot(outward_normal(pair.point), pair.direction);
  if (!(c < 0.0)) throw DomainError("boundary pair is not incoming");
  return -c;
}

double DomainGeometry::incoming_measure() const {
  if (dim_ == 2) return 2.0 * std::numbers::pi * radius_ * 2.0;
  return 4.0 * std::numbers::pi * radius_ * radius_ * std::numbers::pi;
}

namespace {

double frac(double x) { return x - std::floor(x); }

// Unique positive root of x^(d+1) = x + 1 (generalized golden ratio).
double golden(int d) {
  double x = 2.0;
  for (int i = 0; i < 100; ++i) x = std::pow(1.0 + x, 1.0 / (d + 1));
  return x;
}

}  // namespace

std::vector<WeightedPair> DomainGeometry::sample_incoming(std::size_t count, std::uint64_t seed) const {
  if (count == 0) throw ArgumentError("sample_incoming: count must be at least 1");
  const int d = (dim_ == 2) ? 2 : 4;
  const double g = golden(d);
  std::vector<double> alpha(d);
  std::vector<double> shift(d);
  std::mt19937_64 rng(seed);
  for (int j = 0; j < d; ++j) {
    alpha[j] = 1.0 / std::pow(g, j + 1);
    // 53-bit uniform from the raw engine output; avoids distribution
    // implementation differences across standard libraries.
    shift[j] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  }
  constexpr double eps = 1e-12;
  const double w = incoming_measure() / static_cast<double>(count);
  std::vector<WeightedPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double u[4];
    for (int j = 0; j < d; ++j)
      u[j] = std::clamp(frac(shift[j] + static_cast<double>(i + 1) * alpha[j]), eps, 1.0 - eps);
    BoundaryPair p;
    if (dim_ == 2) {
      // Direction angle relative to the inward normal is cosine-distributed,
      // so every sample carries the same dxi-weight.
      const double theta = 2.0 * std::numbers::pi * u[0];
      const Vec3 nu = unit_angle(theta);
      const double psi = std::asin(2.0 * u[1] - 1.0);
      p.point = center_ + radius_ * nu;
      p.direction = -std::cos(psi) * nu + std::sin(psi) * rot90(nu);
    } else {
      const double z = 1.0 - 2.0 * u[0];
      const double phi = 2.0 * std::numbers::pi * u[1];
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      const Vec3 nu{s * std::cos(phi), s * std::sin(phi), z};
      // Orthonormal frame around -nu.
      const Vec3 helper = std::abs(nu.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
      const Vec3 e1 = normalized(cross(nu, helper));
      const Vec3 e2 = cross(nu, e1);
      const double r = std::sqrt(u[2]);
      const double a = 2.0 * std::numbers::pi * u[3];
      p.point = center_ + radius_ * nu;
      p.direction = normalized(-std::sqrt(1.0 - u[2]) * nu + r * std::cos(a) * e1 + r * std::sin(a) * e2);
    }
    out.push_back({p, w});
  }
  return out;
}

}  // namespace qpat
