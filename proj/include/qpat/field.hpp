#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qpat/vec.hpp"

namespace qpat {

/// Regular Cartesian grid of samples; row-major with the first axis slowest
/// (index = (i * ny + j) * nz + k). `extent` holds (min, max) per axis.
struct GridData {
  int dimension = 2;
  std::vector<std::size_t> dims;
  std::vector<double> extent;
  std::vector<double> values;

  std::size_t size() const;
  double spacing(int axis) const;
  double min_spacing() const;
  void validate() const;
};

/// Scalar coefficient on R^n, optionally direction dependent.
class CoefficientField {
 public:
  using Fn = std::function<double(const Vec3& x, const Vec3& v)>;

  static CoefficientField constant(double value);
  /// sum_i coeffs[i] * |x - center|^i
  static CoefficientField radial_polynomial(Vec3 center, std::vector<double> coeffs);
  /// base + amplitude * exp(-|x - center|^2 / (2 width^2))
  static CoefficientField gaussian_bump(double base, double amplitude, Vec3 center, double width);
  /// Bilinear (2D) or trilinear (3D) interpolation; queries are clamped to the grid extent.
  static CoefficientField gridded(GridData grid);
  static CoefficientField analytic(std::function<double(const Vec3&)> fn, std::string label);
  /// Direction-dependent analytic profile sigma(x, v).
  static CoefficientField directional(Fn fn, std::string label);

  /// Pointwise sum of two fields.
  static CoefficientField sum(const CoefficientField& a, const CoefficientField& b);
  CoefficientField plus_constant(double c) const;
  CoefficientField scaled(double s) const;

  double operator()(const Vec3& x, const Vec3& v = {}) const { return fn_(x, v); }

  std::optional<double> constant_value() const { return constant_; }
  bool is_directional() const { return directional_; }
  /// Grid spacing for gridded fields (and sums containing one); +inf otherwise.
  double resolution() const { return resolution_; }
  const std::string& label() const { return label_; }

 private:
  CoefficientField(Fn fn, std::string label) : fn_(std::move(fn)), label_(std::move(label)) {}
  Fn fn_;
  std::string label_;
  std::optional<double> constant_;
  bool directional_ = false;
  double resolution_ = std::numeric_limits<double>::infinity();
};

}  // namespace qpat
