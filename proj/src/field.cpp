#include "qpat/field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "qpat/error.hpp"

namespace qpat {

std::size_t GridData::size() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

double GridData::spacing(int axis) const {
  const auto n = dims.at(axis);
  return n > 1 ? (extent.at(2 * axis + 1) - extent.at(2 * axis)) / static_cast<double>(n - 1) : 0.0;
}

double GridData::min_spacing() const {
  double h = std::numeric_limits<double>::infinity();
  for (int a = 0; a < dimension; ++a)
    if (dims[a] > 1) h = std::min(h, spacing(a));
  return h;
}

void GridData::validate() const {
  if (dimension != 2 && dimension != 3) throw ArgumentError("grid dimension must be 2 or 3");
  if (dims.size() != static_cast<std::size_t>(dimension) || extent.size() != 2 * dims.size())
    throw ArgumentError("grid dims/extent do not match its dimension");
  for (int a = 0; a < dimension; ++a) {
    if (dims[a] < 2) throw ArgumentError("grid needs at least two samples per axis");
    if (!(extent[2 * a + 1] > extent[2 * a])) throw ArgumentError("grid extent must be increasing");
  }
  if (values.size() != size()) throw ArgumentError("grid payload size does not match dims");
  for (double v : values)
    if (!std::isfinite(v)) throw ArgumentError("grid contains non-finite values");
}

CoefficientField CoefficientField::constant(double value) {
  std::ostringstream os;
  os << "constant(" << value << ")";
  CoefficientField f([value](const Vec3&, const Vec3&) { return value; }, os.str());
  f.constant_ = value;
  return f;
}

CoefficientField CoefficientField::radial_polynomial(Vec3 center, std::vector<double> coeffs) {
  if (coeffs.empty()) throw ArgumentError("radial_polynomial: no coefficients");
  auto fn = [center, coeffs](const Vec3& x, const Vec3&) {
    const double r = norm(x - center);
    double s = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) s = s * r + *it;
    return s;
  };
  CoefficientField f(fn, "radial_polynomial");
  if (std::all_of(coeffs.begin() + 1, coeffs.end(), [](double c) { return c == 0.0; })) f.constant_ = coeffs[0];
  return f;
}

CoefficientField CoefficientField::gaussian_bump(double base, double amplitude, Vec3 center, double width) {
  if (!(width > 0.0)) throw ArgumentError("gaussian_bump: width must be positive");
  const double inv = 1.0 / (2.0 * width * width);
  CoefficientField f(
      [=](const Vec3& x, const Vec3&) {
        const Vec3 d = x - center;
        return base + amplitude * std::exp(-dot(d, d) * inv);
      },
      "gaussian_bump");
  if (amplitude == 0.0) f.constant_ = base;
  return f;
}

CoefficientField CoefficientField::gridded(GridData grid) {
  grid.validate();
  auto g = std::make_shared<const GridData>(std::move(grid));
  auto fn = [g](const Vec3& x, const Vec3&) {
    const double coord[3] = {x.x, x.y, x.z};
    std::size_t i0[3] = {0, 0, 0};
    double t[3] = {0, 0, 0};
    for (int a = 0; a < g->dimension; ++a) {
      const double lo = g->extent[2 * a];
      const double hi = g->extent[2 * a + 1];
      const std::size_t n = g->dims[a];
      const double u = (std::clamp(coord[a], lo, hi) - lo) / (hi - lo) * static_cast<double>(n - 1);
      std::size_t i = static_cast<std::size_t>(std::floor(u));
      if (i >= n - 1) i = n - 2;
      i0[a] = i;
      t[a] = u - static_cast<double>(i);
    }
    auto at = [&](std::size_t i, std::size_t j, std::size_t k) {
      if (g->dimension == 2) return g->values[i * g->dims[1] + j];
      return g->values[(i * g->dims[1] + j) * g->dims[2] + k];
    };
    if (g->dimension == 2) {
      const double v00 = at(i0[0], i0[1], 0), v01 = at(i0[0], i0[1] + 1, 0);
      const double v10 = at(i0[0] + 1, i0[1], 0), v11 = at(i0[0] + 1, i0[1] + 1, 0);
      return (1 - t[0]) * ((1 - t[1]) * v00 + t[1] * v01) + t[0] * ((1 - t[1]) * v10 + t[1] * v11);
    }
    double s = 0.0;
    for (int di = 0; di < 2; ++di)
      for (int dj = 0; dj < 2; ++dj)
        for (int dk = 0; dk < 2; ++dk) {
          const double w = (di ? t[0] : 1 - t[0]) * (dj ? t[1] : 1 - t[1]) * (dk ? t[2] : 1 - t[2]);
          s += w * at(i0[0] + di, i0[1] + dj, i0[2] + dk);
        }
    return s;
  };
  CoefficientField f(fn, "gridded");
  f.resolution_ = g->min_spacing();
  return f;
}

CoefficientField CoefficientField::analytic(std::function<double(const Vec3&)> fn, std::string label) {
  return CoefficientField([fn = std::move(fn)](const Vec3& x, const Vec3&) { return fn(x); }, std::move(label));
}

CoefficientField CoefficientField::directional(Fn fn, std::string label) {
  CoefficientField f(std::move(fn), std::move(label));
  f.directional_ = true;
  return f;
}

CoefficientField CoefficientField::sum(const CoefficientField& a, const CoefficientField& b) {
  CoefficientField f([fa = a.fn_, fb = b.fn_](const Vec3& x, const Vec3& v) { return fa(x, v) + fb(x, v); },
                     a.label_ + "+" + b.label_);
  if (a.constant_ && b.constant_) f.constant_ = *a.constant_ + *b.constant_;
  f.directional_ = a.directional_ || b.directional_;
  f.resolution_ = std::min(a.resolution_, b.resolution_);
  return f;
}

CoefficientField CoefficientField::plus_constant(double c) const { return sum(*this, constant(c)); }

CoefficientField CoefficientField::scaled(double s) const {
  CoefficientField f([fa = fn_, s](const Vec3& x, const Vec3& v) { return s * fa(x, v); }, label_ + "*s");
  if (constant_) f.constant_ = s * *constant_;
  f.directional_ = directional_;
  f.resolution_ = resolution_;
  return f;
}

}  // namespace qpat
