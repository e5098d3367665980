#include "qpat/medium.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qpat/error.hpp"
#include "qpat/quadrature.hpp"

namespace qpat {

double sphere_measure(int dimension) {
  if (dimension == 2) return 2.0 * std::numbers::pi;
  if (dimension == 3) return 4.0 * std::numbers::pi;
  throw UnsupportedDimensionError("sphere_measure: dimension must be 2 or 3");
}

double hg_phase(double lambda, double g, double sigma_s, int dimension) {
  if (!(g >= 0.0 && g < 1.0)) throw ArgumentError("hg_phase: anisotropy must lie in [0, 1)");
  if (!(lambda >= -1.0 - 1e-12 && lambda <= 1.0 + 1e-12)) throw ArgumentError("hg_phase: cosine outside [-1, 1]");
  if (!(sigma_s >= 0.0)) throw ArgumentError("hg_phase: negative scattering coefficient");
  lambda = std::clamp(lambda, -1.0, 1.0);
  const double q = (1.0 - g) * (1.0 - g) + 2.0 * g * (1.0 - lambda);
  const double num = sigma_s * (1.0 - g * g);
  if (dimension == 2) return num / (2.0 * std::numbers::pi * q);
  if (dimension == 3) return num / (4.0 * std::numbers::pi * q * std::sqrt(q));
  throw UnsupportedDimensionError("hg_phase: dimension must be 2 or 3");
}

OpticalMedium::OpticalMedium(DomainGeometry geometry, CoefficientField sigma, PhaseFunction phase, double sigma0,
                             double bound)
    : geometry_(std::move(geometry)),
      sigma_(std::move(sigma)),
      phase_(std::move(phase)),
      sigma0_(sigma0),
      bound_(bound) {
  if (!(sigma0_ > 0.0)) throw ArgumentError("OpticalMedium: sigma0 must be positive");
  if (!(bound_ >= sigma0_) || !std::isfinite(bound_)) throw ArgumentError("OpticalMedium: bound must be finite and >= sigma0");
  step_ = 0.5 * std::min(sigma_.resolution(), phase_.sigma_s.resolution());
  smooth_segment_ = geometry_.radius() / 8.0;
  validate();
}

OpticalMedium OpticalMedium::from_absorption(DomainGeometry geometry, const CoefficientField& sigma_a,
                                             PhaseFunction phase, double sigma0, double bound) {
  CoefficientField total = phase.kind == PhaseKind::none ? sigma_a : CoefficientField::sum(sigma_a, phase.sigma_s);
  return OpticalMedium(std::move(geometry), std::move(total), std::move(phase), sigma0, bound);
}

OpticalMedium OpticalMedium::with_exterior(CoefficientField exterior) const {
  OpticalMedium m = *this;
  m.exterior_ = std::move(exterior);
  return m;
}

bool OpticalMedium::is_constant() const {
  return sigma_.constant_value().has_value() && phase_.sigma_s.constant_value().has_value() &&
         phase_.g.constant_value().has_value();
}

double OpticalMedium::sigma(const Vec3& x, const Vec3& v) const { return inside(x) ? sigma_(x, v) : exterior_(x, v); }

double OpticalMedium::sigma_s(const Vec3& x) const {
  if (phase_.kind == PhaseKind::none || !inside(x)) return 0.0;
  return phase_.sigma_s(x);
}

double OpticalMedium::anisotropy(const Vec3& x) const {
  return phase_.kind == PhaseKind::henyey_greenstein && inside(x) ? phase_.g(x) : 0.0;
}

double OpticalMedium::k_cos(const Vec3& x, double lambda) const {
  if (!inside(x)) return 0.0;
  switch (phase_.kind) {
    case PhaseKind::none:
      return 0.0;
    case PhaseKind::isotropic:
      return phase_.sigma_s(x) / sphere_measure(dimension());
    case PhaseKind::henyey_greenstein:
      return hg_phase(lambda, phase_.g(x), phase_.sigma_s(x), dimension());
  }
  return 0.0;
}

double OpticalMedium::k(const Vec3& x, const Vec3& v_in, const Vec3& v_out) const {
  return k_cos(x, dot(v_in, v_out));
}

CoefficientValues OpticalMedium::evaluate(const Vec3& x, const Vec3& v, const std::optional<Vec3>& v_out) const {
  CoefficientValues c;
  c.sigma = sigma(x, v);
  c.sigma_s = sigma_s(x);
  c.sigma_a = c.sigma - c.sigma_s;
  if (v_out) c.k = k(x, v, *v_out);
  return c;
}

double OpticalMedium::optical_depth(const Vec3& from, const Vec3& to) const {
  const Vec3 d = to - from;
  const double len = norm(d);
  if (len == 0.0) return 0.0;
  const Vec3 u = d * (1.0 / len);
  if (auto c = sigma_.constant_value(); c && inside(from) && inside(to)) return *c * len;
  if (std::isfinite(step_)) {
    // Gridded data: piecewise-linear kinks, so Richardson-extrapolated midpoint on the grid scale.
    const long n = std::max(1L, static_cast<long>(std::ceil(len / step_)));
    auto midpoint = [&](long cells) {
      const double h = len / static_cast<double>(cells);
      double s = 0.0;
      for (long i = 0; i < cells; ++i) s += sigma(from + ((static_cast<double>(i) + 0.5) * h) * u, u);
      return s * h;
    };
    return (4.0 * midpoint(2 * n) - midpoint(n)) / 3.0;
  }
  const int segments = std::max(1, static_cast<int>(std::ceil(len / smooth_segment_)));
  return quad::composite_gauss([&](double s) { return sigma(from + s * u, u); }, 0.0, len, segments, 12);
}

double OpticalMedium::optical_depth_coarse(const Vec3& from, const Vec3& to) const {
  if (std::isfinite(step_) || sigma_.constant_value()) return optical_depth(from, to);
  const Vec3 d = to - from;
  const double len = norm(d);
  if (len == 0.0) return 0.0;
  const Vec3 u = d * (1.0 / len);
  const int segments = std::max(1, static_cast<int>(std::ceil(len / (2.0 * smooth_segment_))));
  return quad::composite_gauss([&](double s) { return sigma(from + s * u, u); }, 0.0, len, segments, 6);
}

double OpticalMedium::attenuation(std::span<const Vec3> path) const {
  if (path.size() < 2) throw ArgumentError("attenuation: path needs at least two points");
  double depth = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) depth += optical_depth(path[i + 1], path[i]);
  return std::exp(-depth);
}

void OpticalMedium::validate() {
  const int n = dimension();
  const double r = geometry_.radius();
  const Vec3 c = geometry_.center();
  std::vector<Vec3> points;
  const int m = (n == 2) ? 33 : 13;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int l = 0; l < (n == 2 ? 1 : m); ++l) {
        auto coord = [&](int q) { return -r + 2.0 * r * (q + 0.5) / m; };
        Vec3 p = c + Vec3{coord(i), coord(j), n == 2 ? 0.0 : coord(l)};
        if (geometry_.contains(p)) points.push_back(p);
      }
  points.push_back(c);
  std::vector<Vec3> dirs;
  if (n == 2) {
    for (int a = 0; a < 8; ++a) dirs.push_back(unit_angle(2.0 * std::numbers::pi * a / 8.0));
  } else {
    dirs = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    const double s = 1.0 / std::sqrt(3.0);
    for (int a = 0; a < 8; ++a) dirs.push_back({(a & 1 ? s : -s), (a & 2 ? s : -s), (a & 4 ? s : -s)});
  }
  bounds_ = {};
  bounds_.sigma_a_min = bounds_.sigma_s_min = std::numeric_limits<double>::infinity();
  auto fail = [](const std::string& what, const Vec3& p) {
    std::ostringstream os;
    os << "OpticalMedium: " << what << " at (" << p.x << ", " << p.y << ", " << p.z << ")";
    throw ArgumentError(os.str());
  };
  const double slack = 1e-12;
  for (const Vec3& p : points) {
    const double ss = sigma_s(p);
    if (!(ss >= 0.0)) fail("negative scattering coefficient", p);
    if (phase_.kind == PhaseKind::henyey_greenstein) {
      const double g = phase_.g(p);
      if (!(g >= 0.0 && g < 1.0)) fail("anisotropy outside [0, 1)", p);
    }
    const double kmax = std::max(k_cos(p, 1.0), k_cos(p, -1.0));
    if (!(kmax <= bound_ * (1 + slack))) fail("scattering kernel exceeds the bound", p);
    bounds_.sigma_s_min = std::min(bounds_.sigma_s_min, ss);
    bounds_.sigma_s_max = std::max(bounds_.sigma_s_max, ss);
    bounds_.k_max = std::max(bounds_.k_max, kmax);
    for (const Vec3& v : dirs) {
      const double s = sigma(p, v);
      if (!std::isfinite(s) || s < 0.0 || s > bound_ * (1 + slack)) fail("sigma outside [0, bound]", p);
      const double sa = s - ss;
      if (sa < sigma0_ * (1 - slack)) fail("absorption below sigma0", p);
      bounds_.sigma_max = std::max(bounds_.sigma_max, s);
      bounds_.sigma_a_min = std::min(bounds_.sigma_a_min, sa);
      bounds_.sigma_a_max = std::max(bounds_.sigma_a_max, sa);
    }
  }
}

}  // namespace qpat
