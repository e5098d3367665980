#include "qpat/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qpat/error.hpp"
#include "qpat/parallel.hpp"
#include "qpat/quadrature.hpp"

namespace qpat {

namespace {

constexpr double pi = std::numbers::pi;

double cross2(const Vec3& a, const Vec3& b) { return a.x * b.y - a.y * b.x; }

struct RayGeometry {
  double tau;
  double foot;  // (x - x') . v'
  double perp;  // |(x - x')_perp|
};

RayGeometry ray_geometry(const OpticalMedium& m, const Vec3& x, const BoundaryPair& pair) {
  const auto& geo = m.geometry();
  geo.incidence(pair);
  if (!geo.in_closure(x)) throw DomainError("kernel evaluation point outside the domain");
  const Vec3 d = x - pair.point;
  const double perp = norm(perp_part(d, pair.direction));
  if (perp <= kOnRayTolerance) {
    std::ostringstream os;
    os << "kernel evaluated on the source ray (transverse distance " << perp << ")";
    throw SingularityError(os.str());
  }
  return {geo.exit_time(pair.point, pair.direction), dot(d, pair.direction), perp};
}

}  // namespace

RayDepth::RayDepth(const OpticalMedium& m, const BoundaryPair& pair, double tau) {
  if (auto c = m.sigma_field().constant_value()) {
    constant_ = *c;
    return;
  }
  const double r = m.geometry().radius();
  const auto segments = static_cast<std::size_t>(std::clamp(std::ceil(tau / (r / 256.0)), 64.0, 4096.0));
  ts_.resize(segments + 1);
  depth_.resize(segments + 1);
  Vec3 prev = pair.point;
  for (std::size_t i = 0; i <= segments; ++i) {
    ts_[i] = tau * static_cast<double>(i) / static_cast<double>(segments);
    const Vec3 p = pair.point + ts_[i] * pair.direction;
    depth_[i] = i == 0 ? 0.0 : depth_[i - 1] + m.optical_depth(prev, p);
    prev = p;
  }
}

double RayDepth::operator()(double t) const {
  if (ts_.empty()) return constant_ * t;
  return quad::interpolate_cubic(ts_, depth_, t);
}

LineProfile eta_profile(const OpticalMedium& medium, const BoundaryPair& pair, std::span<const double> ts) {
  medium.geometry().incidence(pair);
  const double tau = medium.geometry().exit_time(pair.point, pair.direction);
  const double slack = 1e-12 * medium.geometry().radius();
  LineProfile out{pair, {ts.begin(), ts.end()}, {}};
  out.values.reserve(ts.size());
  double depth = 0.0;
  double t_prev = 0.0;
  for (double t : ts) {
    if (!(t >= -slack && t <= tau + slack)) throw ArgumentError("eta_profile: time outside the chord");
    t = std::clamp(t, 0.0, tau);
    const Vec3 a = pair.point + t_prev * pair.direction;
    const Vec3 b = pair.point + t * pair.direction;
    // Times need not be sorted: accumulate signed segment depths.
    depth += t >= t_prev ? medium.optical_depth(a, b) : -medium.optical_depth(b, a);
    t_prev = t;
    out.values.push_back(medium.sigma_a(b, pair.direction) * std::exp(-depth));
  }
  return out;
}

double alpha1(const OpticalMedium& medium, const Vec3& x, const BoundaryPair& pair, const KernelQuadrature& q) {
  const RayGeometry rg = ray_geometry(medium, x, pair);
  if (!medium.has_scattering()) return 0.0;
  const int n = medium.dimension();
  const RayDepth ray(medium, pair, rg.tau);
  const Vec3& vp = pair.direction;
  auto integrand = [&](double t) {
    const Vec3 y = pair.point + t * vp;
    const Vec3 w = x - y;
    const double rho = norm(w);
    const Vec3 v = w * (1.0 / rho);
    const double k = medium.k_cos(y, dot(vp, v));
    if (k == 0.0) return 0.0;
    const double e = std::exp(-(medium.optical_depth(y, x) + ray(t)));
    return medium.sigma_a(x, v) * e * k / (n == 2 ? rho : rho * rho);
  };
  const auto bp = quad::graded_breakpoints(0.0, rg.tau, rg.foot, rg.perp, q.grading_levels);
  const auto r = quad::integrate(integrand, bp, {q.abs_tol, q.rel_tol, q.max_intervals});
  return medium.geometry().incidence(pair) * r.value;
}

double alpha2(const OpticalMedium& medium, const Vec3& x, const BoundaryPair& pair, const Alpha2Quadrature& q) {
  if (medium.dimension() != 2) throw UnsupportedDimensionError("alpha2 is implemented for n = 2 only");
  const auto& geo = medium.geometry();
  const double incidence = geo.incidence(pair);
  if (!geo.in_closure(x)) throw DomainError("alpha2: point outside the domain");
  if (norm(x - pair.point) <= kOnRayTolerance) throw ArgumentError("alpha2: x coincides with x'");
  if (!medium.has_scattering()) return 0.0;
  const Vec3& vp = pair.direction;
  const Vec3& xp = pair.point;
  const double tau = geo.exit_time(xp, vp);
  const RayDepth ray(medium, pair, tau);
  const Vec3 z0 = x;

  // Inner integral over the source ray for a fixed first scattering point z1.
  // With t = foot + perp sinh(s) the 1/|y - z1| factor becomes exactly the
  // Jacobian, leaving a smooth integrand in s.
  auto inner = [&](const Vec3& z1, const Vec3& v0) {
    const Vec3 d = z1 - xp;
    const double foot = dot(d, vp);
    const double perp = std::abs(cross2(vp, d));
    if (perp < 1e-300) return 0.0;
    auto f = [&](double s) {
      const double t = foot + perp * std::sinh(s);
      const Vec3 y = xp + t * vp;
      const Vec3 w = z1 - y;
      const double rho = norm(w);
      const Vec3 v1 = w * (1.0 / rho);
      const double k = medium.k_cos(y, dot(vp, v1)) * medium.k_cos(z1, dot(v1, v0));
      if (k == 0.0) return 0.0;
      return std::exp(-(medium.optical_depth_coarse(y, z1) + ray(std::clamp(t, 0.0, tau)))) * k;
    };
    const double lo = std::asinh(-foot / perp), hi = std::asinh((tau - foot) / perp);
    std::vector<double> bp{lo};
    if (lo < 0.0 && hi > 0.0) bp.push_back(0.0);
    bp.push_back(hi);
    return quad::integrate(f, bp, {1e-15, 0.1 * q.rel_tol, q.max_intervals}).value;
  };

  // Middle integral along the ray from z0 in direction u (the 1/|z0 - z1| factor
  // cancels against the polar Jacobian). The inner integral has a log
  // singularity where this ray crosses the source ray; a cubic change of
  // variables clusters nodes there.
  const double s0 = cross2(vp, z0 - xp);
  auto middle = [&](double phi) {
    const Vec3 u = unit_angle(phi);
    const Vec3 v0 = -u;
    const double big_r = geo.exit_time(z0, u);
    if (big_r <= 0.0) return 0.0;
    const double sa = medium.sigma_a(z0, v0);
    auto g = [&](double r) {
      const Vec3 z1 = z0 + r * u;
      return sa * std::exp(-medium.optical_depth_coarse(z1, z0)) * inner(z1, v0);
    };
    const quad::Tolerance tol{1e-15, 0.3 * q.rel_tol, q.max_intervals};
    const double su = cross2(vp, u);
    const double rs = su != 0.0 ? -s0 / su : -1.0;
    double total = 0.0;
    auto clustered = [&](double at, double other) {
      // r = at + (other - at) w^3, w in [0, 1]
      const double span = other - at;
      auto h = [&](double w) { return g(at + span * w * w * w) * 3.0 * w * w; };
      return std::abs(span) * quad::integrate(h, 0.0, 1.0, tol).value;
    };
    if (rs > 0.0 && rs < big_r) {
      total += clustered(rs, 0.0) + clustered(rs, big_r);
    } else if (rs >= big_r) {
      total += clustered(big_r, 0.0);
    } else {
      total += quad::integrate(g, 0.0, big_r, tol).value;
    }
    return total;
  };

  // Breakpoints in phi: directions parallel to the ray and toward the chord ends.
  const double base = std::atan2(vp.y, vp.x);
  auto wrap = [&](double a) {
    a = std::fmod(a - base, 2 * pi);
    if (a < 0) a += 2 * pi;
    return base + a;
  };
  std::vector<double> bp{base, base + pi, base + 2 * pi};
  for (const Vec3& end : {xp, xp + tau * vp}) {
    const Vec3 d = end - z0;
    if (norm(d) > 1e-12) bp.push_back(wrap(std::atan2(d.y, d.x)));
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end(), [](double a, double b) { return b - a < 1e-13; }), bp.end());
  const auto r = quad::integrate(middle, bp, {1e-15, q.rel_tol, q.max_intervals});
  return incidence * r.value;
}

double weight_w(const DomainGeometry& geometry, const Vec3& x, const BoundaryPair& pair) {
  const Vec3& vp = pair.direction;
  const Vec3 d = x - pair.point;
  const double perp = norm(perp_part(d, vp));
  if (perp <= kOnRayTolerance) throw SingularityError("weight_w: point on the source ray");
  const int n = geometry.dimension();
  if (n != 2) return std::pow(perp, 2.0 - n);
  const double tau = geometry.exit_time(pair.point, vp);
  const Vec3 a = d - tau * vp;
  // |w| - w.v' = |w_perp|^2 / (|w| + w.v'), stable when w is nearly along v'.
  auto gap = [&](const Vec3& w) {
    const double wv = dot(w, vp);
    const double nw = norm(w);
    return wv > 0.0 ? perp * perp / (nw + wv) : nw - wv;
  };
  return 1.0 + std::log(gap(a) / gap(d));
}

KernelColumn kernel_column(const OpticalMedium& medium, const BoundaryPair& pair, std::span<const Vec3> points,
                           bool with_alpha2) {
  KernelColumn col{pair, {points.begin(), points.end()}, std::vector<double>(points.size())};
  const bool second = with_alpha2 && medium.dimension() == 2;
  parallel_for(points.size(), [&](std::size_t i) {
    try {
      double v = alpha1(medium, points[i], pair);
      if (second) v += alpha2(medium, points[i], pair);
      col.values[i] = v;
    } catch (const SingularityError&) {
      col.values[i] = std::numeric_limits<double>::infinity();
    }
  });
  return col;
}

double abs_trapezoid(std::span<const double> ts, std::span<const double> f) {
  if (ts.size() != f.size()) throw ArgumentError("abs_trapezoid: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double h = ts[i + 1] - ts[i];
    const double a = f[i], b = f[i + 1];
    if ((a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0)) {
      const double frac = a / (a - b);
      s += 0.5 * h * (frac * std::abs(a) + (1 - frac) * std::abs(b));
    } else {
      s += 0.5 * h * (std::abs(a) + std::abs(b));
    }
  }
  return s;
}

ColumnDistance kernel_column_distance(const OpticalMedium& a, const OpticalMedium& b, const BoundaryPair& pair,
                                      std::span<const Vec3> points, std::span<const double> volumes,
                                      bool with_alpha2, std::size_t chord_samples) {
  if (!(a.geometry() == b.geometry())) throw ArgumentError("kernel_column_distance: media on different domains");
  if (points.size() != volumes.size()) throw ArgumentError("kernel_column_distance: points/volumes size mismatch");
  if (chord_samples < 2) throw ArgumentError("kernel_column_distance: need at least two chord samples");
  const auto& geo = a.geometry();
  const double inc = geo.incidence(pair);
  const double tau = geo.exit_time(pair.point, pair.direction);
  std::vector<double> ts(chord_samples);
  for (std::size_t i = 0; i < chord_samples; ++i)
    ts[i] = tau * static_cast<double>(i) / static_cast<double>(chord_samples - 1);
  const auto ea = eta_profile(a, pair, ts);
  const auto eb = eta_profile(b, pair, ts);
  std::vector<double> diff(chord_samples);
  for (std::size_t i = 0; i < chord_samples; ++i) diff[i] = ea.values[i] - eb.values[i];

  ColumnDistance out;
  out.ballistic = abs_trapezoid(ts, diff);
  const auto ca = kernel_column(a, pair, points, with_alpha2);
  const auto cb = kernel_column(b, pair, points, with_alpha2);
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (std::isinf(ca.values[i]) || std::isinf(cb.values[i])) {
      ++out.skipped;
      continue;
    }
    s += volumes[i] * std::abs(ca.values[i] - cb.values[i]);
  }
  out.scattering = s / inc;
  out.column_norm = out.ballistic + out.scattering;
  return out;
}

}  // namespace qpat
