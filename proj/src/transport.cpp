#include "qpat/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qpat/error.hpp"
#include "qpat/parallel.hpp"
#include "qpat/quadrature.hpp"

namespace qpat {

namespace {

constexpr double pi = std::numbers::pi;

double wrap_angle(double a) {
  a = std::remainder(a, 2 * pi);
  return a;
}

double cross2(const Vec3& a, const Vec3& b) { return a.x * b.y - a.y * b.x; }

// Integral over [0, len] of a linear source (sq -> sp) attenuated to the far end,
// with optical thickness tau.
double linear_source_step(double sq, double sp, double tau, double len) {
  if (tau < 1e-4) {
    const double t2 = tau * tau;
    const double wp = 0.5 - tau / 6 + t2 / 24;
    const double wq = 0.5 - tau / 3 + t2 / 8;
    return len * (sp * wp + sq * wq);
  }
  const double a = std::exp(-tau);
  const double wq = (1 - a - tau * a) / (tau * tau);
  const double wp = (1 - a) / tau - wq;
  return len * (sp * wp + sq * wq);
}

}  // namespace

double AngularGrid::weight() const { return 2 * pi / count; }
double AngularGrid::angle(int j) const { return 2 * pi * j / count; }
Vec3 AngularGrid::direction(int j) const { return unit_angle(angle(j)); }

SpatialGrid::SpatialGrid(const DomainGeometry& geometry, int cells_per_side)
    : geometry_(geometry), n_(cells_per_side) {
  if (geometry.dimension() != 2) throw UnsupportedDimensionError("transport grid: n = 2 only");
  if (n_ < 4) throw ArgumentError("transport grid: need at least 4 cells per side");
  h_ = geometry.diameter() / n_;
  origin_ = geometry.center() - Vec3{geometry.radius(), geometry.radius()};
  mask_.resize(cell_count());
  for (std::size_t c = 0; c < cell_count(); ++c) mask_[c] = geometry.contains(center(c)) ? 1 : 0;
}

Vec3 SpatialGrid::center(int i, int j) const { return origin_ + Vec3{(i + 0.5) * h_, (j + 0.5) * h_}; }

std::size_t SpatialGrid::active_count() const { return std::count(mask_.begin(), mask_.end(), 1); }

double TransportField::l1_norm() const {
  double s = 0.0;
  const std::size_t nv = angles.count;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    if (!grid.active(c)) continue;
    for (std::size_t j = 0; j < nv; ++j) s += std::abs(values[c * nv + j]);
  }
  return s * grid.cell_volume() * angles.weight();
}

double EnergyMap::integral() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * grid.cell_volume();
}

GridData EnergyMap::to_grid() const {
  GridData g;
  g.dimension = 2;
  const auto n = static_cast<std::size_t>(grid.side());
  g.dims = {n, n};
  const Vec3 lo = grid.center(0, 0), hi = grid.center(grid.side() - 1, grid.side() - 1);
  g.extent = {lo.x, hi.x, lo.y, hi.y};
  g.values = values;
  return g;
}

double EnergyMap::sample(const Vec3& x) const {
  const double h = grid.spacing();
  const Vec3 o = grid.center(0, 0);
  const int n = grid.side();
  const double u = std::clamp((x.x - o.x) / h, 0.0, n - 1.0);
  const double v = std::clamp((x.y - o.y) / h, 0.0, n - 1.0);
  const int i = std::min(static_cast<int>(u), n - 2), j = std::min(static_cast<int>(v), n - 2);
  const double tu = u - i, tv = v - j;
  auto at = [&](int a, int b) { return values[grid.index(a, b)]; };
  return (1 - tu) * ((1 - tv) * at(i, j) + tv * at(i, j + 1)) + tu * ((1 - tv) * at(i + 1, j) + tv * at(i + 1, j + 1));
}

BoundarySource BoundarySource::zero() { return {}; }

BoundarySource BoundarySource::uniform(double value) {
  if (!(value >= 0.0)) throw ArgumentError("boundary source must be nonnegative");
  return from_density([value](const Vec3&, const Vec3&) { return value; });
}

BoundarySource BoundarySource::from_beam(Beam b) {
  if (!(b.width_s > 0.0) || !(b.width_theta > 0.0)) throw ArgumentError("beam widths must be positive");
  BoundarySource s;
  s.beam = b;
  return s;
}

BoundarySource BoundarySource::from_density(std::function<double(const Vec3&, const Vec3&)> f) {
  BoundarySource s;
  s.density = std::move(f);
  return s;
}

double BoundarySource::operator()(const Vec3& xb, const Vec3& v) const {
  if (density) return density(xb, v);
  return 0.0;
}

TransportSolver::TransportSolver(const OpticalMedium& medium, const TransportOptions& options)
    : medium_(medium), opt_(options), grid_(medium.geometry(), options.cells_per_side), angles_{options.angles} {
  if (opt_.angles < 8) throw ArgumentError("transport: need at least 8 directions");
  if (!(opt_.tol > 0.0) || opt_.max_orders < 1) throw ArgumentError("transport: invalid tolerance or order limit");
  const std::size_t nv = angles_.count;
  const std::size_t cells = grid_.cell_count();
  sigma_.assign(cells * nv, 0.0);
  sigma_a_.assign(cells * nv, 0.0);
  kernel_.assign(cells * nv, 0.0);
  const double dtheta = angles_.weight();
  parallel_for(cells, [&](std::size_t c) {
    if (!grid_.active(c)) return;
    const Vec3 x = grid_.center(c);
    for (std::size_t j = 0; j < nv; ++j) {
      const Vec3 v = angles_.direction(static_cast<int>(j));
      sigma_[c * nv + j] = medium_.sigma(x, v);
      sigma_a_[c * nv + j] = medium_.sigma_a(x, v);
    }
    if (!medium_.has_scattering()) return;
    double sum = 0.0;
    for (std::size_t d = 0; d < nv; ++d) {
      const double k = medium_.k_cos(x, std::cos(angles_.angle(static_cast<int>(d)))) * dtheta;
      kernel_[c * nv + d] = k;
      sum += k;
    }
    // Renormalise so the discrete kernel scatters exactly sigma_s.
    const double ss = medium_.sigma_s(x);
    if (sum > 0.0)
      for (std::size_t d = 0; d < nv; ++d) kernel_[c * nv + d] *= ss / sum;
  });
}

TransportField TransportSolver::ballistic(const BoundarySource& source) const {
  const std::size_t nv = angles_.count;
  TransportField u{grid_, angles_, std::vector<double>(grid_.cell_count() * nv, 0.0)};
  const auto& geo = medium_.geometry();
  if (source.density) {
    parallel_for(grid_.cell_count(), [&](std::size_t c) {
      if (!grid_.active(c)) return;
      const Vec3 x = grid_.center(c);
      for (std::size_t j = 0; j < nv; ++j) {
        const Vec3 v = angles_.direction(static_cast<int>(j));
        const Vec3 xb = x - geo.exit_time(x, v, Escape::backward) * v;
        const double phi = source.density(xb, v);
        if (phi != 0.0) u.values[c * nv + j] = phi * std::exp(-medium_.optical_depth(xb, x));
      }
    });
    return u;
  }
  if (!source.beam) return u;

  const Beam& b = *source.beam;
  const double inc0 = geo.incidence(b.pair);
  const Vec3 c0 = geo.center();
  const double big_r = geo.radius();
  const double alpha0 = std::atan2(b.pair.point.y - c0.y, b.pair.point.x - c0.x);
  const double theta0 = std::atan2(b.pair.direction.y, b.pair.direction.x);
  const double norm_const = 1.0 / (2 * pi * b.width_s * b.width_theta * inc0);
  const double h = grid_.spacing();
  const double dtheta = angles_.weight();
  const double reach = 8.0 * (b.width_s + 2 * big_r * b.width_theta) + 1.5 * h;
  const int ns = opt_.beam_supersample;
  const auto& rule = quad::gauss_legendre(opt_.angle_supersample);

  auto phi = [&](const Vec3& xb, double theta) {
    const double s = big_r * wrap_angle(std::atan2(xb.y - c0.y, xb.x - c0.x) - alpha0);
    const double dt = wrap_angle(theta - theta0);
    return norm_const * std::exp(-0.5 * (s * s / (b.width_s * b.width_s) + dt * dt / (b.width_theta * b.width_theta)));
  };

  std::vector<int> dirs;
  for (int j = 0; j < angles_.count; ++j)
    if (std::abs(wrap_angle(angles_.angle(j) - theta0)) <= 0.5 * dtheta + 8.0 * b.width_theta) dirs.push_back(j);

  parallel_for(grid_.cell_count(), [&](std::size_t c) {
    if (!grid_.active(c)) return;
    const Vec3 x = grid_.center(c);
    if (std::abs(cross2(b.pair.direction, x - b.pair.point)) > reach) return;
    for (int j : dirs) {
      // Angular window of this cell intersected with +-8 widths of the beam.
      const double off = wrap_angle(angles_.angle(j) - theta0);
      const double a0 = std::max(off - 0.5 * dtheta, -8.0 * b.width_theta);
      const double a1 = std::min(off + 0.5 * dtheta, 8.0 * b.width_theta);
      if (!(a1 > a0)) continue;
      double acc = 0.0;
      for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
        const double theta = theta0 + 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * rule.nodes[g];
        const Vec3 v = unit_angle(theta);
        double cell = 0.0;
        for (int a = 0; a < ns; ++a)
          for (int q = 0; q < ns; ++q) {
            const Vec3 p = x + Vec3{((a + 0.5) / ns - 0.5) * h, ((q + 0.5) / ns - 0.5) * h};
            if (!geo.contains(p)) continue;
            const Vec3 xb = p - geo.exit_time(p, v, Escape::backward) * v;
            const double f = phi(xb, theta);
            if (f < 1e-300) continue;
            cell += f * std::exp(-medium_.optical_depth(xb, p));
          }
        acc += 0.5 * rule.weights[g] * cell / (ns * ns);
      }
      acc *= (a1 - a0) / dtheta;
      u.values[c * nv + j] = acc;
    }
  });
  return u;
}

std::vector<double> TransportSolver::scatter(const TransportField& u) const {
  const std::size_t nv = angles_.count;
  std::vector<double> s(u.values.size(), 0.0);
  if (!medium_.has_scattering()) return s;
  parallel_for(grid_.cell_count(), [&](std::size_t c) {
    if (!grid_.active(c)) return;
    const double* k = &kernel_[c * nv];
    const double* in = &u.values[c * nv];
    double* out = &s[c * nv];
    for (std::size_t i = 0; i < nv; ++i) {
      double acc = 0.0;
      for (std::size_t d = 0; d < nv; ++d) acc += k[d] * in[(i + nv - d) % nv];
      out[i] = acc;
    }
  });
  return s;
}

TransportField TransportSolver::sweep(const std::vector<double>& source) const {
  const std::size_t nv = angles_.count;
  if (source.size() != grid_.cell_count() * nv) throw ArgumentError("sweep: source size does not match the grid");
  TransportField w{grid_, angles_, std::vector<double>(source.size(), 0.0)};
  const int n = grid_.side();
  const double h = grid_.spacing();
  const auto& geo = medium_.geometry();
  parallel_for(nv, [&](std::size_t jd) {
    const Vec3 v = angles_.direction(static_cast<int>(jd));
    const double c = v.x, s = v.y;
    const int di = c >= 0 ? -1 : 1;  // upstream neighbour offsets
    const int dj = s >= 0 ? -1 : 1;
    const bool xface = std::abs(c) >= std::abs(s);
    const double len = xface ? h / std::abs(c) : h / std::abs(s);
    const double wb = xface ? std::abs(s) / std::abs(c) : std::abs(c) / std::abs(s);
    auto idx = [&](int i, int j) { return grid_.index(i, j) * nv + jd; };
    auto in_range = [&](int i, int j) { return i >= 0 && j >= 0 && i < n && j < n; };
    for (int ii = 0; ii < n; ++ii) {
      const int i = di < 0 ? ii : n - 1 - ii;
      for (int jj = 0; jj < n; ++jj) {
        const int j = dj < 0 ? jj : n - 1 - jj;
        const std::size_t cell = grid_.index(i, j);
        const std::size_t p = cell * nv + jd;
        const int ai = xface ? i + di : i, aj = xface ? j : j + dj;
        const int bi = i + di, bj = j + dj;
        if (!grid_.active(cell)) {
          // Ghost node outside the disk: carries the exiting field without
          // attenuation so grazing characteristics see the right upstream value.
          double u = 0.0;
          if (in_range(ai, aj)) u += (1 - wb) * w.values[idx(ai, aj)];
          if (in_range(bi, bj)) u += wb * w.values[idx(bi, bj)];
          w.values[p] = u;
          continue;
        }
        const double sp = source[p], sig_p = sigma_[p];
        const Vec3 x = grid_.center(cell);
        if (geo.distance_to_boundary(x) < 2 * h) {
          const double back = geo.exit_time(x, v, Escape::backward);
          if (back < len) {
            const double tau = sig_p * back;
            w.values[p] = tau > 0 ? sp * (1 - std::exp(-tau)) / sig_p : sp * back;
            continue;
          }
        }
        double uq = 0.0, sq = 0.0, sigq = 0.0;
        auto take = [&](int a, int b, double wt) {
          if (wt == 0.0) return;
          if (!in_range(a, b)) {
            sq += wt * sp;
            sigq += wt * sig_p;
            return;
          }
          const std::size_t q = idx(a, b);
          uq += wt * w.values[q];
          const bool act = grid_.active(grid_.index(a, b));
          sq += wt * (act ? source[q] : sp);
          sigq += wt * (act ? sigma_[q] : sig_p);
        };
        take(ai, aj, 1 - wb);
        take(bi, bj, wb);
        const double tau = 0.5 * (sig_p + sigq) * len;
        w.values[p] = uq * std::exp(-tau) + linear_source_step(sq, sp, tau, len);
      }
    }
  });
  for (std::size_t c = 0; c < grid_.cell_count(); ++c)
    if (!grid_.active(c)) std::fill_n(w.values.begin() + static_cast<std::ptrdiff_t>(c * nv), nv, 0.0);
  return w;
}

EnergyMap TransportSolver::energy_map(const TransportField& u) const {
  if (!(u.grid == grid_) || u.angles.count != angles_.count)
    throw ArgumentError("energy_map: field grid does not match the solver");
  const std::size_t nv = angles_.count;
  EnergyMap e{grid_, std::vector<double>(grid_.cell_count(), 0.0)};
  for (std::size_t c = 0; c < grid_.cell_count(); ++c) {
    if (!grid_.active(c)) continue;
    double acc = 0.0;
    for (std::size_t j = 0; j < nv; ++j) acc += sigma_a_[c * nv + j] * u.values[c * nv + j];
    e.values[c] = acc * angles_.weight();
  }
  return e;
}

EnergyMap energy_map(const OpticalMedium& medium, const TransportField& u) {
  const std::size_t nv = u.angles.count;
  if (u.values.size() != u.grid.cell_count() * nv) throw ArgumentError("energy_map: field size does not match its grid");
  if (!(u.grid.geometry() == medium.geometry())) throw ArgumentError("energy_map: field and medium domains differ");
  EnergyMap e{u.grid, std::vector<double>(u.grid.cell_count(), 0.0)};
  for (std::size_t c = 0; c < u.grid.cell_count(); ++c) {
    if (!u.grid.active(c)) continue;
    const Vec3 x = u.grid.center(c);
    double acc = 0.0;
    for (std::size_t j = 0; j < nv; ++j) acc += medium.sigma_a(x, u.angles.direction(static_cast<int>(j))) * u.values[c * nv + j];
    e.values[c] = acc * u.angles.weight();
  }
  return e;
}

TransportSolution TransportSolver::solve(const BoundarySource& source) const { return solve_from(ballistic(source)); }

TransportSolution TransportSolver::solve_from(TransportField first) const {
  TransportSolution sol{first, {}, {}, energy_map(first), {}};
  const double n0 = first.l1_norm();
  sol.order_norms.push_back(n0);
  sol.order_energy.push_back(sol.energy.integral());
  if (opt_.keep_orders) sol.orders.push_back(first);
  if (n0 == 0.0 || !medium_.has_scattering()) return sol;
  TransportField current = std::move(first);
  double total_norm = n0;
  for (int m = 1; m <= opt_.max_orders; ++m) {
    TransportField next = sweep(scatter(current));
    const double nm = next.l1_norm();
    for (std::size_t i = 0; i < next.values.size(); ++i) sol.total.values[i] += next.values[i];
    total_norm += nm;  // all terms are nonnegative
    sol.order_norms.push_back(nm);
    sol.order_energy.push_back(energy_map(next).integral());
    if (opt_.keep_orders) sol.orders.push_back(next);
    if (nm < opt_.tol * total_norm) {
      sol.energy = energy_map(sol.total);
      return sol;
    }
    current = std::move(next);
  }
  throw ConvergenceError("transport: Neumann series did not converge within max_orders", sol.order_norms);
}

KernelColumn scattered_column(const OpticalMedium& medium, const BoundaryPair& pair, const TransportOptions& options) {
  TransportSolver solver(medium, options);
  const auto& grid = solver.grid();
  const auto& geo = medium.geometry();
  const double inc = geo.incidence(pair);
  const double tau = geo.exit_time(pair.point, pair.direction);
  const std::size_t nv = solver.angles().count;
  const double dtheta = solver.angles().weight();
  TransportField u1{grid, solver.angles(), std::vector<double>(grid.cell_count() * nv, 0.0)};
  KernelColumn col{pair, {}, {}};
  if (medium.has_scattering()) {
    const RayDepth ray(medium, pair, tau);
    const Vec3& vp = pair.direction;
    // Once-scattered field of a delta beam, averaged over each angular cell:
    // angle cell j receives the part of the chord seen from x within that cell.
    parallel_for(grid.cell_count(), [&](std::size_t c) {
      if (!grid.active(c)) return;
      const Vec3 x = grid.center(c);
      const Vec3 d = x - pair.point;
      if (std::abs(cross2(vp, d)) <= kOnRayTolerance) return;
      const Vec3 a = d - tau * vp;
      const double th0 = std::atan2(d.y, d.x);
      const double th1 = th0 + std::atan2(cross2(d, a), dot(d, a));
      const double lo = std::min(th0, th1), hi = std::max(th0, th1);
      std::vector<double> ts{0.0, tau};
      for (long m = static_cast<long>(std::ceil(lo / dtheta - 0.5)); (m + 0.5) * dtheta < hi; ++m) {
        const Vec3 e = unit_angle((m + 0.5) * dtheta);
        const double den = cross2(e, vp);
        if (den == 0.0) continue;
        ts.push_back(std::clamp(cross2(e, d) / den, 0.0, tau));
      }
      std::sort(ts.begin(), ts.end());
      auto f = [&](double t) {
        const Vec3 y = pair.point + t * vp;
        const Vec3 w = x - y;
        const double rho = norm(w);
        const double k = medium.k_cos(y, dot(vp, w * (1.0 / rho)));
        if (k == 0.0) return 0.0;
        return std::exp(-(medium.optical_depth(y, x) + ray(t))) * k / rho;
      };
      const double foot = dot(d, vp);
      const double perp = std::abs(cross2(vp, d));
      for (std::size_t s = 0; s + 1 < ts.size(); ++s) {
        const double t0 = ts[s], t1 = ts[s + 1];
        if (!(t1 > t0)) continue;
        const Vec3 w = x - (pair.point + (0.5 * (t0 + t1)) * vp);
        long j = std::lround(std::atan2(w.y, w.x) / dtheta);
        j = ((j % static_cast<long>(nv)) + static_cast<long>(nv)) % static_cast<long>(nv);
        const auto bp = quad::graded_breakpoints(t0, t1, foot, perp, 40);
        const double val = quad::integrate(f, bp, {1e-15, 1e-9, 2000}).value;
        u1.values[c * nv + static_cast<std::size_t>(j)] += inc * val / dtheta;
      }
    });
  }
  const auto sol = solver.solve_from(std::move(u1));
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    if (!grid.active(c)) continue;
    col.points.push_back(grid.center(c));
    col.values.push_back(sol.energy.values[c]);
  }
  return col;
}

}  // namespace qpat
