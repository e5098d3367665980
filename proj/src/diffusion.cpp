#include "qpat/diffusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "qpat/error.hpp"

namespace qpat {

namespace {

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

struct Stencil {
  std::vector<std::size_t> cells;                    // active cell ids, row order
  std::vector<std::array<long, 4>> neighbor;         // row index or -1
  std::vector<std::array<double, 4>> coupling;
  std::vector<double> diagonal;
  std::vector<double> boundary_rhs;                  // sum of a phi over cut edges
  double phi_min = std::numeric_limits<double>::infinity();
  double phi_max = 0.0;
};

Stencil build(const DiffusionProblem& p, const DiffusionOptions& opt) {
  const SpatialGrid& g = p.grid;
  const int n = g.side();
  const double h = g.spacing();
  const auto& geo = g.geometry();
  if (geo.dimension() != 2) throw UnsupportedDimensionError("diffusion: only n = 2 is supported");
  if (p.H.size() != g.cell_count()) throw ArgumentError("diffusion: H does not match the grid");
  if (!p.phi) throw ArgumentError("diffusion: missing boundary data");

  Stencil s;
  std::vector<long> row(g.cell_count(), -1);
  for (std::size_t c = 0; c < g.cell_count(); ++c)
    if (g.active(c)) {
      row[c] = static_cast<long>(s.cells.size());
      s.cells.push_back(c);
    }
  const Vec3 dirs[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
  auto d_at = [&](const Vec3& x) {
    const double d = p.D(x);
    if (!(d > 0.0) || !std::isfinite(d)) {
      std::ostringstream os;
      os << "diffusion: D must be positive, got " << d << " at (" << x.x << ", " << x.y << ")";
      throw ArgumentError(os.str());
    }
    return d;
  };
  const double inv_h2 = 1.0 / (h * h);
  s.neighbor.resize(s.cells.size());
  s.coupling.resize(s.cells.size());
  s.diagonal.assign(s.cells.size(), 0.0);
  s.boundary_rhs.assign(s.cells.size(), 0.0);
  for (std::size_t r = 0; r < s.cells.size(); ++r) {
    const std::size_t c = s.cells[r];
    const int i = static_cast<int>(c / n), j = static_cast<int>(c % n);
    const Vec3 x = g.center(c);
    const double dc = d_at(x);
    if (!(p.H[c] >= 0.0)) throw ArgumentError("diffusion: H must be nonnegative");
    for (int k = 0; k < 4; ++k) {
      const int ni = i + di[k], nj = j + dj[k];
      const bool inside = ni >= 0 && nj >= 0 && ni < n && nj < n && g.active(g.index(ni, nj));
      if (inside) {
        const std::size_t nc = g.index(ni, nj);
        const double a = harmonic(dc, d_at(g.center(nc))) * inv_h2;
        s.neighbor[r][k] = row[nc];
        s.coupling[r][k] = a;
        s.diagonal[r] += a;
      } else {
        const double dist = std::min(geo.exit_time(x, dirs[k]), h);
        const double theta = std::max(dist / h, opt.theta_floor);
        const Vec3 xb = x + dist * dirs[k];
        const double phi = p.phi(xb);
        if (!(phi > 0.0) || !std::isfinite(phi)) throw ArgumentError("diffusion: boundary data must be positive");
        s.phi_min = std::min(s.phi_min, phi);
        s.phi_max = std::max(s.phi_max, phi);
        const double a = harmonic(dc, d_at(xb)) * inv_h2 / theta;
        s.neighbor[r][k] = -1;
        s.coupling[r][k] = 0.0;
        s.diagonal[r] += a;
        s.boundary_rhs[r] += a * phi;
      }
    }
  }
  return s;
}

void apply(const Stencil& s, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t r = 0; r < x.size(); ++r) {
    double v = s.diagonal[r] * x[r];
    for (int k = 0; k < 4; ++k)
      if (s.neighbor[r][k] >= 0) v -= s.coupling[r][k] * x[static_cast<std::size_t>(s.neighbor[r][k])];
    y[r] = v;
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

DiffusionSolution solve_intensity(const DiffusionProblem& p, const DiffusionOptions& opt) {
  const Stencil s = build(p, opt);
  const std::size_t m = s.cells.size();
  // -div(D grad I) = -H with the cut-edge Dirichlet terms moved to the right.
  std::vector<double> b(m), x(m), r(m), z(m), q(m), ap(m);
  for (std::size_t i = 0; i < m; ++i) {
    b[i] = s.boundary_rhs[i] - p.H[s.cells[i]];
    x[i] = s.phi_min == std::numeric_limits<double>::infinity() ? 0.0 : 0.5 * (s.phi_min + s.phi_max);
  }
  apply(s, x, ap);
  for (std::size_t i = 0; i < m; ++i) r[i] = b[i] - ap[i];
  const double bnorm = std::max(std::sqrt(dot(b, b)), std::numeric_limits<double>::min());
  DiffusionSolution out{EnergyMap{p.grid, std::vector<double>(p.grid.cell_count(), 0.0)}, {}, {}, s.phi_min, s.phi_max};
  double res = std::sqrt(dot(r, r)) / bnorm;
  out.residuals.push_back(res);
  for (std::size_t i = 0; i < m; ++i) z[i] = r[i] / s.diagonal[i];
  q = z;
  double rz = dot(r, z);
  int it = 0;
  while (res > opt.rel_tol) {
    if (++it > opt.max_iterations) {
      std::ostringstream os;
      os << "solve_intensity: CG did not reach " << opt.rel_tol << " in " << opt.max_iterations
         << " iterations (residual " << res << ")";
      throw ConvergenceError(os.str(), out.residuals);
    }
    apply(s, q, ap);
    const double alpha = rz / dot(q, ap);
    for (std::size_t i = 0; i < m; ++i) {
      x[i] += alpha * q[i];
      r[i] -= alpha * ap[i];
    }
    res = std::sqrt(dot(r, r)) / bnorm;
    out.residuals.push_back(res);
    if (!std::isfinite(res)) throw ConvergenceError("solve_intensity: CG breakdown", out.residuals);
    for (std::size_t i = 0; i < m; ++i) z[i] = r[i] / s.diagonal[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < m; ++i) q[i] = z[i] + beta * q[i];
  }
  for (std::size_t i = 0; i < m; ++i) {
    out.intensity.values[s.cells[i]] = x[i];
    if (!(x[i] > 0.0)) out.nonpositive.push_back(s.cells[i]);
  }
  return out;
}

DiffusiveAbsorption recover_sigma_a_diffusive(const EnergyMap& H, const EnergyMap& I, double i_min, double sigma0) {
  if (!(H.grid == I.grid)) throw ArgumentError("recover_sigma_a_diffusive: H and I live on different grids");
  if (H.values.size() != H.grid.cell_count() || I.values.size() != I.grid.cell_count())
    throw ArgumentError("recover_sigma_a_diffusive: value count does not match the grid");
  DiffusiveAbsorption out{EnergyMap{H.grid, std::vector<double>(H.grid.cell_count(), 0.0)}, {}, {}};
  std::size_t active = 0;
  for (std::size_t c = 0; c < H.grid.cell_count(); ++c) {
    if (!H.grid.active(c)) continue;
    ++active;
    if (!(I.values[c] > i_min)) {
      out.excluded.push_back(c);
      out.sigma_a.values[c] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double v = H.values[c] / I.values[c];
    out.sigma_a.values[c] = v;
    if (v < sigma0) out.below_sigma0.push_back(c);
  }
  if (10 * out.excluded.size() > active) {
    std::ostringstream os;
    os << "recover_sigma_a_diffusive: degenerate measurement, " << out.excluded.size() << " of " << active
       << " cells have I <= " << i_min;
    throw DataInconsistencyError(os.str());
  }
  return out;
}

double diffusion_stability_constant(const DiffusionProblem& problem, double delta, const DiffusionOptions& options) {
  if (!(delta > 0.0)) throw ArgumentError("diffusion_stability_constant: delta must be positive");
  const auto base = solve_intensity(problem, options);
  const EnergyMap H0{problem.grid, problem.H};
  const auto s0 = recover_sigma_a_diffusive(H0, base.intensity, default_i_min(base));
  double scale = 0.0;
  for (std::size_t c = 0; c < problem.grid.cell_count(); ++c)
    if (problem.grid.active(c) && std::isfinite(s0.sigma_a.values[c]))
      scale = std::max(scale, std::abs(s0.sigma_a.values[c]));
  if (scale == 0.0) return 0.0;
  double worst = 0.0;
  const int n = problem.grid.side();
  for (int mode = 0; mode < 2; ++mode) {
    DiffusionProblem p = problem;
    for (std::size_t c = 0; c < p.H.size(); ++c) {
      const int sign = mode == 0 ? 1 : ((c / n + c % n) % 2 == 0 ? 1 : -1);
      p.H[c] *= 1.0 + sign * delta;
    }
    const auto sol = solve_intensity(p, options);
    const auto s1 = recover_sigma_a_diffusive(EnergyMap{p.grid, p.H}, sol.intensity, default_i_min(sol));
    for (std::size_t c = 0; c < p.H.size(); ++c) {
      const double a = s0.sigma_a.values[c], b = s1.sigma_a.values[c];
      if (problem.grid.active(c) && std::isfinite(a) && std::isfinite(b))
        worst = std::max(worst, std::abs(b - a) / (delta * scale));
    }
  }
  return worst;
}

}  // namespace qpat
