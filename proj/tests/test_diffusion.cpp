#include <doctest.h>

#include <cmath>

#include "qpat/diffusion.hpp"
#include "qpat/error.hpp"

using namespace qpat;
using F = CoefficientField;

namespace {

DiffusionProblem cosh_problem(int n, double scale = 1.0) {
  SpatialGrid grid(DomainGeometry::unit_disk(), n);
  std::vector<double> H(grid.cell_count(), 0.0);
  for (std::size_t c = 0; c < H.size(); ++c)
    if (grid.active(c)) H[c] = scale * std::cosh(grid.center(c).x);
  return {grid, F::constant(1.0), [scale](const Vec3& x) { return scale * std::cosh(x.x); }, H};
}

double max_error(const DiffusionSolution& s) {
  double e = 0.0;
  const auto& g = s.intensity.grid;
  for (std::size_t c = 0; c < g.cell_count(); ++c)
    if (g.active(c)) e = std::max(e, std::abs(s.intensity.values[c] - std::cosh(g.center(c).x)));
  return e;
}

}  // namespace

TEST_CASE("constant boundary data without sources") {
  SpatialGrid grid(DomainGeometry::unit_disk(), 48);
  DiffusionProblem p{grid, F::gaussian_bump(1.0, 0.5, {0.2, 0.1}, 0.3), [](const Vec3&) { return 2.5; },
                     std::vector<double>(grid.cell_count(), 0.0)};
  auto s = solve_intensity(p);
  for (std::size_t c = 0; c < grid.cell_count(); ++c)
    if (grid.active(c)) CHECK(std::abs(s.intensity.values[c] - 2.5) < 1e-8);
  CHECK(s.nonpositive.empty());
  CHECK(s.residuals.back() <= 1e-10);

  auto zero = recover_sigma_a_diffusive(EnergyMap{grid, p.H}, s.intensity, default_i_min(s), 0.1);
  CHECK(zero.below_sigma0.size() == grid.active_count());
  for (std::size_t c = 0; c < grid.cell_count(); ++c)
    if (grid.active(c)) CHECK(zero.sigma_a.values[c] == 0.0);
}

TEST_CASE("manufactured cosh solution converges at second order") {
  auto s64 = solve_intensity(cosh_problem(64));
  auto s128 = solve_intensity(cosh_problem(128));
  const double e64 = max_error(s64), e128 = max_error(s128);
  MESSAGE("max error 64: " << e64 << ", 128: " << e128);
  CHECK(e128 < 1e-3);
  CHECK(e64 / e128 > 3.0);

  const auto p = cosh_problem(128);
  auto sa = recover_sigma_a_diffusive(EnergyMap{p.grid, p.H}, s128.intensity, default_i_min(s128));
  CHECK(sa.excluded.empty());
  for (std::size_t c = 0; c < p.grid.cell_count(); ++c)
    if (p.grid.active(c)) CHECK(std::abs(sa.sigma_a.values[c] - 1.0) < 2e-3);

  // Doubling phi and H scales I by two exactly.
  const auto p2 = cosh_problem(128, 2.0);
  auto s2 = solve_intensity(p2);
  auto sa2 = recover_sigma_a_diffusive(EnergyMap{p2.grid, p2.H}, s2.intensity, default_i_min(s2));
  for (std::size_t c = 0; c < p.grid.cell_count(); ++c)
    if (p.grid.active(c)) CHECK(std::abs(sa2.sigma_a.values[c] - sa.sigma_a.values[c]) < 1e-12);
}

TEST_CASE("variable D manufactured solution") {
  // I = 1 + x^2 + y^2 / 2, D = 1 + x / 2: div(D grad I) = 3 D + x.
  SpatialGrid grid(DomainGeometry::unit_disk(), 96);
  auto exact = [](const Vec3& x) { return 1 + x.x * x.x + 0.5 * x.y * x.y; };
  std::vector<double> H(grid.cell_count(), 0.0);
  for (std::size_t c = 0; c < H.size(); ++c) {
    const Vec3 x = grid.center(c);
    if (grid.active(c)) H[c] = 3 * (1 + 0.5 * x.x) + 2 * 0.5 * x.x;
  }
  DiffusionProblem p{grid, F::analytic([](const Vec3& x) { return 1 + 0.5 * x.x; }, "D"), exact, H};
  auto s = solve_intensity(p);
  double e = 0.0;
  for (std::size_t c = 0; c < H.size(); ++c)
    if (grid.active(c)) e = std::max(e, std::abs(s.intensity.values[c] - exact(grid.center(c))));
  CHECK(e < 2e-3);
}

TEST_CASE("errors and stability") {
  auto p = cosh_problem(32);
  auto bad = p;
  bad.D = F::constant(0.0);
  CHECK_THROWS_AS(solve_intensity(bad), ArgumentError);
  bad = p;
  bad.phi = [](const Vec3&) { return 0.0; };
  CHECK_THROWS_AS(solve_intensity(bad), ArgumentError);
  bad = p;
  bad.H.pop_back();
  CHECK_THROWS_AS(solve_intensity(bad), ArgumentError);
  DiffusionOptions tight;
  tight.max_iterations = 2;
  try {
    solve_intensity(p, tight);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.history().size() == 3);
  }

  auto s = solve_intensity(p);
  auto zeroI = s.intensity;
  for (auto& v : zeroI.values) v = 0.0;
  CHECK_THROWS_AS(recover_sigma_a_diffusive(EnergyMap{p.grid, p.H}, zeroI, 1e-8), DataInconsistencyError);

  const double C = diffusion_stability_constant(p, 1e-3);
  MESSAGE("stability constant " << C);
  CHECK(std::isfinite(C));
  CHECK(C > 0.0);
  CHECK(C < 10.0);
}
