#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "qpat/error.hpp"
#include "qpat/harness.hpp"

using namespace qpat;
using F = CoefficientField;

namespace {

const BoundaryPair kLeft{{-1, 0}, {1, 0}};

HarnessSampling light(std::uint64_t seed = 3) {
  HarnessSampling s;
  s.seed = seed;
  s.pairs = 2;
  s.grid_cells = 16;
  s.sup_points = 8;
  s.near_ray_points = 2;
  s.eps = {0x1p-6, 0x1p-10};
  s.kernel_samples = 1000;
  return s;
}

OpticalMedium constant_disk(double sa, double ss, double g = 0.0) {
  auto phase = ss == 0.0 ? PhaseFunction::none()
               : g == 0.0 ? PhaseFunction::isotropic(F::constant(ss))
                          : PhaseFunction::henyey_greenstein(F::constant(ss), F::constant(g));
  return OpticalMedium::from_absorption(DomainGeometry::unit_disk(), F::constant(sa), phase, 0.05, 10.0);
}

}  // namespace

TEST_CASE("ballistic inequality") {
  const auto a = constant_disk(0.75, 0.25);
  const auto b = constant_disk(0.85, 0.25);
  auto same = check_ballistic_stability(a, a, kLeft, light());
  CHECK(same.lhs == 0.0);
  CHECK(same.rhs == 0.0);
  CHECK(same.passed);

  auto r = check_ballistic_stability(a, b, kLeft, light());
  // Closed form of int_0^2 |0.75 e^{-t} - 0.85 e^{-1.1 t}| dt, split at the crossing.
  auto prim = [](double t) { return -0.75 * std::exp(-t) + 0.85 / 1.1 * std::exp(-1.1 * t); };
  const double tc = 10.0 * std::log(0.85 / 0.75);
  const double exact = std::abs(prim(tc) - prim(0.0)) + std::abs(prim(2.0) - prim(tc));
  CHECK(std::abs(r.lhs - exact) < 1e-6);
  CHECK(r.passed);
  CHECK(r.margin == doctest::Approx(r.rhs - r.lhs));

  auto swapped = check_ballistic_stability(b, a, kLeft, light());
  CHECK(swapped.lhs == doctest::Approx(r.lhs).epsilon(1e-14));
  CHECK(swapped.rhs == doctest::Approx(r.rhs).epsilon(1e-14));

  const auto other = OpticalMedium::from_absorption(DomainGeometry(2, {}, 2.0), F::constant(0.75),
                                                    PhaseFunction::none(), 0.05, 10.0);
  CHECK_THROWS_AS(check_ballistic_stability(a, other, kLeft, light()), ArgumentError);
}

TEST_CASE("ballistic inequality is locally linear under midpoint media") {
  auto [a, b] = seeded_medium_pair(5);
  const auto mid = midpoint_medium(a, b);
  const auto full = check_ballistic_stability(a, b, kLeft, light());
  const auto half = check_ballistic_stability(a, mid, kLeft, light());
  CHECK(half.lhs / full.lhs == doctest::Approx(0.5).epsilon(0.25));
}

TEST_CASE("single-scattering inequality") {
  const Vec3 x{0.1, 0.0};
  const auto a = constant_disk(0.6, 0.3, 0.4);
  auto same = check_single_scattering_stability(a, a, kLeft, x, light());
  CHECK(same.lhs == 0.0);
  CHECK(same.rhs == 0.0);

  const auto b = constant_disk(0.6, 0.3, 0.5);
  auto r = check_single_scattering_stability(a, b, kLeft, x, light());
  MESSAGE("g 0.4 vs 0.5: lhs " << r.lhs << " rhs " << r.rhs);
  CHECK(std::isfinite(r.rhs));
  CHECK(r.passed);
  CHECK(r.margin > 0.0);

  // Perturb sigma_a inside a bump away from the chord [(-1, 0), (0.1, 0)].
  auto bump = F::analytic([](const Vec3& p) {
    const double r2 = dot(p - Vec3{0.0, 0.7}, p - Vec3{0.0, 0.7});
    return r2 < 0.04 ? 0.2 * (1 - r2 / 0.04) * (1 - r2 / 0.04) : 0.0;
  }, "bump");
  const auto c = OpticalMedium::from_absorption(DomainGeometry::unit_disk(), F::sum(F::constant(0.6), bump),
                                                PhaseFunction::henyey_greenstein(F::constant(0.3), F::constant(0.5)),
                                                0.05, 10.0);
  auto rc = check_single_scattering_stability(a, c, kLeft, x, light());
  CHECK(std::abs(rc.lhs - r.lhs) < 1e-10);
  CHECK_THROWS_AS(check_single_scattering_stability(a, b, kLeft, {0.1, 0.2}, light()), ArgumentError);
}

TEST_CASE("h inequality") {
  const auto a = constant_disk(1.0, 0.0);
  auto same = check_h_stability(a, a, kLeft, light());
  CHECK(same.lhs == 0.0);
  CHECK(same.rhs == 0.0);

  const auto b = constant_disk(1.1, 0.0);
  auto r = check_h_stability(a, b, kLeft, light());
  CHECK(std::abs(r.lhs - 0.1 * 2.0 * 2.0 / 2.0) < 1e-6);
  CHECK(r.passed);
  CHECK(r.constant > 1.0);

  auto [p, q] = seeded_medium_pair(2);
  for (double c : {0.5, 2.0}) {
    const auto scaled = OpticalMedium(p.geometry(), p.sigma_field().scaled(c),
                                      PhaseFunction::henyey_greenstein(p.phase().sigma_s.scaled(c), p.phase().g),
                                      c * p.sigma0(), c * p.bound());
    auto rs = check_h_stability(p, scaled, kLeft, light());
    CHECK(std::isfinite(rs.lhs));
    CHECK(rs.passed);
  }

  auto directional = F::directional([](const Vec3&, const Vec3& v) { return 1.0 + 0.2 * v.x; }, "dir");
  const OpticalMedium asym(DomainGeometry::unit_disk(), directional, PhaseFunction::none(), 0.05, 10.0);
  CHECK_THROWS_AS(check_h_stability(asym, a, kLeft, light()), PreconditionError);
}

TEST_CASE("kernel bounds") {
  SUBCASE("no scattering") {
    for (const auto& r : check_kernel_bounds(constant_disk(0.5, 0.0), light())) {
      CHECK(r.passed);
      CHECK(r.lhs == 0.0);
    }
  }
  SUBCASE("constant disk, log bound nearly tight at the ray") {
    auto reports = check_kernel_bounds(constant_disk(0.1, 0.1), light());
    REQUIRE(reports.size() == 3);
    for (const auto& r : reports) CHECK_MESSAGE(r.passed, r.id);
    CHECK(reports[0].samples >= 1000);
    CHECK(reports[0].detail("violations") == 0.0);
    CHECK(reports[0].detail("near_ray_min_bound_over_value") <= 1.5);
  }
  SUBCASE("ball, transverse bound") {
    const auto ball = OpticalMedium::from_absorption(DomainGeometry::unit_ball(), F::constant(0.5),
                                                     PhaseFunction::henyey_greenstein(F::constant(0.3), F::constant(0.6)),
                                                     0.05, 10.0);
    auto reports = check_kernel_bounds(ball, light());
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].passed);
    CHECK(reports[0].detail("violations") == 0.0);
  }
}

TEST_CASE("HG sigma_g pointwise step") {
  const auto a = constant_disk(0.6, 0.3, 0.4);
  const std::vector<LineProbe> probes{{kLeft, 1.1}};
  auto same = check_hg_sigma_g_stability(a, a, probes, 1e-3, light());
  CHECK(same.lhs == 0.0);
  CHECK(same.rhs == 0.0);

  const auto b = constant_disk(0.6, 0.3, 0.5);
  auto r = check_hg_sigma_g_stability(a, b, probes, 1e-3, light());
  MESSAGE("g-only pair: lhs " << r.lhs << " rhs " << r.rhs);
  CHECK(r.passed);
  CHECK(r.detail("chain_bound") >= r.detail("sigma_g_probe_mean_abs_diff"));

  CHECK_THROWS_AS(check_hg_sigma_g_stability(a, constant_disk(0.6, 0.3), probes, 1e-3, light()), ArgumentError);
  CHECK_THROWS_AS(check_hg_sigma_g_stability(a, b, probes, 0.5, light()), PreconditionError);
}

TEST_CASE("seeded pairs are reproducible") {
  auto [a1, b1] = seeded_medium_pair(9);
  auto [a2, b2] = seeded_medium_pair(9);
  for (const Vec3& x : {Vec3{0.1, 0.2}, Vec3{-0.5, 0.3}}) {
    CHECK(b1.sigma(x, {1, 0}) == b2.sigma(x, {1, 0}));
    CHECK(b1.anisotropy(x) == b2.anisotropy(x));
    CHECK(a1.sigma(x, {1, 0}) == a2.sigma(x, {1, 0}));
  }
}
