#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qpat/error.hpp"
#include "qpat/geometry.hpp"

using namespace qpat;

TEST_CASE("exit times on the unit disk and ball") {
  const auto disk = DomainGeometry::unit_disk();
  CHECK(disk.exit_time({0, 0}, {1, 0}, Escape::forward) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(disk.exit_time({0.5, 0}, {1, 0}, Escape::forward) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(disk.exit_time({0.5, 0}, {1, 0}, Escape::backward) == doctest::Approx(1.5).epsilon(1e-15));
  const auto ball = DomainGeometry::unit_ball();
  CHECK(ball.exit_time({0, 0, 0.3}, {0, 0, 1}, Escape::forward) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(ball.diameter() == 2.0);
}

TEST_CASE("exit_time error paths") {
  const auto disk = DomainGeometry::unit_disk();
  CHECK_THROWS_AS(disk.exit_time({2, 0}, {1, 0}), DomainError);
  CHECK_THROWS_AS(disk.exit_time({0, 0}, {2, 0}), NormalizationError);
}

TEST_CASE("outward normal") {
  const auto disk = DomainGeometry::unit_disk();
  auto n1 = disk.outward_normal({1, 0});
  CHECK(n1.x == doctest::Approx(1.0));
  CHECK(n1.y == doctest::Approx(0.0));
  auto n2 = disk.outward_normal({0, -1});
  CHECK(n2.y == doctest::Approx(-1.0));
  CHECK_THROWS_AS(disk.outward_normal({0.5, 0}), DomainError);
}

TEST_CASE("chord, reversal and boundary fixpoint properties") {
  for (int dim : {2, 3}) {
    const DomainGeometry geo(dim, {}, 1.3);
    std::mt19937_64 rng(1234 + dim);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst_chord = 0.0, worst_rev = 0.0, worst_fix = 0.0;
    for (int i = 0; i < 100000; ++i) {
      Vec3 x{u(rng), u(rng), dim == 3 ? u(rng) : 0.0};
      x = x * 1.3;
      if (!geo.contains(x)) continue;
      Vec3 v{u(rng), u(rng), dim == 3 ? u(rng) : 0.0};
      if (norm(v) < 1e-3) continue;
      v = normalized(v);
      const double tp = geo.exit_time(x, v, Escape::forward);
      const double tm = geo.exit_time(x, v, Escape::backward);
      // Independent chord length: 2 sqrt(R^2 - distance(center, line)^2).
      const double dperp = norm(perp_part(x, v));
      const double chord = 2.0 * std::sqrt(1.69 - dperp * dperp);
      worst_chord = std::max(worst_chord, std::abs(tp + tm - chord));
      worst_rev = std::max(worst_rev, std::abs(tp - geo.exit_time(x, -v, Escape::backward)));
      worst_fix = std::max(worst_fix, std::abs(norm(x + tp * v) - 1.3));
    }
    CHECK(worst_chord < 1e-10);
    CHECK(worst_rev <= 1e-12);
    CHECK(worst_fix < 1e-10);
  }
}

TEST_CASE("sample_incoming") {
  const auto disk = DomainGeometry::unit_disk();
  auto s = disk.sample_incoming(4, 7);
  REQUIRE(s.size() == 4);
  for (const auto& wp : s) {
    CHECK(dot(disk.outward_normal(wp.pair.point), wp.pair.direction) < 0.0);
    CHECK(std::abs(norm(wp.pair.direction) - 1.0) < 1e-12);
  }
  auto big = disk.sample_incoming(10000, 7);
  double total = 0.0;
  for (const auto& wp : big) total += wp.weight;
  CHECK(total == doctest::Approx(4.0 * std::numbers::pi).epsilon(0.01));

  auto again = disk.sample_incoming(4, 7);
  for (int i = 0; i < 4; ++i) {
    CHECK(again[i].pair.point == s[i].pair.point);
    CHECK(again[i].pair.direction == s[i].pair.direction);
    CHECK(again[i].weight == s[i].weight);
  }
  CHECK_THROWS_AS(disk.sample_incoming(0, 1), ArgumentError);

  const auto ball = DomainGeometry::unit_ball();
  for (const auto& wp : ball.sample_incoming(500, 3))
    CHECK(dot(ball.outward_normal(wp.pair.point), wp.pair.direction) < 0.0);
}

TEST_CASE("sampled dxi measure integrates |nu.v| consistently") {
  // Integral over Gamma_- of |nu.v| dxi = |dX| * integral of cos^2 over a half circle = 2 pi * pi/2.
  const auto disk = DomainGeometry::unit_disk();
  double acc = 0.0;
  for (const auto& wp : disk.sample_incoming(20000, 11)) acc += wp.weight * disk.incidence(wp.pair);
  CHECK(acc == doctest::Approx(std::numbers::pi * std::numbers::pi).epsilon(0.005));
}
