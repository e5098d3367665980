#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracle.hpp"
#include "qpat/error.hpp"
#include "qpat/kernels.hpp"

using namespace qpat;
using F = CoefficientField;
constexpr double pi = std::numbers::pi;

namespace {

OpticalMedium iso_disk(double sigma = 1.0, double sigma_s = 0.25) {
  return OpticalMedium(DomainGeometry::unit_disk(), F::constant(sigma), PhaseFunction::isotropic(F::constant(sigma_s)),
                       0.1, 5.0);
}

OpticalMedium hg_disk(double sigma_a, double sigma_s, double g) {
  return OpticalMedium::from_absorption(DomainGeometry::unit_disk(), F::constant(sigma_a),
                                        PhaseFunction::henyey_greenstein(F::constant(sigma_s), F::constant(g)), 0.1,
                                        5.0);
}

OpticalMedium absorbing_disk(double sigma) {
  return OpticalMedium(DomainGeometry::unit_disk(), F::constant(sigma), PhaseFunction::none(), 0.1, 5.0);
}

double hg2(double lambda, double g, double ss) { return ss * (1 - g * g) / (2 * pi * (1 + g * g - 2 * g * lambda)); }

const BoundaryPair kLeft{{-1, 0}, {1, 0}};

}  // namespace

TEST_CASE("eta profile closed form and limits") {
  auto m = absorbing_disk(1.0);
  const double ts[] = {0.0, 0.5, 1.7};
  auto p = eta_profile(m, kLeft, ts);
  CHECK(std::abs(p.values[1] - std::exp(-0.5)) < 1e-9);
  CHECK(std::abs(p.values[1] - 0.606531) < 1e-6);
  CHECK(p.values[0] == 1.0);
  const double bad[] = {2.1};
  CHECK_THROWS_AS(eta_profile(m, kLeft, bad), ArgumentError);
}

TEST_CASE("eta profile for a radial absorption matches an adaptive oracle") {
  auto sa = F::radial_polynomial({}, {1.0, 0.0, 0.5});
  auto m = OpticalMedium::from_absorption(DomainGeometry::unit_disk(), sa, PhaseFunction::none(), 0.5, 5.0);
  const BoundaryPair pair{unit_angle(2.5), normalized(Vec3{0.9, -0.4})};
  const double tau = m.geometry().exit_time(pair.point, pair.direction);
  std::vector<double> ts;
  for (int i = 1; i < 20; ++i) ts.push_back(tau * i / 20.0);
  auto p = eta_profile(m, pair, ts);
  auto sigma_at = [&](double t) {
    const Vec3 y = pair.point + t * pair.direction;
    return 1.0 + 0.5 * dot(y, y);
  };
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double depth = oracle::simpson(sigma_at, 0.0, ts[i], 1e-13);
    CHECK(std::abs(p.values[i] - sigma_at(ts[i]) * std::exp(-depth)) < 1e-8);
  }
  // Without scattering the implied zeta = exp(-int sigma_a) is nonincreasing.
  for (std::size_t i = 1; i < ts.size(); ++i) CHECK(p.values[i] / sigma_at(ts[i]) <= p.values[i - 1] / sigma_at(ts[i - 1]));
}

TEST_CASE("alpha1 vanishes without scattering and rejects on-ray points") {
  CHECK(alpha1(absorbing_disk(1.0), {0, 0.3}, kLeft) == 0.0);
  CHECK_THROWS_AS(alpha1(iso_disk(), {0.2, 0.0}, kLeft), SingularityError);
  CHECK_THROWS_AS(alpha1(iso_disk(), {0.2, 5e-10}, kLeft), SingularityError);
  CHECK_THROWS_AS(alpha1(iso_disk(), {2.0, 0.3}, kLeft), DomainError);
  CHECK_THROWS_AS(alpha1(iso_disk(), {0.0, 0.3}, BoundaryPair{{-1, 0}, {-1, 0}}), DomainError);
}

TEST_CASE("alpha1 matches a brute-force oracle") {
  auto m = iso_disk(1.0, 0.25);
  const Vec3 x{0, 0.3};
  const double k = 0.25 / (2 * pi);
  auto f = [&](double t) {
    const Vec3 y{-1 + t, 0};
    const double rho = norm(x - y);
    return 0.75 * std::exp(-(t + rho)) * k / rho;
  };
  const double ref = oracle::simpson(f, 0.0, 1.0, 1e-14) + oracle::simpson(f, 1.0, 2.0, 1e-14);
  CHECK(alpha1(m, x, kLeft) == doctest::Approx(ref).epsilon(1e-6));

  // HG kernel, oblique pair.
  auto h = hg_disk(0.6, 0.4, 0.5);
  const BoundaryPair pair{unit_angle(2.0), normalized(Vec3{0.2, -1.0})};
  const Vec3 z{0.1, -0.2};
  const double tau = h.geometry().exit_time(pair.point, pair.direction);
  auto g = [&](double t) {
    const Vec3 y = pair.point + t * pair.direction;
    const double rho = norm(z - y);
    const Vec3 v = (z - y) * (1 / rho);
    return 0.6 * std::exp(-(t + rho)) * hg2(dot(v, pair.direction), 0.5, 0.4) / rho;
  };
  const double foot = dot(z - pair.point, pair.direction);
  const double inc = std::abs(dot(pair.point, pair.direction));
  const double ref2 = inc * (oracle::simpson(g, 0.0, foot, 1e-14) + oracle::simpson(g, foot, tau, 1e-14));
  CHECK(alpha1(h, z, pair) == doctest::Approx(ref2).epsilon(1e-6));
}

TEST_CASE("alpha1 is invariant under joint rotation of a radial medium") {
  auto m = OpticalMedium::from_absorption(
      DomainGeometry::unit_disk(), F::radial_polynomial({}, {0.8, 0.0, 0.4}),
      PhaseFunction::henyey_greenstein(F::radial_polynomial({}, {0.3, 0.1}), F::constant(0.4)), 0.5, 5.0);
  const BoundaryPair pair{unit_angle(3.0), normalized(Vec3{1.0, 0.3})};
  const Vec3 x{0.2, 0.35};
  const double ref = alpha1(m, x, pair);
  for (double th : {0.7, 2.1, -1.3}) {
    auto rot = [th](const Vec3& p) {
      return Vec3{std::cos(th) * p.x - std::sin(th) * p.y, std::sin(th) * p.x + std::cos(th) * p.y};
    };
    const BoundaryPair rp{rot(pair.point), rot(pair.direction)};
    CHECK(std::abs(alpha1(m, rot(x), rp) - ref) < 1e-10 * std::abs(ref) + 1e-14);
  }
}

TEST_CASE("alpha1 quadrature is converged") {
  auto m = hg_disk(0.6, 0.4, 0.7);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  int checked = 0;
  while (checked < 40) {
    const Vec3 x{u(rng), u(rng)};
    if (std::abs(x.y) < 0.05) continue;
    const double a = alpha1(m, x, kLeft);
    const double b = alpha1(m, x, kLeft, {1e-12, 1e-17, 8000, 80});
    CHECK(std::abs(a - b) < 1e-7 * b);
    ++checked;
  }
}

TEST_CASE("explicit alpha1 bounds") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SUBCASE("n = 2 log bound") {
    const double g = 0.6, ss = 0.5, sa = 0.7;
    auto m = hg_disk(sa, ss, g);
    const double kmax = hg2(1.0, g, ss);
    for (int i = 0; i < 200; ++i) {
      const double th = 2 * pi * u(rng);
      const Vec3 xp = unit_angle(th);
      const Vec3 vp = unit_angle(th + pi + (u(rng) - 0.5) * 0.95 * pi);
      const Vec3 x = 0.95 * std::sqrt(u(rng)) * unit_angle(2 * pi * u(rng));
      const BoundaryPair pair{xp, vp};
      const double tau = m.geometry().exit_time(xp, vp);
      const Vec3 d = x - xp, a = d - tau * vp;
      const double arg = (norm(a) - dot(a, vp)) / (norm(d) - dot(d, vp));
      const double bound = sa * kmax * std::abs(dot(xp, vp)) * std::log(arg);
      CHECK(alpha1(m, x, pair) <= bound);
    }
  }
  SUBCASE("n = 3 transverse bound") {
    auto m = OpticalMedium(DomainGeometry::unit_ball(), F::constant(1.0), PhaseFunction::isotropic(F::constant(0.3)),
                           0.1, 5.0);
    const double kmax = 0.3 / (4 * pi);
    for (int i = 0; i < 100; ++i) {
      const double c = 2 * u(rng) - 1, ph = 2 * pi * u(rng);
      const Vec3 xp{std::sqrt(1 - c * c) * std::cos(ph), std::sqrt(1 - c * c) * std::sin(ph), c};
      Vec3 vp = normalized(Vec3{u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5} - xp);
      const Vec3 x = 0.9 * Vec3{u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5};
      const double perp = norm(perp_part(x - xp, vp));
      CHECK(alpha1(m, x, {xp, vp}) <= 4 * 0.7 * kmax * std::abs(dot(xp, vp)) / perp);
    }
  }
}

TEST_CASE("weight_w") {
  const auto ball = DomainGeometry::unit_ball();
  const BoundaryPair p3{{-1, 0, 0}, {1, 0, 0}};
  CHECK(weight_w(ball, {0.2, 0.1, 0}, p3) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK_THROWS_AS(weight_w(ball, {0.2, 0, 0}, p3), SingularityError);

  const auto disk = DomainGeometry::unit_disk();
  double prev = 0.0;
  for (double eps = 0.5; eps > 1e-8; eps /= 3) {
    const double w = weight_w(disk, {0.3, eps}, kLeft);
    CHECK(w > prev);
    prev = w;
  }
  CHECK(prev > 30.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  for (int i = 0; i < 1000; ++i) CHECK(weight_w(disk, {u(rng), u(rng)}, kLeft) >= 1.0);
  // The log argument approaches 1 only far upstream of x' (outside the disk).
  CHECK(weight_w(disk, {-1e6, 1e-3}, kLeft) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("alpha2 basic contracts") {
  CHECK(alpha2(absorbing_disk(1.0), {0, 0.3}, kLeft) == 0.0);
  auto ball = OpticalMedium(DomainGeometry::unit_ball(), F::constant(1.0), PhaseFunction::isotropic(F::constant(0.3)),
                            0.1, 5.0);
  CHECK_THROWS_AS(alpha2(ball, {0, 0.3, 0}, {{-1, 0, 0}, {1, 0, 0}}), UnsupportedDimensionError);
  CHECK(alpha2(iso_disk(), {0.2, 0.0}, kLeft) > 0.0);  // finite on the ray
}

TEST_CASE("alpha2 matches a Monte Carlo estimate") {
  const double sigma = 1.0, ss = 0.4, g = 0.5;
  auto m = hg_disk(sigma - ss, ss, g);
  const BoundaryPair pair{{-1, 0}, unit_angle(0.25)};
  const Vec3 z0{0.2, 0.4};
  const double tau = m.geometry().exit_time(pair.point, pair.direction);
  const double value = alpha2(m, z0, pair);

  // Polar sampling about z0 and 1/|y - z1| importance sampling along the ray.
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t samples = 10'000'000;
  double sum = 0.0, sum2 = 0.0;
  const Vec3 vp = pair.direction, xp = pair.point;
  for (std::size_t i = 0; i < samples; ++i) {
    const double phi = 2 * pi * u(rng);
    const Vec3 dir{std::cos(phi), std::sin(phi)};
    const double b = dot(z0, dir);
    const double big_r = -b + std::sqrt(b * b - dot(z0, z0) + 1);
    const double r = big_r * u(rng);
    const Vec3 z1 = z0 + r * dir;
    const Vec3 d = z1 - xp;
    const double t0 = dot(d, vp);
    const double dd = std::abs(vp.x * d.y - vp.y * d.x);
    const double lo = std::asinh(-t0 / dd), hi = std::asinh((tau - t0) / dd);
    const double t = t0 + dd * std::sinh(lo + (hi - lo) * u(rng));
    const Vec3 y = xp + t * vp;
    const double rho = norm(z1 - y);
    const Vec3 v1 = (z1 - y) * (1 / rho);
    const Vec3 v0 = -dir;
    const double f = (sigma - ss) * std::exp(-sigma * (r + rho + t)) * hg2(dot(vp, v1), g, ss) * hg2(dot(v1, v0), g, ss);
    const double est = 2 * pi * big_r * (hi - lo) * f;
    sum += est;
    sum2 += est * est;
  }
  const double inc = std::abs(dot(xp, vp));
  const double mean = inc * sum / samples;
  const double se = inc * std::sqrt((sum2 / samples - (sum / samples) * (sum / samples)) / samples);
  MESSAGE("alpha2 = " << value << ", MC = " << mean << " +- " << se);
  CHECK(std::abs(value - mean) < 3 * se);
}

TEST_CASE("alpha2 stays bounded while alpha1 blows up near the ray") {
  auto m = hg_disk(0.6, 0.4, 0.5);
  double a1_first = 0, a2_first = 0, a1_last = 0, a2_last = 0;
  double ratio_prev = std::numeric_limits<double>::infinity();
  double a2_min = 1e300, a2_max = 0;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const Vec3 x{0.1, eps};
    const double a1 = alpha1(m, x, kLeft), a2 = alpha2(m, x, kLeft);
    if (eps == 1e-1) a1_first = a1, a2_first = a2;
    a1_last = a1, a2_last = a2;
    a2_min = std::min(a2_min, a2);
    a2_max = std::max(a2_max, a2);
    CHECK(a2 / a1 < ratio_prev);
    ratio_prev = a2 / a1;
  }
  CHECK(a2_max / a2_min < 2.0);
  CHECK(a1_last / a1_first > 3.0);
  CHECK((a2_last / a1_last) < (a2_first / a1_first) / 3.0);
}

TEST_CASE("kernel column distance") {
  auto m = iso_disk();
  std::vector<Vec3> pts;
  std::vector<double> vol;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const Vec3 p{-0.75 + 0.3 * i, -0.75 + 0.3 * j};
      if (dot(p, p) < 0.9) pts.push_back(p), vol.push_back(0.09);
    }
  auto same = kernel_column_distance(m, m, kLeft, pts, vol);
  CHECK(same.ballistic == 0.0);
  CHECK(same.scattering == 0.0);
  CHECK(same.column_norm == 0.0);

  auto a = absorbing_disk(1.0), b = absorbing_disk(1.1);
  auto d = kernel_column_distance(a, b, kLeft, pts, vol, false);
  auto prim = [](double t) { return std::exp(-1.1 * t) - std::exp(-t); };
  const double ts = 10 * std::log(1.1);
  CHECK(std::abs(d.ballistic - (prim(0) + prim(2) - 2 * prim(ts))) < 1e-6);
  CHECK(d.scattering == 0.0);

  auto c = iso_disk(1.2, 0.3);
  auto ab = kernel_column_distance(m, c, kLeft, pts, vol, false);
  auto ba = kernel_column_distance(c, m, kLeft, pts, vol, false);
  CHECK(ab.ballistic == ba.ballistic);
  CHECK(ab.scattering == ba.scattering);
  CHECK(ab.scattering > 0.0);

  auto other = OpticalMedium(DomainGeometry(2, {}, 2.0), F::constant(1.0), PhaseFunction::none(), 0.1, 5.0);
  CHECK_THROWS_AS(kernel_column_distance(a, other, kLeft, pts, vol), ArgumentError);
}
