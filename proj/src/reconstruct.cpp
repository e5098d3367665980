#include "qpat/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qpat/error.hpp"
#include "qpat/hgmodel.hpp"
#include "qpat/parallel.hpp"
#include "qpat/quadrature.hpp"

namespace qpat {

namespace {

void check_profile(const LineProfile& p, const char* who) {
  if (p.ts.size() != p.values.size()) throw ArgumentError(std::string(who) + ": ts and values differ in length");
  if (p.ts.size() < 4) throw ArgumentError(std::string(who) + ": need at least four samples");
  for (std::size_t i = 1; i < p.ts.size(); ++i)
    if (!(p.ts[i] > p.ts[i - 1])) throw ArgumentError(std::string(who) + ": sample times must increase");
}

}  // namespace

ScatteringFreeResult recover_sigma_a_scattering_free(const LineProfile& profile, double chord, double bound) {
  check_profile(profile, "recover_sigma_a_scattering_free");
  for (double v : profile.values)
    if (!(v > 0.0)) throw DataInconsistencyError("scattering-free profile is not strictly positive (sigma_a >= sigma0 > 0 fails)");
  ScatteringFreeResult r;
  r.ts = profile.ts;
  const auto cum = quad::cumulative_integral(profile.ts, profile.values, 0.0);
  r.zeta.resize(cum.size());
  r.sigma_a.resize(cum.size());
  for (std::size_t i = 0; i < cum.size(); ++i) {
    r.zeta[i] = 1.0 - cum[i];
    if (!(r.zeta[i] > 0.0)) {
      std::ostringstream os;
      os << "zeta = 1 - int eta is not positive at t = " << profile.ts[i];
      throw DataInconsistencyError(os.str());
    }
    r.sigma_a[i] = profile.values[i] / r.zeta[i];
  }
  if (bound > 0.0) {
    const double floor = std::exp(-bound * chord) - 1e-8;
    r.flagged = std::any_of(r.zeta.begin(), r.zeta.end(), [&](double z) { return z < floor; });
  }
  return r;
}

std::vector<double> recover_h_profile(const LineProfile& forward, const LineProfile& reverse, double bound) {
  check_profile(forward, "recover_h_profile");
  check_profile(reverse, "recover_h_profile");
  for (const auto* p : {&forward, &reverse})
    for (double v : p->values)
      if (!(v > 0.0)) throw ArgumentError("recover_h_profile: profiles must be strictly positive");
  if (norm(forward.pair.direction + reverse.pair.direction) > 1e-9)
    throw ArgumentError("recover_h_profile: reverse profile does not run along the opposite direction");
  const double tau = norm(reverse.pair.point - forward.pair.point);
  const std::size_t n = forward.ts.size(), m = reverse.ts.size();
  std::vector<double> log_rev(m);
  for (std::size_t i = 0; i < m; ++i) log_rev[i] = std::log(reverse.values[i]);
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double tr = tau - forward.ts[i];
    double lr;
    if (m == n && std::abs(reverse.ts[n - 1 - i] - tr) <= 1e-12 * std::max(1.0, tau)) {
      lr = log_rev[n - 1 - i];
    } else {
      lr = quad::interpolate_cubic(reverse.ts, log_rev, tr);
    }
    h[i] = std::log(forward.values[i]) - lr;
    if (bound > 0.0 && std::abs(h[i]) > bound * (1 + 1e-9)) {
      std::ostringstream os;
      os << "recover_h_profile: |h| = " << std::abs(h[i]) << " exceeds the a-priori bound " << bound;
      throw DataInconsistencyError(os.str());
    }
  }
  return h;
}

LineReconstruction recover_sigma_symmetric(std::span<const double> h, const LineProfile& profile,
                                           const ReconstructionConfig& config, double chord) {
  check_profile(profile, "recover_sigma_symmetric");
  const std::size_t n = profile.ts.size();
  if (h.size() != n) throw ArgumentError("recover_sigma_symmetric: h and profile differ in length");
  if (config.smoothing_half_width < 0) throw ArgumentError("recover_sigma_symmetric: negative smoothing width");
  const auto& ts = profile.ts;
  const double dt = (ts.back() - ts.front()) / static_cast<double>(n - 1);
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(ts[i] - ts[i - 1] - dt) > 1e-8 * dt) throw ArgumentError("recover_sigma_symmetric: sample spacing is not uniform");

  LineReconstruction out;
  out.pair = profile.pair;
  out.ts = ts;
  out.h.assign(h.begin(), h.end());

  std::vector<double> raw(n);
  raw[0] = -0.5 * (-3 * h[0] + 4 * h[1] - h[2]) / (2 * dt);
  raw[n - 1] = -0.5 * (3 * h[n - 1] - 4 * h[n - 2] + h[n - 3]) / (2 * dt);
  for (std::size_t i = 1; i + 1 < n; ++i) raw[i] = -0.5 * (h[i + 1] - h[i - 1]) / (2 * dt);

  // Symmetric moving average, window shrinking near the ends.
  std::vector<double> sigma(n);
  const auto w = static_cast<std::size_t>(config.smoothing_half_width);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = std::min({w, i, n - 1 - i});
    double s = 0.0;
    for (std::size_t j = i - k; j <= i + k; ++j) s += raw[j];
    sigma[i] = s / static_cast<double>(2 * k + 1);
  }

  if (config.known_sigma && config.collar > 0.0) {
    const Vec3& y0 = profile.pair.point;
    const Vec3& v0 = profile.pair.direction;
    std::size_t a = n, b = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (ts[i] < config.collar || ts[i] > chord - config.collar) {
        sigma[i] = config.known_sigma(y0 + ts[i] * v0, v0);
      } else {
        a = std::min(a, i);
        b = std::max(b, i);
      }
    }
    // Pin the interior integral to the h difference across the interior.
    if (a < n && b > a) {
      double current = 0.0;
      for (std::size_t i = a; i < b; ++i) current += 0.5 * (sigma[i] + sigma[i + 1]) * (ts[i + 1] - ts[i]);
      const double target = 0.5 * (h[a] - h[b]);
      out.offset = (target - current) / (ts[b] - ts[a]);
      for (std::size_t i = a; i <= b; ++i) sigma[i] += out.offset;
    }
  }

  const auto cum = quad::cumulative_integral(ts, sigma, 0.0);
  out.sigma_a.resize(n);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double sa = profile.values[i] * std::exp(cum[i]);
    if (sa < 0.0) {
      sa = 0.0;
      ++out.clamped;
    }
    out.sigma_a[i] = sa;
    if (sigma[i] < sa - 1e-6 * std::max(1.0, std::abs(sigma[i]))) ++bad;
  }
  out.sigma = std::move(sigma);
  out.inconsistent_fraction = static_cast<double>(bad) / static_cast<double>(n);
  if (out.inconsistent_fraction > 0.05) {
    std::ostringstream os;
    os << "recovered sigma < sigma_a on " << 100 * out.inconsistent_fraction << "% of samples";
    out.warnings.push_back(os.str());
  }
  if (out.clamped > 0) out.warnings.push_back("negative sigma_a samples clamped to zero");
  return out;
}

std::vector<double> recover_sigma_g(std::span<const double> coefficients, std::span<const double> sigma_a,
                                    double sigma0) {
  if (coefficients.size() != sigma_a.size()) throw ArgumentError("recover_sigma_g: size mismatch");
  std::vector<double> out(coefficients.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(sigma_a[i] >= 0.5 * sigma0)) {
      std::ostringstream os;
      os << "recover_sigma_g: sigma_a = " << sigma_a[i] << " below sigma0/2 at probe " << i;
      throw DomainError(os.str());
    }
    out[i] = coefficients[i] / sigma_a[i];
  }
  return out;
}

GFieldResult recover_g_field(std::span<const double> sigma_g, std::span<const double> sigma,
                             std::span<const double> sigma_a, int dimension, double floor) {
  if (sigma_g.size() != sigma.size() || sigma.size() != sigma_a.size())
    throw ArgumentError("recover_g_field: size mismatch");
  GFieldResult r;
  const std::size_t n = sigma_g.size();
  r.g.assign(n, std::numeric_limits<double>::quiet_NaN());
  r.status.assign(n, GStatus::ok);
  for (std::size_t i = 0; i < n; ++i) {
    const double ss = sigma[i] - sigma_a[i];
    if (!(ss >= floor)) {
      r.status[i] = GStatus::excluded;
      r.excluded.push_back(i);
      continue;
    }
    try {
      r.g[i] = hg::invert_h(sigma_g[i] / ss, dimension);
    } catch (const OutOfRangeError&) {
      r.status[i] = GStatus::out_of_range;
      r.out_of_range.push_back(i);
    } catch (const SaturationError&) {
      r.status[i] = GStatus::saturated;
      r.saturated.push_back(i);
    }
  }
  return r;
}

std::vector<GProbe> run_g_pipeline(const OpticalMedium& medium, std::span<const Vec3> probes,
                                   const ReconstructionConfig& config, const GPipelineOptions& options) {
  if (medium.dimension() != 2) throw UnsupportedDimensionError("run_g_pipeline: n = 2 only");
  if (probes.empty() || options.directions.empty()) throw ArgumentError("run_g_pipeline: empty probe or direction set");
  if (options.chord_samples < 16) throw ArgumentError("run_g_pipeline: too few chord samples");
  const auto& geo = medium.geometry();
  const std::size_t nd = options.directions.size();

  struct Job {
    double sigma, sigma_a, coefficient;
    SingularFit fit;
  };
  std::vector<Job> jobs(probes.size() * nd);
  parallel_for(jobs.size(), [&](std::size_t k) {
    const Vec3 x = probes[k / nd];
    const Vec3 v = unit_angle(options.directions[k % nd]);
    const BoundaryPair pair = geo.entry_pair(x, v);
    const double tau = geo.exit_time(pair.point, v);
    const double t0 = norm(x - pair.point);
    std::vector<double> ts(options.chord_samples);
    for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = tau * static_cast<double>(i) / static_cast<double>(ts.size() - 1);

    // Ballistic stage: both orientations of the chord.
    const auto fwd = eta_profile(medium, pair, ts);
    const auto rev = eta_profile(medium, geo.reversed(pair), ts);
    const auto h = recover_h_profile(fwd, rev);
    const auto line = recover_sigma_symmetric(h, fwd, config, tau);
    const auto cum = quad::cumulative_integral(ts, line.sigma, 0.0);
    Job& job = jobs[k];
    job.sigma = quad::interpolate_cubic(ts, line.sigma, t0);
    job.sigma_a = quad::interpolate_cubic(ts, line.sigma_a, t0);
    const double e_rec = std::exp(-quad::interpolate_cubic(ts, cum, t0));

    // Singular stage: alpha_1 data normalised with the reconstructed attenuation.
    const Vec3 w = rot90(v);
    const auto eps = eps_schedule(geo, pair, t0, w, options.eps_min, options.eps_max);
    SingularSamples s{pair, t0, w, 2, eps, std::vector<double>(eps.size())};
    const double inc = geo.incidence(pair);
    for (std::size_t i = 0; i < eps.size(); ++i) s.f[i] = alpha1(medium, x + eps[i] * w, pair) / (e_rec * inc);
    job.fit = fit_singular(s);
    job.coefficient = job.fit.coefficient;
  });

  std::vector<GProbe> out(probes.size());
  std::vector<double> coef(probes.size()), sig(probes.size()), sa(probes.size());
  for (std::size_t p = 0; p < probes.size(); ++p) {
    out[p].x = probes[p];
    for (std::size_t d = 0; d < nd; ++d) {
      const Job& j = jobs[p * nd + d];
      sig[p] += j.sigma / nd;
      sa[p] += j.sigma_a / nd;
      coef[p] += j.coefficient / nd;
      out[p].fits.push_back(j.fit);
    }
  }
  const auto sg = recover_sigma_g(coef, sa, medium.sigma0());
  const auto gr = recover_g_field(sg, sig, sa, 2, config.sigma_s_floor);
  for (std::size_t p = 0; p < probes.size(); ++p) {
    out[p].sigma = sig[p];
    out[p].sigma_a = sa[p];
    out[p].sigma_g = sg[p];
    out[p].g = gr.g[p];
    out[p].status = gr.status[p];
  }
  return out;
}

}  // namespace qpat
