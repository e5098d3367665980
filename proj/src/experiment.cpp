#include "qpat/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>

#include "qpat/diffusion.hpp"
#include "qpat/error.hpp"
#include "qpat/harness.hpp"
#include "qpat/hgmodel.hpp"
#include "qpat/io.hpp"
#include "qpat/parallel.hpp"
#include "qpat/reconstruct.hpp"
#include "qpat/singularity.hpp"
#include "qpat/transport.hpp"

namespace qpat::io {

namespace fs = std::filesystem;
using json = nlohmann::json;
using F = CoefficientField;

namespace {

// Line lookup for diagnostics: nlohmann does not keep source positions, so a
// key is located by its first quoted occurrence.
class Diagnostics {
 public:
  explicit Diagnostics(const std::string& text) : text_(text) {}

  std::size_t line_of(const std::string& key) const {
    const auto pos = text_.find("\"" + key + "\"");
    return pos == std::string::npos ? 1 : line_at(pos);
  }
  std::size_t line_at(std::size_t offset) const {
    return 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + std::min(offset, text_.size()), '\n'));
  }
  void add(const std::string& key, const std::string& message) {
    messages_.push_back("line " + std::to_string(line_of(key)) + ": " + message);
  }
  [[noreturn]] void fail(const std::string& key, const std::string& message) {
    add(key, message);
    throw ConfigError(messages_);
  }
  void throw_if_any() const {
    if (!messages_.empty()) throw ConfigError(messages_);
  }

 private:
  const std::string& text_;
  std::vector<std::string> messages_;
};

thread_local Diagnostics* g_diag = nullptr;
thread_local std::vector<std::string>* g_inputs = nullptr;

[[noreturn]] void config_fail(const std::string& key, const std::string& message) {
  if (g_diag) g_diag->fail(key, message);
  throw ConfigError({message});
}

double get_number(const json& j, const std::string& key, std::optional<double> fallback = {},
                  double lo = -std::numeric_limits<double>::infinity(),
                  double hi = std::numeric_limits<double>::infinity()) {
  if (!j.is_object() || !j.contains(key)) {
    if (fallback) return *fallback;
    config_fail(key, "missing required number '" + key + "'");
  }
  const auto& v = j.at(key);
  if (!v.is_number()) config_fail(key, "'" + key + "' must be a number");
  const double x = v.get<double>();
  if (!(x >= lo && x <= hi)) {
    std::ostringstream os;
    os << "'" << key << "' = " << x << " outside [" << lo << ", " << hi << "]";
    config_fail(key, os.str());
  }
  return x;
}

int get_int(const json& j, const std::string& key, int fallback, int lo, int hi) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) config_fail(key, "'" + key + "' must be an integer");
  const auto x = v.get<long long>();
  if (x < lo || x > hi) config_fail(key, "'" + key + "' = " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(x);
}

bool get_bool(const json& j, const std::string& key, bool fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) config_fail(key, "'" + key + "' must be true or false");
  return j.at(key).get<bool>();
}

std::string get_string(const json& j, const std::string& key, const std::string& fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  if (!j.at(key).is_string()) config_fail(key, "'" + key + "' must be a string");
  return j.at(key).get<std::string>();
}

Vec3 get_vec(const json& j, const std::string& key, int dimension) {
  if (!j.is_object() || !j.contains(key)) config_fail(key, "missing vector '" + key + "'");
  const auto& v = j.at(key);
  if (!v.is_array() || static_cast<int>(v.size()) != dimension)
    config_fail(key, "'" + key + "' must be an array of " + std::to_string(dimension) + " numbers");
  double c[3] = {0, 0, 0};
  for (int i = 0; i < dimension; ++i) {
    if (!v[i].is_number()) config_fail(key, "'" + key + "' must contain numbers");
    c[i] = v[i].get<double>();
  }
  return {c[0], c[1], c[2]};
}

BoundaryPair get_pair(const json& j, const DomainGeometry& geo) {
  const int n = geo.dimension();
  const Vec3 p = get_vec(j, "point", n);
  Vec3 v = get_vec(j, "direction", n);
  if (norm(v) == 0.0) config_fail("direction", "direction must be nonzero");
  v = normalized(v);
  const BoundaryPair pair{p, v};
  if (std::abs(geo.distance_to_boundary(p)) > 1e-9 * geo.radius())
    config_fail("point", "pair point must lie on the boundary");
  if (dot(geo.outward_normal(p), v) >= 0.0) config_fail("direction", "pair direction must point into the domain");
  return pair;
}

DomainGeometry parse_geometry(const json& j) {
  const int n = get_int(j, "dimension", 2, 2, 3);
  const double r = get_number(j, "radius", 1.0, 1e-12, 1e12);
  const Vec3 c = j.contains("center") ? get_vec(j, "center", n) : Vec3{};
  return DomainGeometry(n, c, r);
}

}  // namespace

CoefficientField parse_field(const json& spec, const std::string& base_dir) {
  if (spec.is_number()) return F::constant(spec.get<double>());
  if (!spec.is_object() || !spec.contains("type") || !spec.at("type").is_string())
    config_fail("type", "a field must be a number or an object with a string 'type'");
  const std::string type = spec.at("type").get<std::string>();
  const int n = spec.contains("center") && spec.at("center").is_array() ? static_cast<int>(spec.at("center").size()) : 2;
  if (type == "constant") return F::constant(get_number(spec, "value"));
  if (type == "radial") {
    if (!spec.contains("coeffs") || !spec.at("coeffs").is_array() || spec.at("coeffs").empty())
      config_fail("coeffs", "radial field needs a nonempty 'coeffs' array");
    std::vector<double> c;
    for (const auto& x : spec.at("coeffs")) {
      if (!x.is_number()) config_fail("coeffs", "'coeffs' must contain numbers");
      c.push_back(x.get<double>());
    }
    const Vec3 center = spec.contains("center") ? get_vec(spec, "center", n) : Vec3{};
    return F::radial_polynomial(center, c);
  }
  if (type == "gaussian")
    return F::gaussian_bump(get_number(spec, "base", 0.0), get_number(spec, "amplitude"), get_vec(spec, "center", n),
                            get_number(spec, "width", {}, 1e-12));
  if (type == "linear") {
    const double base = get_number(spec, "base", 0.0);
    const int m = spec.contains("gradient") && spec.at("gradient").is_array() ? static_cast<int>(spec.at("gradient").size()) : 2;
    const Vec3 grad = get_vec(spec, "gradient", m);
    return F::analytic([base, grad](const Vec3& x) { return base + dot(grad, x); }, "linear");
  }
  if (type == "cosh") {
    const int axis = get_int(spec, "axis", 0, 0, 2);
    const double scale = get_number(spec, "scale", 1.0);
    return F::analytic(
        [axis, scale](const Vec3& x) { return scale * std::cosh(axis == 0 ? x.x : axis == 1 ? x.y : x.z); }, "cosh");
  }
  if (type == "pgrid") {
    const std::string rel = get_string(spec, "path", "");
    if (rel.empty()) config_fail("path", "pgrid field needs a 'path'");
    const fs::path p = fs::path(base_dir) / rel;
    if (!fs::exists(p)) config_fail("path", "file not found: " + p.string());
    try {
      auto grid = read_pgrid(p.string());
      if (g_inputs) g_inputs->push_back(p.string());
      return F::gridded(std::move(grid));
    } catch (const FormatError& e) {
      config_fail("path", p.string() + ": " + e.what());
    }
  }
  config_fail("type", "unknown field type '" + type + "'");
}

namespace {

OpticalMedium parse_medium(const json& j, const DomainGeometry& geo, const std::string& base_dir) {
  if (!j.is_object()) config_fail("medium", "'medium' must be an object");
  if (!j.contains("sigma_a")) config_fail("medium", "medium needs 'sigma_a'");
  const F sa = parse_field(j.at("sigma_a"), base_dir);
  const std::string phase_name = get_string(j, "phase", j.contains("sigma_s") ? "isotropic" : "none");
  PhaseFunction phase;
  if (phase_name == "none") {
    phase = PhaseFunction::none();
  } else if (phase_name == "isotropic" || phase_name == "hg") {
    if (!j.contains("sigma_s")) config_fail("phase", "phase '" + phase_name + "' needs 'sigma_s'");
    const F ss = parse_field(j.at("sigma_s"), base_dir);
    phase = phase_name == "hg" ? PhaseFunction::henyey_greenstein(ss, parse_field(j.contains("g") ? j.at("g") : json(0.0), base_dir))
                               : PhaseFunction::isotropic(ss);
  } else {
    config_fail("phase", "phase must be none, isotropic or hg");
  }
  const double sigma0 = get_number(j, "sigma0", {}, 1e-300);
  const double bound = get_number(j, "bound", {}, sigma0);
  try {
    return OpticalMedium::from_absorption(geo, sa, phase, sigma0, bound);
  } catch (const ArgumentError& e) {
    config_fail("medium", e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  Diagnostics diag(text);
  ExperimentConfig cfg;
  cfg.text = text;
  cfg.base_dir = base_dir;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({"line " + std::to_string(diag.line_at(e.byte == 0 ? 0 : e.byte - 1)) + ": invalid JSON (" + e.what() + ")"});
  }
  if (!root.is_object()) throw ConfigError({"line 1: configuration must be a JSON object"});
  g_diag = &diag;
  g_inputs = &cfg.inputs;
  struct Reset {
    ~Reset() {
      g_diag = nullptr;
      g_inputs = nullptr;
    }
  } reset;

  static const std::vector<std::string> known = {"task", "seed", "output", "geometry", "medium", "params"};
  for (const auto& [key, value] : root.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) diag.add(key, "unknown key '" + key + "'");
  if (!root.contains("task") || !root.at("task").is_string()) {
    diag.add("task", "missing string 'task'");
  } else {
    cfg.task = root.at("task").get<std::string>();
    if (std::find(kTasks.begin(), kTasks.end(), cfg.task) == kTasks.end()) diag.add("task", "unknown task '" + cfg.task + "'");
  }
  if (root.contains("seed")) {
    if (!root.at("seed").is_number_unsigned()) diag.add("seed", "'seed' must be a nonnegative integer");
    else cfg.seed = root.at("seed").get<std::uint64_t>();
  }
  if (root.contains("output")) {
    if (!root.at("output").is_string()) diag.add("output", "'output' must be a string");
    else cfg.output = root.at("output").get<std::string>();
  }
  cfg.params = root.value("params", json::object());
  if (!cfg.params.is_object()) diag.add("params", "'params' must be an object");
  diag.throw_if_any();

  if (root.contains("geometry")) cfg.geometry = parse_geometry(root.at("geometry"));
  const bool needs_medium = cfg.task == "forward" || cfg.task == "kernel" || cfg.task == "asymfit" ||
                            cfg.task == "recon-sigma" || cfg.task == "recon-g";
  if (needs_medium || cfg.task == "diffusion") {
    if (!cfg.geometry) diag.fail("task", "task '" + cfg.task + "' needs a 'geometry'");
  }
  if (needs_medium) {
    if (!root.contains("medium")) diag.fail("task", "task '" + cfg.task + "' needs a 'medium'");
    cfg.medium = parse_medium(root.at("medium"), *cfg.geometry, base_dir);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError({"line 0: configuration file not found: " + path});
  const auto dir = fs::path(path).parent_path();
  return parse_config(read_file(path), dir.empty() ? "." : dir.string());
}

namespace {

struct TaskContext {
  const ExperimentConfig& cfg;
  fs::path out;
  std::uint64_t seed;
  std::vector<std::string> outputs;
  Diagnostics* diag;

  void write(const std::string& name, const std::string& bytes) {
    write_file((out / name).string(), bytes);
    outputs.push_back(name);
  }
};

double rel_l1(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::abs(a[i] - b[i]);
    den += std::abs(b[i]);
  }
  return den > 0 ? num / den : num;
}

json task_forward(TaskContext& ctx) {
  const auto& p = ctx.cfg.params;
  const auto& m = *ctx.cfg.medium;
  if (m.dimension() != 2) config_fail("task", "forward solver supports n = 2 only");
  TransportOptions opt;
  opt.cells_per_side = get_int(p, "cells", 64, 4, 4096);
  opt.angles = get_int(p, "angles", 32, 4, 4096);
  opt.tol = get_number(p, "tol", 1e-8, 1e-16, 1.0);
  opt.max_orders = get_int(p, "max_orders", 200, 1, 100000);
  BoundarySource source = BoundarySource::uniform(1.0);
  if (p.contains("source")) {
    const auto& s = p.at("source");
    const std::string type = get_string(s, "type", "uniform");
    if (type == "uniform") {
      source = BoundarySource::uniform(get_number(s, "value", 1.0, 0.0));
    } else if (type == "beam") {
      Beam b{get_pair(s, m.geometry()), get_number(s, "width_s", 0.02, 1e-6, 1.0), get_number(s, "width_theta", 0.02, 1e-6, 1.0)};
      source = BoundarySource::from_beam(b);
    } else {
      config_fail("type", "source type must be uniform or beam");
    }
  }
  TransportSolver solver(m, opt);
  const auto sol = solver.solve(source);
  ctx.write("H.pgrid", encode_pgrid(sol.energy.to_grid()));
  CsvTable orders{{"order", "norm", "energy"}, {}};
  for (std::size_t i = 0; i < sol.order_norms.size(); ++i)
    orders.rows.push_back({static_cast<double>(i), sol.order_norms[i], sol.order_energy[i]});
  ctx.write("orders.csv", encode_csv(orders));
  return {{"integral_H", sol.energy.integral()}, {"orders", sol.order_norms.size()}};
}

json task_kernel(TaskContext& ctx) {
  const auto& p = ctx.cfg.params;
  const auto& m = *ctx.cfg.medium;
  if (!p.contains("pair")) config_fail("params", "kernel task needs params.pair");
  const auto pair = get_pair(p.at("pair"), m.geometry());
  const int cells = get_int(p, "cells", 32, 2, 512);
  const bool with_alpha2 = get_bool(p, "alpha2", m.dimension() == 2);
  const int n = m.dimension();
  const double r = m.geometry().radius(), h = 2 * r / cells;
  std::vector<Vec3> points;
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j)
      for (int k = 0; k < (n == 3 ? cells : 1); ++k) {
        const Vec3 q = m.geometry().center() +
                       Vec3{-r + (i + 0.5) * h, -r + (j + 0.5) * h, n == 3 ? -r + (k + 0.5) * h : 0.0};
        if (m.geometry().contains(q)) points.push_back(q);
      }
  const auto col = kernel_column(m, pair, points, with_alpha2 && n == 2);
  CsvTable t{n == 2 ? std::vector<std::string>{"x", "y", "gamma1"} : std::vector<std::string>{"x", "y", "z", "gamma1"}, {}};
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(col.values[i])) {
      ++skipped;
      continue;
    }
    if (n == 2) t.rows.push_back({points[i].x, points[i].y, col.values[i]});
    else t.rows.push_back({points[i].x, points[i].y, points[i].z, col.values[i]});
  }
  ctx.write("kernel.csv", encode_csv(t));
  return {{"points", t.rows.size()}, {"on_ray_skipped", skipped}};
}

json task_asymfit(TaskContext& ctx) {
  const auto& p = ctx.cfg.params;
  const auto& m = *ctx.cfg.medium;
  const auto& geo = m.geometry();
  if (!p.contains("pair")) config_fail("params", "asymfit task needs params.pair");
  const auto pair = get_pair(p.at("pair"), geo);
  const double tau = geo.exit_time(pair.point, pair.direction);
  const double t0 = get_number(p, "t0", 0.5 * tau, 0.0, tau);
  const int n = geo.dimension();
  const double angle = get_number(p, "offset_angle", 0.0);
  Vec3 w;
  if (n == 2) {
    w = Vec3{-pair.direction.y, pair.direction.x, 0.0};
  } else {
    const Vec3 s = std::abs(pair.direction.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const Vec3 a = normalized(s - dot(s, pair.direction) * pair.direction);
    w = std::cos(angle) * a + std::sin(angle) * cross(pair.direction, a);
  }
  const double eps_min = get_number(p, "eps_min", 0x1p-14, 1e-12, 1.0);
  const double eps_max = get_number(p, "eps_max", 0x1p-4, eps_min, 1.0);
  const auto eps = eps_schedule(geo, pair, t0, w, eps_min, eps_max);
  const auto samples = probe_alpha1(m, pair, t0, eps, w);
  const auto fit = fit_singular(samples);
  CsvTable t{{"eps", "f", "model"}, {}};
  for (std::size_t i = 0; i < fit.eps.size(); ++i) t.rows.push_back({fit.eps[i], fit.f[i], fit.model[i]});
  ctx.write("asymfit.csv", encode_csv(t));
  const Vec3 x = pair.point + t0 * pair.direction;
  const double analytic = singular_coefficient(m, x, pair.direction);
  return {{"law", fit.law == SingularLaw::log ? "log" : "power"},
          {"coefficient", fit.coefficient},
          {"analytic_coefficient", analytic},
          {"relative_error", analytic != 0 ? std::abs(fit.coefficient - analytic) / std::abs(analytic) : std::abs(fit.coefficient)},
          {"residual", fit.residual},
          {"observed_order", fit.observed_order}};
}

json task_recon_sigma(TaskContext& ctx) {
  const auto& p = ctx.cfg.params;
  const auto& m = *ctx.cfg.medium;
  const auto& geo = m.geometry();
  if (!p.contains("pairs") || !p.at("pairs").is_array() || p.at("pairs").empty())
    config_fail("params", "recon-sigma needs a nonempty params.pairs array");
  const int samples = get_int(p, "samples", 1000, 16, 10000000);
  const std::string mode = get_string(p, "mode", "symmetric");
  if (mode != "symmetric" && mode != "scattering-free") config_fail("mode", "mode must be symmetric or scattering-free");
  ReconstructionConfig rc;
  rc.collar = get_number(p, "collar", rc.collar, 0.0, 0.5);
  rc.smoothing_half_width = get_int(p, "smoothing_half_width", rc.smoothing_half_width, 0, 1000);
  const auto sigma = m.sigma_field();
  if (get_bool(p, "known_collar", true)) rc.known_sigma = [&](const Vec3& x, const Vec3& v) { return sigma(x, v); };
  json lines = json::array();
  std::size_t index = 0;
  for (const auto& pj : p.at("pairs")) {
    const auto pair = get_pair(pj, geo);
    const double tau = geo.exit_time(pair.point, pair.direction);
    std::vector<double> ts(samples);
    for (int i = 0; i < samples; ++i) ts[i] = tau * i / (samples - 1.0);
    const auto f = eta_profile(m, pair, ts);
    std::vector<double> sa, sig, sa_true, sig_true;
    for (double t : ts) {
      const Vec3 y = pair.point + t * pair.direction;
      sa_true.push_back(m.sigma_a(y, pair.direction));
      sig_true.push_back(m.sigma(y, pair.direction));
    }
    CsvTable t;
    json line{{"index", index}};
    if (mode == "scattering-free") {
      const auto r = recover_sigma_a_scattering_free(f, tau, m.bound());
      sa = r.sigma_a;
      t.header = {"t", "sigma_a", "sigma_a_true"};
      for (int i = 0; i < samples; ++i) t.rows.push_back({ts[i], sa[i], sa_true[i]});
      line["flagged"] = r.flagged;
    } else {
      std::vector<double> rs(samples);
      for (int i = 0; i < samples; ++i) rs[i] = tau - ts[i];
      const auto back = eta_profile(m, geo.reversed(pair), rs);
      // reverse profile indexed by forward time
      LineProfile reverse{geo.reversed(pair), ts, {}};
      reverse.values.assign(back.values.rbegin(), back.values.rend());
      const auto h = recover_h_profile(f, reverse, 2.0 * m.bound());
      const auto r = recover_sigma_symmetric(h, f, rc, tau);
      sa = r.sigma_a;
      sig = r.sigma;
      t.header = {"t", "sigma", "sigma_true", "sigma_a", "sigma_a_true"};
      for (int i = 0; i < samples; ++i) t.rows.push_back({ts[i], sig[i], sig_true[i], sa[i], sa_true[i]});
      line["sigma_rel_l1"] = rel_l1(sig, sig_true);
      line["offset"] = r.offset;
      line["warnings"] = r.warnings;
    }
    line["sigma_a_rel_l1"] = rel_l1(sa, sa_true);
    ctx.write("recon_sigma_" + std::to_string(index) + ".csv", encode_csv(t));
    lines.push_back(line);
    ++index;
  }
  return {{"mode", mode}, {"lines", lines}};
}

json task_recon_g(TaskContext& ctx) {
  const auto& p = ctx.cfg.params;
  const auto& m = *ctx.cfg.medium;
  if (m.dimension() != 2) config_fail("task", "recon-g supports n = 2 only");
  if (!p.contains("probes") || !p.at("probes").is_array() || p.at("probes").empty())
    config_fail("probes", "recon-g needs a nonempty params.probes array");
  std::vector<Vec3> probes;
  for (const auto& q : p.at("probes")) {
    if (!q.is_array() || q.size() != 2 || !q[0].is_number() || !q[1].is_number())
      config_fail("probes", "each probe must be [x, y]");
    probes.push_back({q[0].get<double>(), q[1].get<double>()});
    if (!m.geometry().contains(probes.back())) config_fail("probes", "probe outside the domain");
  }
  GPipelineOptions opt;
  opt.eps_min = get_number(p, "eps_min", opt.eps_min, 1e-12, 1.0);
  opt.eps_max = get_number(p, "eps_max", opt.eps_max, opt.eps_min, 1.0);
  opt.chord_samples = static_cast<std::size_t>(get_int(p, "chord_samples", static_cast<int>(opt.chord_samples), 16, 10000000));
  ReconstructionConfig rc;
  const auto sigma = m.sigma_field();
  rc.known_sigma = [&](const Vec3& x, const Vec3& v) { return sigma(x, v); };
  const auto res = run_g_pipeline(m, probes, rc, opt);
  CsvTable t{{"x", "y", "g", "g_true", "sigma_g", "status"}, {}};
  std::vector<double> g, truth;
  for (const auto& r : res) {
    const double gt = m.anisotropy(r.x);
    t.rows.push_back({r.x.x, r.x.y, r.g, gt, r.sigma_g, static_cast<double>(r.status)});
    if (r.status == GStatus::ok) {
      g.push_back(r.g);
      truth.push_back(gt);
    }
  }
  ctx.write("recon_g.csv", encode_csv(t));
  return {{"probes", res.size()}, {"ok", g.size()}, {"g_rel_l1", rel_l1(g, truth)}};
}

json task_diffusion(TaskContext& ctx) {
  const auto& p = ctx.cfg.params;
  const auto& geo = *ctx.cfg.geometry;
  if (geo.dimension() != 2) config_fail("geometry", "diffusion supports n = 2 only");
  const int cells = get_int(p, "cells", 128, 4, 8192);
  SpatialGrid grid(geo, cells);
  const bool cosh = get_string(p, "manufactured", "") == "cosh";
  const F D = cosh ? F::constant(1.0) : parse_field(p.contains("D") ? p.at("D") : json(1.0), ctx.cfg.base_dir);
  const F phi_f = cosh ? parse_field(json{{"type", "cosh"}}, ".") : (p.contains("phi") ? parse_field(p.at("phi"), ctx.cfg.base_dir) : F::constant(1.0));
  if (!cosh && !p.contains("H")) config_fail("params", "diffusion needs params.H or manufactured = \"cosh\"");
  const F H_f = cosh ? phi_f : parse_field(p.at("H"), ctx.cfg.base_dir);
  std::vector<double> H(grid.cell_count(), 0.0);
  for (std::size_t c = 0; c < H.size(); ++c)
    if (grid.active(c)) H[c] = H_f(grid.center(c));
  DiffusionProblem prob{grid, D, [phi_f](const Vec3& x) { return phi_f(x); }, H};
  const auto sol = solve_intensity(prob);
  const auto sa = recover_sigma_a_diffusive(EnergyMap{grid, H}, sol.intensity, default_i_min(sol),
                                            get_number(p, "sigma0", 0.0, 0.0));
  auto sa_map = sa.sigma_a;
  for (auto& v : sa_map.values)
    if (!std::isfinite(v)) v = 0.0;
  ctx.write("intensity.pgrid", encode_pgrid(sol.intensity.to_grid()));
  ctx.write("sigma_a.pgrid", encode_pgrid(sa_map.to_grid()));
  json out{{"iterations", sol.residuals.size() - 1},
           {"final_residual", sol.residuals.back()},
           {"excluded", sa.excluded.size()},
           {"below_sigma0", sa.below_sigma0.size()},
           {"nonpositive_intensity", sol.nonpositive.size()}};
  if (cosh) {
    double e = 0.0;
    for (std::size_t c = 0; c < grid.cell_count(); ++c)
      if (grid.active(c)) e = std::max(e, std::abs(sa.sigma_a.values[c] - 1.0));
    out["sigma_a_max_error"] = e;
  }
  if (p.contains("stability_delta"))
    out["stability_constant"] = diffusion_stability_constant(prob, get_number(p, "stability_delta", {}, 1e-12, 0.5));
  return out;
}

std::string report_line(std::size_t pair, const StabilityReport& r) {
  std::ostringstream os;
  os << "pair " << pair << "  " << r.id << ": lhs " << r.lhs << "  rhs " << r.rhs << "  margin " << r.margin << "  "
     << (r.passed ? "PASS" : "FAIL");
  if (!r.note.empty()) os << "  (" << r.note << ")";
  return os.str();
}

json task_stability(TaskContext& ctx) {
  const auto& p = ctx.cfg.params;
  const int pairs = get_int(p, "pairs", 3, 1, 100);
  const bool kernel_bounds = get_bool(p, "kernel_bounds", false);
  HarnessSampling s;
  s.sup_points = static_cast<std::size_t>(get_int(p, "sup_points", static_cast<int>(s.sup_points), 0, 100000));
  s.grid_cells = get_int(p, "grid_cells", s.grid_cells, 4, 512);
  const BoundaryPair pair{{-1, 0}, {1, 0}};
  const double t0 = get_number(p, "t0", 1.1, 1e-3, 2.0 - 1e-3);
  CsvTable t{{"pair", "check", "lhs", "rhs", "constant", "margin", "tolerance", "passed", "samples"}, {}};
  std::string summary;
  json reports = json::array();
  std::size_t failed = 0;
  for (int i = 0; i < pairs; ++i) {
    s.seed = ctx.seed + static_cast<std::uint64_t>(i);
    const auto [a, b] = seeded_medium_pair(s.seed);
    const Vec3 x = pair.point + t0 * pair.direction;
    const std::vector<LineProbe> probes{{pair, t0}};
    std::vector<StabilityReport> rs{check_ballistic_stability(a, b, pair, s),
                                    check_single_scattering_stability(a, b, pair, x, s),
                                    check_h_stability(a, b, pair, s),
                                    check_hg_sigma_g_stability(a, b, probes, 1e-3, s)};
    if (kernel_bounds)
      for (auto& r : check_kernel_bounds(a, s)) rs.push_back(r);
    for (std::size_t k = 0; k < rs.size(); ++k) {
      const auto& r = rs[k];
      t.rows.push_back({static_cast<double>(i), static_cast<double>(k), r.lhs, r.rhs, r.constant, r.margin, r.tolerance,
                        r.passed ? 1.0 : 0.0, static_cast<double>(r.samples)});
      summary += report_line(static_cast<std::size_t>(i), r) + "\n";
      json d = json::object();
      for (const auto& [key, v] : r.details) d[key] = v;
      reports.push_back({{"pair", i}, {"check", k}, {"id", r.id}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"margin", r.margin},
                         {"passed", r.passed}, {"details", d}});
      if (!r.passed) ++failed;
    }
  }
  ctx.write("reports.csv", encode_csv(t));
  ctx.write("summary.txt", summary);
  return {{"reports", reports}, {"failed", failed}};
}

json task_selftest(TaskContext& ctx) {
  std::vector<std::pair<std::string, std::function<bool()>>> checks;
  const auto disk = DomainGeometry::unit_disk();
  checks.emplace_back("isotropic kernel integrates to sigma_s", [] {
    double s = 0;
    const int n = 720;
    for (int i = 0; i < n; ++i) s += hg_phase(std::cos(2 * std::numbers::pi * (i + 0.5) / n), 0.0, 0.7, 2);
    return std::abs(s * 2 * std::numbers::pi / n - 0.7) < 1e-12;
  });
  checks.emplace_back("h(0) equals 1/pi and 1/4", [] {
    return std::abs(hg::h_of_g(0.0, 2) - 1 / std::numbers::pi) < 1e-15 && std::abs(hg::h_of_g(0.0, 3) - 0.25) < 1e-15;
  });
  checks.emplace_back("identical media give empty ballistic report", [&] {
    const auto m = OpticalMedium::from_absorption(disk, F::constant(0.5), PhaseFunction::none(), 0.1, 5.0);
    HarnessSampling s;
    s.pairs = 1;
    s.grid_cells = 8;
    const auto r = check_ballistic_stability(m, m, {{-1, 0}, {1, 0}}, s);
    return r.lhs == 0.0 && r.rhs == 0.0 && r.passed;
  });
  checks.emplace_back("exponential profile gives unit absorption", [] {
    LineProfile pr{{{-1, 0}, {1, 0}}, {}, {}};
    for (int i = 0; i < 200; ++i) {
      pr.ts.push_back(2.0 * i / 199.0);
      pr.values.push_back(std::exp(-pr.ts.back()));
    }
    const auto r = recover_sigma_a_scattering_free(pr, 2.0);
    for (double v : r.sigma_a)
      if (std::abs(v - 1.0) > 1e-6) return false;
    return true;
  });
  checks.emplace_back("zero singular coefficient gives zero sigma_g", [] {
    const double c[] = {0.0}, s[] = {1.0};
    return recover_sigma_g(c, s, 0.5)[0] == 0.0;
  });
  checks.emplace_back("constant boundary data is harmonic", [&] {
    SpatialGrid g(disk, 16);
    DiffusionProblem p{g, F::constant(1.0), [](const Vec3&) { return 3.0; }, std::vector<double>(g.cell_count(), 0.0)};
    const auto s = solve_intensity(p);
    for (std::size_t c = 0; c < g.cell_count(); ++c)
      if (g.active(c) && std::abs(s.intensity.values[c] - 3.0) > 1e-8) return false;
    return true;
  });
  checks.emplace_back("PGRID 2x2 round trip", [] {
    GridData g{2, {2, 2}, {0, 1, 0, 1}, {1.0, -0.0, 1e-300, 3.5}};
    const auto back = decode_pgrid(encode_pgrid(g));
    for (std::size_t i = 0; i < 4; ++i)
      if (std::bit_cast<std::uint64_t>(back.values[i]) != std::bit_cast<std::uint64_t>(g.values[i])) return false;
    return back.dims == g.dims && back.extent == g.extent;
  });
  checks.emplace_back("FNV-1a reference value", [] { return fnv1a("a") == 0xaf63dc4c8601ec8cULL; });

  CsvTable t{{"check", "passed"}, {}};
  json names = json::array();
  std::size_t failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    bool ok = false;
    try {
      ok = checks[i].second();
    } catch (const std::exception&) {
      ok = false;
    }
    t.rows.push_back({static_cast<double>(i), ok ? 1.0 : 0.0});
    names.push_back({{"name", checks[i].first}, {"passed", ok}});
    if (!ok) ++failed;
  }
  ctx.write("selftest.csv", encode_csv(t));
  return {{"checks", names}, {"failed", failed}};
}

}  // namespace

int run_experiment(const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  try {
    cfg = load_config(options.config_path);
  } catch (const ConfigError& e) {
    for (const auto& d : e.diagnostics()) std::cerr << options.config_path << ": " << d << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << options.config_path << ": " << e.what() << "\n";
    return 2;
  }
  const std::uint64_t seed = options.seed.value_or(cfg.seed);
  fs::path out = options.out_dir.empty() ? fs::path(cfg.base_dir) / cfg.output : fs::path(options.out_dir);
  set_thread_count(options.threads);
  Diagnostics diag(cfg.text);
  g_diag = &diag;
  g_inputs = &cfg.inputs;
  struct Reset {
    ~Reset() {
      g_diag = nullptr;
      g_inputs = nullptr;
    }
  } reset;
  TaskContext ctx{cfg, out, seed, {}, &diag};
  json result;
  int code = 0;
  try {
    fs::create_directories(out);
    if (cfg.task == "forward") result = task_forward(ctx);
    else if (cfg.task == "kernel") result = task_kernel(ctx);
    else if (cfg.task == "asymfit") result = task_asymfit(ctx);
    else if (cfg.task == "recon-sigma") result = task_recon_sigma(ctx);
    else if (cfg.task == "recon-g") result = task_recon_g(ctx);
    else if (cfg.task == "diffusion") result = task_diffusion(ctx);
    else if (cfg.task == "stability") result = task_stability(ctx);
    else result = task_selftest(ctx);
    if (cfg.task == "selftest" && result.at("failed").get<std::size_t>() > 0) code = 3;
  } catch (const ConfigError& e) {
    for (const auto& d : e.diagnostics()) std::cerr << options.config_path << ": " << d << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "output: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << cfg.task << ": numeric failure: " << e.what() << "\n";
    code = 3;
    result = {{"error", e.what()}};
  }
  result["task"] = cfg.task;
  result["seed"] = seed;
  try {
    ctx.write("result.json", result.dump(2) + "\n");
    json manifest;
    manifest["version"] = kVersion;
    manifest["task"] = cfg.task;
    manifest["seed"] = seed;
    manifest["threads"] = options.threads;
    manifest["config"] = options.config_path;
    manifest["config_fnv1a"] = hex64(fnv1a(cfg.text));
    json inputs = json::array();
    for (const auto& f : cfg.inputs) inputs.push_back({{"path", f}, {"fnv1a", hex64(fnv1a(read_file(f)))}});
    manifest["inputs"] = inputs;
    json outputs = json::array();
    for (const auto& f : ctx.outputs) outputs.push_back({{"file", f}, {"fnv1a", hex64(fnv1a(read_file((out / f).string())))}});
    manifest["outputs"] = outputs;
    manifest["exit_code"] = code;
    manifest["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file((out / "manifest.json").string(), manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "output: " << e.what() << "\n";
    return 2;
  }
  if (!options.quiet) std::cout << result.dump(2) << "\n";
  return code;
}

}  // namespace qpat::io
