#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qpat/error.hpp"
#include "qpat/experiment.hpp"
#include "qpat/hgmodel.hpp"
#include "qpat/io.hpp"
#include "qpat/medium.hpp"
#include "qpat/reconstruct.hpp"
#include "qpat/transport.hpp"

namespace py = pybind11;
using namespace qpat;

namespace {

py::array_t<double> to_array(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
  py::array_t<double> a(shape);
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

py::tuple read_pgrid(const std::string& path) {
  const auto g = io::read_pgrid(path);
  std::vector<py::ssize_t> shape(g.dims.begin(), g.dims.end());
  return py::make_tuple(to_array(g.values, shape), g.extent);
}

void write_pgrid(const std::string& path, const py::array_t<double, py::array::c_style | py::array::forcecast>& values,
                 const std::vector<double>& extent) {
  GridData g;
  g.dimension = static_cast<int>(values.ndim());
  for (py::ssize_t i = 0; i < values.ndim(); ++i) g.dims.push_back(static_cast<std::size_t>(values.shape(i)));
  g.extent = extent;
  g.values = to_vector(values);
  io::write_pgrid(path, g);
}

// Forward solve on the unit disk with constant coefficients.
py::dict forward_constant(double sigma_a, double sigma_s, double g, int cells, int angles, double tol) {
  const auto disk = DomainGeometry::unit_disk();
  const auto phase = sigma_s == 0.0 ? PhaseFunction::none()
                     : g == 0.0     ? PhaseFunction::isotropic(CoefficientField::constant(sigma_s))
                                    : PhaseFunction::henyey_greenstein(CoefficientField::constant(sigma_s),
                                                                       CoefficientField::constant(g));
  const double bound = std::max(1.0, 10.0 * (sigma_a + sigma_s) + (g > 0 ? hg_phase(1.0, g, sigma_s, 2) : 0.0));
  const auto m = OpticalMedium::from_absorption(disk, CoefficientField::constant(sigma_a), phase, sigma_a, bound);
  TransportOptions opt;
  opt.cells_per_side = cells;
  opt.angles = angles;
  opt.tol = tol;
  TransportSolver solver(m, opt);
  const auto sol = solver.solve(BoundarySource::uniform(1.0));
  const auto grid = sol.energy.to_grid();
  py::dict d;
  d["H"] = to_array(grid.values, {static_cast<py::ssize_t>(grid.dims[0]), static_cast<py::ssize_t>(grid.dims[1])});
  d["extent"] = grid.extent;
  d["integral"] = sol.energy.integral();
  d["order_norms"] = sol.order_norms;
  return d;
}

py::array_t<double> sigma_a_scattering_free(const py::array_t<double, py::array::c_style | py::array::forcecast>& ts,
                                            const py::array_t<double, py::array::c_style | py::array::forcecast>& eta,
                                            double chord) {
  LineProfile p{{{-1, 0}, {1, 0}}, to_vector(ts), to_vector(eta)};
  const auto r = recover_sigma_a_scattering_free(p, chord);
  return to_array(r.sigma_a, {static_cast<py::ssize_t>(r.sigma_a.size())});
}

int run(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed, int threads, bool quiet) {
  io::RunOptions o;
  o.config_path = config;
  o.out_dir = out;
  o.seed = seed;
  o.threads = threads;
  o.quiet = quiet;
  py::gil_scoped_release release;
  return io::run_experiment(o);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Transport, kernels and reconstructions for quantitative photoacoustics";
  m.attr("__version__") = std::string(io::kVersion);

  static py::exception<Error> base(m, "QpatError", PyExc_RuntimeError);
  static py::exception<ConfigError> config(m, "ConfigError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      std::string msg;
      for (const auto& d : e.diagnostics()) msg += (msg.empty() ? "" : "\n") + d;
      py::set_error(config, msg.c_str());
    } catch (const ArgumentError& e) {
      py::set_error(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def("hg_phase", &hg_phase, py::arg("cosine"), py::arg("g"), py::arg("sigma_s"), py::arg("dimension") = 2);
  m.def("h_of_g", &hg::h_of_g, py::arg("g"), py::arg("dimension") = 2);
  m.def("invert_h", &hg::invert_h, py::arg("value"), py::arg("dimension") = 2);
  m.def("read_pgrid", &read_pgrid, py::arg("path"), "Returns (values, extent).");
  m.def("write_pgrid", &write_pgrid, py::arg("path"), py::arg("values"), py::arg("extent"));
  m.def("fnv1a", [](py::bytes b) { return io::fnv1a(std::string(b)); }, py::arg("data"));
  m.def("forward_constant", &forward_constant, py::arg("sigma_a"), py::arg("sigma_s") = 0.0, py::arg("g") = 0.0,
        py::arg("cells") = 32, py::arg("angles") = 32, py::arg("tol") = 1e-8);
  m.def("sigma_a_scattering_free", &sigma_a_scattering_free, py::arg("ts"), py::arg("eta"), py::arg("chord"));
  m.def("check_config", [](const std::string& text) { io::parse_config(text, "."); }, py::arg("text"),
        "Raises ConfigError with line-numbered diagnostics.");
  m.def("run_experiment", &run, py::arg("config"), py::arg("out") = "", py::arg("seed") = py::none(),
        py::arg("threads") = 1, py::arg("quiet") = true, "Runs a JSON experiment; returns the exit code.");
}
