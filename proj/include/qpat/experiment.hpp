#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpat/medium.hpp"

namespace qpat::io {

inline constexpr const char* kVersion = "0.1.0";
inline const std::vector<std::string> kTasks = {"forward",     "kernel",    "asymfit",   "recon-sigma",
                                                "recon-g",     "diffusion", "stability", "selftest"};

/// Validated experiment description.
struct ExperimentConfig {
  std::string task;
  std::uint64_t seed = 1;
  std::string output = "out";
  nlohmann::json params;
  std::optional<DomainGeometry> geometry;
  std::optional<OpticalMedium> medium;
  std::vector<std::string> inputs;  ///< referenced data files
  std::string base_dir;             ///< directory of the config file
  std::string text;                 ///< raw config bytes
};

/// Parses and validates; throws ConfigError with line-prefixed diagnostics.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// Field description: a number, or an object with "type" among constant,
/// radial, gaussian, linear, cosh, pgrid.
CoefficientField parse_field(const nlohmann::json& spec, const std::string& base_dir);

struct RunOptions {
  std::string config_path;
  std::string out_dir;                ///< overrides the config's "output"
  std::optional<std::uint64_t> seed;  ///< overrides the config's "seed"
  int threads = 1;
  bool quiet = false;
};

/// Exit codes: 0 success, 2 configuration or input-file problem, 3 numeric
/// failure. Writes outputs, result.json and manifest.json into the output dir.
int run_experiment(const RunOptions& options);

}  // namespace qpat::io
