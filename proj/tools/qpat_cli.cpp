#include <CLI11.hpp>
#include <iostream>

#include "qpat/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Quantitative photoacoustic transport experiments"};
  app.set_version_flag("--version", std::string(qpat::io::kVersion));
  qpat::io::RunOptions opt;
  std::uint64_t seed = 0;
  app.add_option("-c,--config", opt.config_path, "JSON experiment file")->required();
  app.add_option("-o,--out", opt.out_dir, "Output directory (default: the config's 'output' next to it)");
  auto* seed_opt = app.add_option("-s,--seed", seed, "Override the config seed");
  app.add_option("-j,--threads", opt.threads, "Worker threads (results do not depend on it)")->check(CLI::Range(0, 1024));
  app.add_flag("-q,--quiet", opt.quiet, "Do not print the result summary");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*seed_opt) opt.seed = seed;
  return qpat::io::run_experiment(opt);
}
