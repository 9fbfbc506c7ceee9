#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mapod/error.hpp"
#include "mapod/pipeline.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> methods;
};

void add_common(CLI::App* cmd, Common& c, bool with_methods) {
  cmd->add_option("--config", c.config, "JSON configuration file")->required();
  cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  if (with_methods) {
    cmd->add_option("--methods", c.methods, "methods to run: berens,binomial,chaos,kriging")->delimiter(',');
  }
}

mapod::RunConfig load(const Common& c) {
  auto cfg = mapod::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out_dir = *c.out;
  if (!c.methods.empty()) cfg.methods = c.methods;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-assisted probability of detection"};
  app.set_version_flag("--version", std::string(mapod::kVersion));
  app.require_subcommand(1);

  Common doe, synth, run, sens;
  auto* doe_cmd = app.add_subcommand("doe", "write a Sobol' design of the configured inputs");
  add_common(doe_cmd, doe, false);
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
  add_common(synth_cmd, synth, false);
  auto* run_cmd = app.add_subcommand("run", "run the full POD pipeline");
  add_common(run_cmd, run, true);
  auto* sens_cmd = app.add_subcommand("sensitivity", "compute POD Sobol' indices only");
  add_common(sens_cmd, sens, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*doe_cmd) {
      const auto cfg = load(doe);
      mapod::write_design(cfg);
      std::cout << "wrote " << (cfg.out_dir / "design.csv").string() << "\n";
      return 0;
    }
    if (*synth_cmd) {
      const auto cfg = load(synth);
      mapod::write_synthetic(cfg);
      std::cout << "wrote " << (cfg.out_dir / "dataset.csv").string() << "\n";
      return 0;
    }
    if (*run_cmd) {
      const auto outcome = mapod::execute(load(run), std::cerr);
      for (const auto& s : outcome.summaries) {
        std::cout << s.method << ": a90 = " << s.a90 << ", a90/95 = " << s.a90_95 << "\n";
      }
      for (const auto& [m, e] : outcome.failures) std::cerr << "failed: " << m << ": " << e << "\n";
      return outcome.exit_code;
    }
    const auto outcome = mapod::execute_sensitivity(load(sens), std::cerr);
    for (const auto& [m, e] : outcome.failures) std::cerr << "failed: " << e << "\n";
    return outcome.exit_code;
  } catch (const mapod::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
