#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mapod/data.hpp"
#include "mapod/pod.hpp"
#include "mapod/synthetic.hpp"
#include "mapod/transform.hpp"

namespace mapod {

inline constexpr const char* kVersion = "0.1.0";

enum class TransformMode { Fit, Fixed, None };

struct SensitivitySettings {
  bool enabled = false;
  std::string metamodel = "chaos";  // chaos | kriging
  std::size_t n_base = 4096;
  std::size_t grid_points = 51;
  std::size_t n_bootstrap = 200;
  std::vector<double> levels{0.9};  // inverse-POD probabilities
  std::vector<double> sizes;        // fixed-size POD indices
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
};

struct RunConfig {
  std::optional<std::filesystem::path> dataset;
  std::optional<SyntheticModelSpec> synthetic;
  std::size_t synthetic_n = 100;
  // Noise seed of the synthetic model; derived from `seed` when unset.
  std::optional<std::uint64_t> synthetic_seed;
  std::string response = "ProjY";
  std::string flaw_count = "i_P2";
  InputSet inputs = demo_inputs();

  std::optional<double> threshold;  // raw units
  std::vector<std::string> methods{"berens", "binomial", "chaos", "kriging"};

  TransformMode transform = TransformMode::Fit;
  double lambda = 1.0;  // used by TransformMode::Fixed
  LambdaRange lambda_range;

  std::optional<double> grid_lo;
  std::optional<double> grid_hi;
  std::size_t grid_points = 201;
  double level = 0.95;
  double pod_level = 0.9;

  std::size_t berens_draws = 10000;
  std::vector<unsigned> chaos_degrees{1, 2, 3};
  std::size_t chaos_n_mc = 10000;
  std::size_t chaos_n_sets = 150;
  std::size_t kriging_n_mc = 10000;
  std::size_t kriging_n_paths = 200;
  std::size_t kriging_band_points = 200;
  std::size_t kriging_starts = 10;
  bool kriging_nugget = false;

  std::size_t doe_n = 100;

  SensitivitySettings sensitivity;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "mapod_out";

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// JSON configuration. Relative dataset paths resolve against base_dir.
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

// Seed of one named random stream, derived from the master seed.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream);

struct RunOutcome {
  int exit_code = 0;
  std::vector<DetectabilitySummary> summaries;
  std::map<std::string, std::string> failures;
  double lambda = 1.0;
  double transformed_threshold = 0.0;
};

// Full progressive run: transform, fits, POD curves and bands, summaries,
// report, manifest, and sensitivity outputs when enabled.
RunOutcome execute(const RunConfig& config, std::ostream& log);
// Sensitivity outputs only.
RunOutcome execute_sensitivity(const RunConfig& config, std::ostream& log);
// Writes design.csv (inputs only).
void write_design(const RunConfig& config);
// Writes dataset.csv for the synthetic model in the config.
void write_synthetic(const RunConfig& config);

}  // namespace mapod
