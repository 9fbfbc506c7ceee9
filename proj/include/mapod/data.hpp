#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mapod {

struct Gaussian {
  double mean = 0.0;
  double sd = 1.0;
};

struct Uniform {
  double lo = 0.0;
  double hi = 1.0;
};

// Uniform on [-x_source + lo_offset, hi], where x_source is the realized
// value of another input in the same row.
struct ConditionalUniform {
  std::string source;
  double lo_offset = 0.0;
  double hi = 1.0;
};

using Family = std::variant<Gaussian, Uniform, ConditionalUniform>;

enum class InputRole { DefectSize, Nuisance };

struct InputSpec {
  std::string name;
  Family family;
  InputRole role = InputRole::Nuisance;
  // 2 marks inputs belonging to the second flaw; they are absent on
  // one-flaw rows. 0 means always present.
  int flaw = 0;
};

// Validated, ordered collection of input laws.
class InputSet {
 public:
  InputSet() = default;
  explicit InputSet(std::vector<InputSpec> specs);

  const std::vector<InputSpec>& specs() const noexcept { return specs_; }
  std::size_t size() const noexcept { return specs_.size(); }
  const InputSpec& operator[](std::size_t i) const { return specs_.at(i); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::vector<std::string> names() const;
  bool has_second_flaw() const;
  // Names of inputs with role DefectSize, in order.
  std::vector<std::string> defect_size_inputs() const;

 private:
  std::vector<InputSpec> specs_;
};

// Inverse CDF of an unconditional family. ConditionalUniform needs the
// realized source value.
double inverse_cdf(const Family& family, double u, double source_value = 0.0);

// Realized [lo, hi] of a ConditionalUniform for a given source value.
Uniform realized_interval(const ConditionalUniform& family, double source_value);

inline constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();
inline bool is_absent(double v) noexcept { return v != v; }

// N rows of input values plus an optional response. Absent cells (the
// second flaw of one-flaw rows) are stored as NaN and exposed as nullopt.
class SimulationDataset {
 public:
  SimulationDataset(std::vector<std::string> input_names, std::vector<double> values,
                    std::vector<double> response = {}, std::vector<int> flaw_count = {});

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return names_.size(); }
  const std::vector<std::string>& input_names() const noexcept { return names_; }
  std::optional<std::size_t> column_index(std::string_view name) const;

  std::optional<double> value(std::size_t row, std::size_t col) const;
  // NaN when absent.
  double raw(std::size_t row, std::size_t col) const { return values_[row * cols() + col]; }
  std::vector<double> column(std::string_view name) const;

  bool has_response() const noexcept { return !response_.empty(); }
  std::span<const double> response() const noexcept { return response_; }
  bool has_flaw_count() const noexcept { return !flaw_count_.empty(); }
  std::optional<int> flaw_count(std::size_t row) const;
  std::span<const int> flaw_counts() const noexcept { return flaw_count_; }

  SimulationDataset with_response(std::vector<double> response) const;

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
  std::vector<double> response_;
  std::vector<int> flaw_count_;
  std::size_t rows_ = 0;
};

struct DatasetSchema {
  std::vector<std::string> inputs{"E", "h1", "h2", "P1", "P2", "ebav1", "ebav2"};
  std::string response = "ProjY";
  bool require_response = true;
  // Optional column; used when present in the file.
  std::string flaw_count = "i_P2";
};

SimulationDataset load_dataset(const std::filesystem::path& path,
                               const DatasetSchema& schema = {});
SimulationDataset parse_dataset(std::string_view text, const DatasetSchema& schema = {});
void write_dataset(const std::filesystem::path& path, const SimulationDataset& ds,
                   std::string_view response_name = "ProjY",
                   std::string_view flaw_count_name = "i_P2");
std::string format_dataset(const SimulationDataset& ds, std::string_view response_name = "ProjY",
                           std::string_view flaw_count_name = "i_P2");

struct DefectSizeColumn {
  std::vector<double> a;
};

// a_i = max(P1_i, P2_i) on two-flaw rows, P1_i on one-flaw rows. Without a
// flaw-count column, rows use every present contributor.
DefectSizeColumn derive_defect_size(const SimulationDataset& ds,
                                    std::span<const std::string> contributors);
DefectSizeColumn derive_defect_size(const SimulationDataset& ds);

}  // namespace mapod
