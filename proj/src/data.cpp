#include "mapod/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mapod/error.hpp"
#include "mapod/stats.hpp"

namespace mapod {

namespace {

void validate_spec(const InputSpec& spec, const std::vector<InputSpec>& earlier) {
  if (spec.name.empty()) throw SpecError("input with empty name");
  for (const auto& e : earlier) {
    if (e.name == spec.name) throw SpecError("duplicate input name '" + spec.name + "'");
  }
  if (spec.flaw != 0 && spec.flaw != 1 && spec.flaw != 2) {
    throw SpecError("input '" + spec.name + "': flaw must be 0, 1 or 2");
  }
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Gaussian>) {
          if (!(f.sd > 0.0) || !std::isfinite(f.mean) || !std::isfinite(f.sd)) {
            throw SpecError("input '" + spec.name + "': Gaussian sd must be positive");
          }
        } else if constexpr (std::is_same_v<F, Uniform>) {
          if (!(f.lo < f.hi) || !std::isfinite(f.lo) || !std::isfinite(f.hi)) {
            throw SpecError("input '" + spec.name + "': Uniform needs lo < hi");
          }
        } else {
          auto src = std::find_if(earlier.begin(), earlier.end(),
                                  [&](const InputSpec& e) { return e.name == f.source; });
          if (src == earlier.end()) {
            throw SpecError("input '" + spec.name + "': conditional source '" + f.source +
                            "' must be declared before it");
          }
          const auto* su = std::get_if<Uniform>(&src->family);
          if (su == nullptr) {
            throw SpecError("input '" + spec.name +
                            "': conditional source must be Uniform so every realized "
                            "interval is bounded");
          }
          // Widest lower bound occurs at the smallest source value.
          if (!(-su->lo + f.lo_offset < f.hi)) {
            throw SpecError("input '" + spec.name +
                            "': realized conditional interval is empty for some source values");
          }
        }
      },
      spec.family);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::optional<double> parse_cell(std::string_view cell, std::size_t row, std::size_t col,
                                 std::string_view column_name) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = cell.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << "non-numeric cell '" << cell << "' at row " << row << ", column " << col << " ("
        << column_name << ")";
    throw ParseError(msg.str(), row, col);
  }
  return v;
}

void append_number(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

InputSet::InputSet(std::vector<InputSpec> specs) {
  for (const auto& s : specs) validate_spec(s, specs_), specs_.push_back(s);
}

std::optional<std::size_t> InputSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> InputSet::names() const {
  std::vector<std::string> out;
  for (const auto& s : specs_) out.push_back(s.name);
  return out;
}

bool InputSet::has_second_flaw() const {
  return std::any_of(specs_.begin(), specs_.end(), [](const auto& s) { return s.flaw == 2; });
}

std::vector<std::string> InputSet::defect_size_inputs() const {
  std::vector<std::string> out;
  for (const auto& s : specs_) {
    if (s.role == InputRole::DefectSize) out.push_back(s.name);
  }
  return out;
}

Uniform realized_interval(const ConditionalUniform& family, double source_value) {
  return Uniform{-source_value + family.lo_offset, family.hi};
}

double inverse_cdf(const Family& family, double u, double source_value) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("inverse_cdf: u outside [0,1]");
  return std::visit(
      [&](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Gaussian>) {
          return f.mean + f.sd * normal_quantile(u);
        } else if constexpr (std::is_same_v<F, Uniform>) {
          return f.lo + u * (f.hi - f.lo);
        } else {
          const Uniform r = realized_interval(f, source_value);
          return r.lo + u * (r.hi - r.lo);
        }
      },
      family);
}

SimulationDataset::SimulationDataset(std::vector<std::string> input_names,
                                     std::vector<double> values, std::vector<double> response,
                                     std::vector<int> flaw_count)
    : names_(std::move(input_names)),
      values_(std::move(values)),
      response_(std::move(response)),
      flaw_count_(std::move(flaw_count)) {
  if (names_.empty()) {
    rows_ = response_.size();
    if (!values_.empty()) throw DataError("values given without input columns");
  } else {
    if (values_.size() % names_.size() != 0) {
      throw DataError("value count is not a multiple of the column count");
    }
    rows_ = values_.size() / names_.size();
  }
  if (!response_.empty() && response_.size() != rows_) {
    throw DataError("response length differs from row count");
  }
  if (!flaw_count_.empty() && flaw_count_.size() != rows_) {
    throw DataError("flaw-count length differs from row count");
  }
  for (double v : values_) {
    if (!is_absent(v) && !std::isfinite(v)) throw DataError("non-finite input value");
  }
  for (double v : response_) {
    if (!std::isfinite(v)) throw DataError("non-finite response value");
  }
  for (int f : flaw_count_) {
    if (f != 1 && f != 2) throw DataError("flaw count must be 1 or 2");
  }
}

std::optional<std::size_t> SimulationDataset::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<double> SimulationDataset::value(std::size_t row, std::size_t col) const {
  if (row >= rows_ || col >= cols()) throw ArgumentError("dataset index out of range");
  const double v = raw(row, col);
  if (is_absent(v)) return std::nullopt;
  return v;
}

std::vector<double> SimulationDataset::column(std::string_view name) const {
  const auto c = column_index(name);
  if (!c) throw SchemaError("missing column '" + std::string(name) + "'");
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = raw(r, *c);
  return out;
}

std::optional<int> SimulationDataset::flaw_count(std::size_t row) const {
  if (flaw_count_.empty()) return std::nullopt;
  return flaw_count_.at(row);
}

SimulationDataset SimulationDataset::with_response(std::vector<double> response) const {
  return SimulationDataset(names_, values_, std::move(response), flaw_count_);
}

SimulationDataset parse_dataset(std::string_view text, const DatasetSchema& schema) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    auto line = trim(text.substr(start, pos - start));
    if (!line.empty()) lines.push_back(line);
    start = pos + 1;
  }
  if (lines.empty()) throw SchemaError("dataset has no header row");

  const auto header = split_csv_line(lines.front());
  auto find_col = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };

  std::vector<std::size_t> input_cols;
  for (const auto& name : schema.inputs) {
    const auto c = find_col(name);
    if (!c) throw SchemaError("missing column '" + name + "'");
    input_cols.push_back(*c);
  }
  std::optional<std::size_t> response_col = find_col(schema.response);
  if (schema.require_response && !response_col) {
    throw SchemaError("missing column '" + schema.response + "'");
  }
  std::optional<std::size_t> flaw_col;
  if (!schema.flaw_count.empty()) flaw_col = find_col(schema.flaw_count);

  std::vector<double> values;
  std::vector<double> response;
  std::vector<int> flaws;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row = li;  // 1-based data row number (header is row 0)
    const auto cells = split_csv_line(lines[li]);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                           " cells, header has " + std::to_string(header.size()),
                       row, cells.size());
    }
    for (std::size_t k = 0; k < input_cols.size(); ++k) {
      const auto c = input_cols[k];
      const auto v = parse_cell(cells[c], row, c, header[c]);
      values.push_back(v ? *v : kAbsent);
    }
    if (response_col) {
      const auto v = parse_cell(cells[*response_col], row, *response_col, header[*response_col]);
      if (!v) {
        throw ParseError("empty response at row " + std::to_string(row), row, *response_col);
      }
      response.push_back(*v);
    }
    if (flaw_col) {
      const auto v = parse_cell(cells[*flaw_col], row, *flaw_col, header[*flaw_col]);
      if (!v || (*v != 1.0 && *v != 2.0)) {
        throw ParseError("flaw count must be 1 or 2 at row " + std::to_string(row), row,
                         *flaw_col);
      }
      flaws.push_back(static_cast<int>(*v));
    }
  }
  if ((schema.inputs.empty() ? response.size() : values.size() / schema.inputs.size()) < 3) throw InsufficientDataError("a dataset needs at least 3 rows");
  return SimulationDataset(schema.inputs, std::move(values), std::move(response),
                           std::move(flaws));
}

SimulationDataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open dataset '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), schema);
}

std::string format_dataset(const SimulationDataset& ds, std::string_view response_name,
                           std::string_view flaw_count_name) {
  std::string out;
  bool first = true;
  auto sep = [&] {
    if (!first) out += ',';
    first = false;
  };
  for (const auto& n : ds.input_names()) sep(), out += n;
  if (ds.has_response()) sep(), out += response_name;
  if (ds.has_flaw_count()) sep(), out += flaw_count_name;
  out += '\n';
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    first = true;
    for (std::size_t c = 0; c < ds.cols(); ++c) {
      sep();
      const double v = ds.raw(r, c);
      if (!is_absent(v)) append_number(out, v);
    }
    if (ds.has_response()) sep(), append_number(out, ds.response()[r]);
    if (ds.has_flaw_count()) sep(), out += std::to_string(ds.flaw_counts()[r]);
    out += '\n';
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const SimulationDataset& ds,
                   std::string_view response_name, std::string_view flaw_count_name) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  out << format_dataset(ds, response_name, flaw_count_name);
}

DefectSizeColumn derive_defect_size(const SimulationDataset& ds,
                                    std::span<const std::string> contributors) {
  if (contributors.empty()) throw ArgumentError("no defect-size contributors given");
  std::vector<std::size_t> cols;
  std::vector<std::string> present;
  for (const auto& name : contributors) {
    const auto c = ds.column_index(name);
    if (!c) {
      if (cols.empty()) throw SchemaError("missing column '" + name + "'");
      // Later contributors may be entirely absent from single-flaw files.
      continue;
    }
    cols.push_back(*c);
    present.push_back(name);
  }
  DefectSizeColumn out;
  out.a.resize(ds.rows());
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    const auto first = ds.value(r, cols.front());
    if (!first) {
      throw DataError("missing " + contributors.front() + " at row " + std::to_string(r + 1));
    }
    double a = *first;
    const auto flaws = ds.flaw_count(r);
    if (!flaws || *flaws == 2) {
      const std::size_t expected = flaws ? 2 : cols.size();
      if (flaws && cols.size() < 2) {
        throw DataError("two-flaw row " + std::to_string(r + 1) + " lacks " +
                        (contributors.size() > 1 ? contributors[1] : std::string("a second contributor")));
      }
      for (std::size_t k = 1; k < std::min(expected, cols.size()); ++k) {
        const auto v = ds.value(r, cols[k]);
        if (!v) {
          if (flaws) {
            throw DataError("two-flaw row " + std::to_string(r + 1) + " lacks " + present[k]);
          }
          continue;
        }
        a = std::max(a, *v);
      }
    }
    if (!(a > 0.0)) throw DataError("defect size must be positive at row " + std::to_string(r + 1));
    out.a[r] = a;
  }
  return out;
}

DefectSizeColumn derive_defect_size(const SimulationDataset& ds) {
  const std::vector<std::string> contributors{"P1", "P2"};
  return derive_defect_size(ds, contributors);
}

}  // namespace mapod
