#include "mapod/doe.hpp"

#include <array>
#include <bit>
#include <cstdint>

#include "mapod/error.hpp"

namespace mapod {

namespace {

struct DirectionEntry {
  unsigned degree;
  unsigned coefficients;
  std::array<std::uint32_t, 8> m;
};

// new-joe-kuo-6.21201, dimensions 2..21.
constexpr std::array<DirectionEntry, kMaxSobolDimension - 1> kDirections{{
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
}};

constexpr unsigned kBits = 32;

std::array<std::uint32_t, kBits> direction_numbers(std::size_t dimension) {
  std::array<std::uint32_t, kBits> v{};
  if (dimension == 0) {
    for (unsigned i = 0; i < kBits; ++i) v[i] = 1u << (kBits - 1 - i);
    return v;
  }
  const auto& e = kDirections[dimension - 1];
  const unsigned s = e.degree;
  for (unsigned i = 0; i < s; ++i) v[i] = e.m[i] << (kBits - 1 - i);
  for (unsigned i = s; i < kBits; ++i) {
    v[i] = v[i - s] ^ (v[i - s] >> s);
    for (unsigned k = 1; k < s; ++k) {
      if ((e.coefficients >> (s - 1 - k)) & 1u) v[i] ^= v[i - k];
    }
  }
  return v;
}

}  // namespace

UnitHypercubeDesign sobol_sequence(std::size_t dim, std::size_t n, std::size_t start) {
  if (dim == 0) throw ArgumentError("sobol_sequence: dimension must be positive");
  if (dim > kMaxSobolDimension) {
    throw UnsupportedDimensionError("sobol_sequence: dimension " + std::to_string(dim) +
                                    " exceeds the direction-number table (" +
                                    std::to_string(kMaxSobolDimension) + ")");
  }
  if (start == 0) throw ArgumentError("sobol_sequence: start index must be >= 1");
  if (n > 0 && start + n - 1 >= (std::size_t{1} << kBits)) {
    throw ArgumentError("sobol_sequence: index range exceeds 2^32");
  }

  std::vector<std::array<std::uint32_t, kBits>> v(dim);
  for (std::size_t j = 0; j < dim; ++j) v[j] = direction_numbers(j);

  UnitHypercubeDesign design{dim, n, std::vector<double>(n * dim)};
  if (n == 0) return design;

  // State for index `start` from its Gray code, then Antonov-Saleev updates.
  std::vector<std::uint32_t> x(dim, 0);
  const auto gray = static_cast<std::uint32_t>(start ^ (start >> 1));
  for (unsigned b = 0; b < kBits; ++b) {
    if ((gray >> b) & 1u) {
      for (std::size_t j = 0; j < dim; ++j) x[j] ^= v[j][b];
    }
  }
  constexpr double scale = 0x1.0p-32;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) design.points[i * dim + j] = x[j] * scale;
    const auto index = static_cast<std::uint32_t>(start + i);
    const unsigned c = static_cast<unsigned>(std::countr_one(index));
    for (std::size_t j = 0; j < dim; ++j) x[j] ^= v[j][c];
  }
  return design;
}

SimulationDataset sample_inputs(const InputSet& inputs, std::size_t n) {
  const std::size_t d = inputs.size();
  if (d == 0) throw SpecError("sample_inputs: no inputs declared");
  const auto design = sobol_sequence(d, n);
  const bool split = inputs.has_second_flaw();

  std::vector<std::optional<std::size_t>> source(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (const auto* c = std::get_if<ConditionalUniform>(&inputs[j].family)) {
      source[j] = inputs.index_of(c->source);
      if (!source[j] || *source[j] >= j) {
        throw SpecError("input '" + inputs[j].name + "': conditional source must precede it");
      }
    }
  }

  std::vector<double> values(n * d);
  std::vector<int> flaws;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double u = design.at(i, j);
      double x;
      if (const auto* c = std::get_if<ConditionalUniform>(&inputs[j].family)) {
        const double src = values[i * d + *source[j]];
        const Uniform iv = realized_interval(*c, src);
        if (!(iv.lo < iv.hi)) {
          throw SpecError("input '" + inputs[j].name + "': empty conditional interval at row " +
                          std::to_string(i + 1));
        }
        x = inverse_cdf(inputs[j].family, u, src);
      } else {
        x = inverse_cdf(inputs[j].family, u);
      }
      values[i * d + j] = x;
    }
    if (split) {
      const int count = (i % 2 == 0) ? 1 : 2;
      flaws.push_back(count);
      if (count == 1) {
        for (std::size_t j = 0; j < d; ++j) {
          if (inputs[j].flaw == 2) values[i * d + j] = kAbsent;
        }
      }
    }
  }
  return SimulationDataset(inputs.names(), std::move(values), {}, std::move(flaws));
}

}  // namespace mapod
