#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "mapod/data.hpp"
#include "mapod/error.hpp"

using namespace mapod;

namespace {
DatasetSchema small_schema() {
  DatasetSchema s;
  s.inputs = {"E", "P1"};
  return s;
}
}  // namespace

TEST_CASE("minimal CSV parses") {
  const auto ds = parse_dataset("E,P1,ProjY\n1.2,0.3,10\n1.3,0.2,11\n1.25,0.4,12\n", small_schema());
  CHECK(ds.rows() == 3);
  CHECK(ds.cols() == 2);
  CHECK(ds.response()[2] == 12.0);
  CHECK(ds.value(1, 1).value() == 0.2);
}

TEST_CASE("missing column names the column") {
  try {
    parse_dataset("E,P1\n1,0.3\n1,0.2\n1,0.1\n", small_schema());
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("ProjY") != std::string::npos);
  }
}

TEST_CASE("non-numeric cell reports its location") {
  try {
    parse_dataset("E,P1,ProjY\n1,0.3,1\n1,abc,2\n1,0.1,3\n", small_schema());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 2);
    CHECK(e.column() == 1);
  }
}

TEST_CASE("fewer than three rows is rejected") {
  CHECK_THROWS_AS(parse_dataset("E,P1,ProjY\n1,0.3,1\n1,0.2,2\n", small_schema()), InsufficientDataError);
}

TEST_CASE("write then load round-trips values and absent cells") {
  const std::vector<std::string> names{"E", "h1", "h2", "P1", "P2", "ebav1", "ebav2"};
  std::vector<double> values;
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 7; ++c) values.push_back(std::sqrt(2.0) * (r + 1) / (c + 3.0) + 1e-13 * r);
  }
  values[1 * 7 + 2] = kAbsent;
  values[1 * 7 + 4] = kAbsent;
  values[1 * 7 + 6] = kAbsent;
  SimulationDataset ds(names, values, {1.5, 2.5, 3.25, 1e-7, 12345.678}, {2, 1, 2, 2, 2});
  const auto path = std::filesystem::temp_directory_path() / "mapod_roundtrip.csv";
  write_dataset(path, ds);
  const auto back = load_dataset(path);
  std::filesystem::remove(path);
  REQUIRE(back.rows() == 5);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(back.response()[r] == ds.response()[r]);
    CHECK(back.flaw_count(r) == ds.flaw_count(r));
    for (std::size_t c = 0; c < 7; ++c) {
      const auto a = ds.value(r, c), b = back.value(r, c);
      CHECK(a.has_value() == b.has_value());
      if (a && b) CHECK(std::abs(*a - *b) <= 1e-12 * std::abs(*a));
    }
  }
}

TEST_CASE("defect size from one or two flaws") {
  DatasetSchema s;
  s.inputs = {"P1", "P2"};
  const auto ds = parse_dataset("P1,P2,ProjY,i_P2\n0.2,0.4,1,2\n0.3,,1,1\n0.25,0.25,1,2\n", s);
  const auto a = derive_defect_size(ds).a;
  CHECK(a[0] == 0.4);
  CHECK(a[1] == 0.3);
  CHECK(a[2] == 0.25);
}

TEST_CASE("two-flaw row without P2 is a data error") {
  DatasetSchema s;
  s.inputs = {"P1", "P2"};
  const auto ds = parse_dataset("P1,P2,ProjY,i_P2\n0.2,0.4,1,2\n0.3,,1,2\n0.25,0.25,1,2\n", s);
  CHECK_THROWS_AS(derive_defect_size(ds), DataError);
}

TEST_CASE("defect size is permutation-equivariant") {
  DatasetSchema s;
  s.inputs = {"P1", "P2"};
  const auto ds = parse_dataset("P1,P2,ProjY,i_P2\n0.2,0.4,1,2\n0.3,,2,1\n0.25,0.1,3,2\n0.45,0.2,4,2\n", s);
  const auto rev = parse_dataset("P1,P2,ProjY,i_P2\n0.45,0.2,4,2\n0.25,0.1,3,2\n0.3,,2,1\n0.2,0.4,1,2\n", s);
  auto a = derive_defect_size(ds).a;
  auto b = derive_defect_size(rev).a;
  std::reverse(b.begin(), b.end());
  CHECK(a == b);
}

TEST_CASE("input set validation") {
  CHECK_THROWS_AS(InputSet({{"E", Gaussian{1.0, 0.0}}}), SpecError);
  CHECK_THROWS_AS(InputSet({{"h", Uniform{2.0, 2.0}}}), SpecError);
  // Source must be declared first.
  CHECK_THROWS_AS(InputSet({{"e", ConditionalUniform{"P", 0.0, 0.3}}, {"P", Uniform{0.1, 0.5}}}), SpecError);
  // [-0.5, 0.3] would be fine, but a source value 0.1 with hi = -0.2 is empty.
  CHECK_THROWS_AS(InputSet({{"P", Uniform{0.1, 0.5}}, {"e", ConditionalUniform{"P", 0.0, -0.2}}}), SpecError);
  const InputSet ok({{"P", Uniform{0.1, 0.5}, InputRole::DefectSize}, {"e", ConditionalUniform{"P", 0.0, 0.3}}});
  CHECK(ok.defect_size_inputs() == std::vector<std::string>{"P"});
  CHECK(ok.index_of("e").value() == 1);
}

TEST_CASE("inverse CDF of each family at the median") {
  CHECK(inverse_cdf(Gaussian{0.0, 1.0}, 0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(inverse_cdf(Uniform{2.0, 4.0}, 0.5) == 3.0);
  CHECK(inverse_cdf(ConditionalUniform{"P1", 0.0, 1.0}, 0.5, 0.5) == doctest::Approx(0.25));
}
