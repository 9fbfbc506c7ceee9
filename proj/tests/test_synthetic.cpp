#include "doctest.h"

#include <cmath>
#include <vector>

#include "mapod/doe.hpp"
#include "mapod/error.hpp"
#include "mapod/sensitivity.hpp"
#include "mapod/synthetic.hpp"
#include "mapod/transform.hpp"

using namespace mapod;

namespace {

std::vector<double> resp(const SimulationDataset& ds) { return {ds.response().begin(), ds.response().end()}; }

InputSet two_inputs() {
  return InputSet({{"E", Gaussian{1.27, 0.02}},
                   {"h1", Uniform{2.0, 20.0}},
                   {"P1", Uniform{0.1, 0.5}, InputRole::DefectSize}});
}

std::vector<double> defect(const SimulationDataset& ds) { return ds.column("P1"); }

}  // namespace

TEST_CASE("kind names round-trip") {
  for (auto k : {SyntheticKind::LinearGaussian, SyntheticKind::PowerLaw, SyntheticKind::NonlinearInteraction})
    CHECK(parse_synthetic_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_synthetic_kind("cubic"), SpecError);
}

TEST_CASE("noise-free linear response") {
  SyntheticModelSpec spec;
  spec.sigma = 0.0;
  const auto in = two_inputs();
  const auto ds = synthesize(spec, in, 16);
  const auto a = defect(ds);
  for (std::size_t i = 0; i < ds.rows(); ++i) CHECK(ds.response()[i] == doctest::Approx(2.5 + 43.5 * a[i]));
  CHECK(2.5 + 43.5 * 0.3 == doctest::Approx(15.55));
  const auto one = sample_inputs(in, 3);
  CHECK(evaluate(spec, in, one, std::vector<double>{0.3, 0.3, 0.3})[0] == doctest::Approx(15.55).epsilon(1e-14));
}

TEST_CASE("power-law response linearizes under the true Box-Cox") {
  SyntheticModelSpec lin, pow;
  pow.kind = SyntheticKind::PowerLaw;
  pow.lambda = 0.3;
  const auto in = two_inputs();
  const auto ds = sample_inputs(in, 64);
  const auto a = defect(ds);
  const auto eta = evaluate(lin, in, ds, a);
  const auto y = evaluate(pow, in, ds, a);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(apply_boxcox(y[i], 0.3) == doctest::Approx(eta[i]).epsilon(1e-12));
  pow.lambda = 0.0;
  const auto ye = evaluate(pow, in, ds, a);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::log(ye[i]) == doctest::Approx(eta[i]).epsilon(1e-12));
  pow.lambda = 1.0;
  pow.beta0 = -40.0;
  CHECK_THROWS_AS(evaluate(pow, in, ds, a), SpecError);
}

TEST_CASE("ground truth a90 and threshold") {
  SyntheticModelSpec spec;
  const double s = threshold_for_a90(spec, 0.30);
  CHECK(s == doctest::Approx(2.5 + 43.5 * 0.3 - 1.2815515655446004 * 1.95).epsilon(1e-12));
  CHECK(s == doctest::Approx(13.051).epsilon(1e-4));
  CHECK(true_a90(spec, s) == doctest::Approx(0.30).epsilon(1e-12));
  CHECK(true_pod_at(spec, s, 0.30) == doctest::Approx(0.9).epsilon(1e-12));
  const auto c = true_pod(spec, s, make_grid(0.1, 0.5, 41));
  CHECK(a_at_level(c, 0.9) == doctest::Approx(0.30).epsilon(1e-3));
  SyntheticModelSpec pow = spec;
  pow.kind = SyntheticKind::PowerLaw;
  const double sp = threshold_for_a90(pow, 0.30);
  CHECK(true_pod_at(pow, sp, 0.30) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(apply_boxcox(sp, 0.3) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("seeded synthesis is reproducible") {
  SyntheticModelSpec spec;
  spec.seed = 42;
  const auto in = two_inputs();
  const auto a = synthesize(spec, in, 50), b = synthesize(spec, in, 50);
  CHECK(resp(a) == resp(b));
  spec.seed = 43;
  CHECK(resp(synthesize(spec, in, 50)) != resp(a));
  // Residuals around the true line look like N(0, sigma^2).
  const auto big = synthesize(spec, in, 4000);
  const auto p = defect(big);
  double m = 0, v = 0;
  for (std::size_t i = 0; i < big.rows(); ++i) {
    const double e = big.response()[i] - 2.5 - 43.5 * p[i];
    m += e / 4000;
    v += e * e / 4000;
  }
  CHECK(std::abs(m) < 4 * 1.95 / std::sqrt(4000.0));
  CHECK(std::sqrt(v - m * m) == doctest::Approx(1.95).epsilon(0.05));
}

TEST_CASE("interaction indices match sensitivity estimates") {
  SyntheticModelSpec spec;
  spec.kind = SyntheticKind::NonlinearInteraction;
  spec.c1 = 1.0;
  spec.c2 = 0.5;
  spec.c12 = 0.8;
  const auto ref = interaction_indices(spec);
  const double v = 1.0 + 0.25 + 0.64;
  CHECK(ref.s1 == doctest::Approx(1.0 / v));
  CHECK(ref.t2 == doctest::Approx((0.25 + 0.64) / v));
  const std::vector<FeatureLaw> laws{Gaussian{1.27, 0.02}, Uniform{2.0, 20.0}};
  SobolOptions o;
  o.n_base = 1 << 14;
  o.n_bootstrap = 50;
  const auto r = sobol_indices_scalar(
      [&](const Eigen::MatrixXd& x) {
        Eigen::VectorXd y(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
          const double z1 = feature_standard_score(laws[0], x(i, 0)), z2 = feature_standard_score(laws[1], x(i, 1));
          y(i) = spec.c1 * z1 + spec.c2 * z2 + spec.c12 * z1 * z2;
        }
        return y;
      },
      laws, {"E", "h1"}, o);
  CHECK(std::abs(r.at("E").first_order - ref.s1) < 0.02);
  CHECK(std::abs(r.at("h1").first_order - ref.s2) < 0.02);
  CHECK(std::abs(r.at("E").total - ref.t1) < 0.02);
  CHECK(std::abs(r.at("h1").total - ref.t2) < 0.02);
  SyntheticModelSpec flat = spec;
  flat.c1 = flat.c2 = flat.c12 = 0.0;
  CHECK_THROWS_AS(interaction_indices(flat), DegenerateVarianceError);
}

TEST_CASE("demo inputs") {
  const auto in = demo_inputs();
  CHECK(in.size() == 7);
  const auto ds = sample_inputs(in, 10);
  CHECK(ds.rows() == 10);
}
