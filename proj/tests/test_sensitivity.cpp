#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "mapod/error.hpp"
#include "mapod/sensitivity.hpp"

using namespace mapod;

namespace {

constexpr double kPi = std::numbers::pi;

SobolOptions opts(std::size_t n_base, std::uint64_t seed = 1) {
  SobolOptions o;
  o.n_base = n_base;
  o.seed = seed;
  o.n_bootstrap = 50;
  return o;
}

// POD_X(a) = Phi((a - m(x)) / sd); conditional curves in closed form.
class FormulaModel : public ConditionalPodModel {
 public:
  using Mean = std::function<double(const Eigen::RowVectorXd&)>;
  FormulaModel(std::vector<FeatureLaw> laws, Mean m, double sd) : laws_(std::move(laws)), m_(std::move(m)), sd_(sd) {
    for (std::size_t k = 0; k < laws_.size(); ++k) names_.push_back("x" + std::to_string(k + 1));
  }
  const std::vector<FeatureLaw>& nuisance_laws() const override { return laws_; }
  const std::vector<std::string>& nuisance_names() const override { return names_; }
  Eigen::MatrixXd pod_x(const Eigen::MatrixXd& x, std::span<const double> grid) const override {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(grid.size()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double m = m_(x.row(i));
      for (std::size_t j = 0; j < grid.size(); ++j)
        out(i, static_cast<Eigen::Index>(j)) = sd_ > 0 ? normal_cdf((grid[j] - m) / sd_) : (grid[j] > m ? 1.0 : 0.0);
    }
    return out;
  }

 private:
  std::vector<FeatureLaw> laws_;
  std::vector<std::string> names_;
  Mean m_;
  double sd_;
};

}  // namespace

TEST_CASE("curve weights") {
  const std::vector<double> g{0.0, 1.0, 2.0, 3.0};
  const auto t = curve_weights(g, CurveNorm::Trapezoid);
  CHECK(t[0] == doctest::Approx(1.0 / 6));
  CHECK(t[1] == doctest::Approx(2.0 / 6));
  const auto e = curve_weights(g, CurveNorm::Euclidean);
  for (double w : e) CHECK(w == doctest::Approx(0.25));
}

TEST_CASE("single active input") {
  const std::vector<FeatureLaw> laws{Uniform{0, 1}, Uniform{0, 1}, Gaussian{0, 1}};
  const auto r = sobol_indices_scalar([](const Eigen::MatrixXd& x) { return Eigen::VectorXd(x.col(0)); }, laws,
                                      {"x1", "x2", "x3"}, opts(1 << 14));
  CHECK(std::abs(r.at("x1").first_order - 1.0) < 0.05);
  CHECK(std::abs(r.at("x1").total - 1.0) < 0.05);
  for (const char* n : {"x2", "x3"}) {
    CHECK(std::abs(r.at(n).first_order) < 0.05);
    CHECK(std::abs(r.at(n).total) < 0.05);
  }
}

TEST_CASE("additive Gaussian model") {
  const std::vector<FeatureLaw> laws{Gaussian{0, 1}, Gaussian{0, 1}};
  const auto r = sobol_indices_scalar(
      [](const Eigen::MatrixXd& x) { return Eigen::VectorXd(x.col(0) + 2.0 * x.col(1)); }, laws, {"x1", "x2"},
      opts(1 << 14));
  CHECK(std::abs(r.at("x1").first_order - 0.2) < 0.02);
  CHECK(std::abs(r.at("x2").first_order - 0.8) < 0.02);
  double sum = 0, se2 = 0;
  for (const auto& i : r.indices) {
    CHECK(std::abs(i.total - i.first_order) <= 3 * std::hypot(i.first_order_stderr, i.total_stderr));
    CHECK(std::abs(i.total - i.first_order) < 0.02);
    sum += i.first_order;
    se2 += i.first_order_stderr * i.first_order_stderr;
  }
  CHECK(sum <= 1.0 + 3 * std::sqrt(se2));
}

TEST_CASE("Ishigami against its analytic decomposition") {
  const double a = 7.0, b = 0.1;
  const double v1 = 0.5 * std::pow(1 + b * std::pow(kPi, 4) / 5, 2);
  const double v2 = a * a / 8;
  const double v13 = b * b * std::pow(kPi, 8) * (1.0 / 18 - 1.0 / 50);
  const double v = v1 + v2 + v13;
  const std::vector<FeatureLaw> laws(3, Uniform{-kPi, kPi});
  const auto r = sobol_indices_scalar(
      [&](const Eigen::MatrixXd& x) {
        Eigen::VectorXd y(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i)
          y(i) = std::sin(x(i, 0)) + a * std::pow(std::sin(x(i, 1)), 2) + b * std::pow(x(i, 2), 4) * std::sin(x(i, 0));
        return y;
      },
      laws, {"x1", "x2", "x3"}, opts(1 << 14));
  CHECK(std::abs(r.at("x1").first_order - v1 / v) < 0.02);
  CHECK(std::abs(r.at("x2").first_order - v2 / v) < 0.02);
  CHECK(std::abs(r.at("x3").first_order) < 0.02);
  CHECK(std::abs(r.at("x3").total - v13 / v) < 0.02);
  CHECK(v1 / v == doctest::Approx(0.3139).epsilon(1e-3));
  CHECK(v2 / v == doctest::Approx(0.4424).epsilon(1e-3));
  CHECK(v13 / v == doctest::Approx(0.2437).epsilon(1e-3));
}

TEST_CASE("groups, determinism and argument checks") {
  const std::vector<FeatureLaw> laws(3, Gaussian{0, 1});
  auto f = [](const Eigen::MatrixXd& x) { return Eigen::VectorXd(x.rowwise().sum()); };
  auto o = opts(4096);
  o.groups = {{"x12", {0, 1}}, {"x3", {2}}};
  const auto r = sobol_indices_scalar(f, laws, {"x1", "x2", "x3"}, o);
  CHECK(std::abs(r.at("x12").first_order - 2.0 / 3) < 0.05);
  CHECK(std::abs(r.at("x3").total - 1.0 / 3) < 0.05);
  const auto again = sobol_indices_scalar(f, laws, {"x1", "x2", "x3"}, o);
  CHECK(again.at("x12").first_order == r.at("x12").first_order);
  CHECK(again.at("x12").first_order_stderr == r.at("x12").first_order_stderr);
  CHECK_THROWS_AS(sobol_indices_scalar(f, laws, {"x1", "x2", "x3"}, opts(255)), ArgumentError);
  CHECK_THROWS_AS(
      sobol_indices_scalar([](const Eigen::MatrixXd& x) { return Eigen::VectorXd::Constant(x.rows(), 3.0).eval(); },
                           laws, {"x1", "x2", "x3"}, opts(512)),
      DegenerateVarianceError);
}

TEST_CASE("POD curve indices: single active input and degenerate dispersion") {
  const std::vector<FeatureLaw> laws{Gaussian{0, 1}, Uniform{0, 1}};
  const FormulaModel one(laws, [](const Eigen::RowVectorXd& x) { return 0.5 + 0.1 * x(0); }, 0.05);
  const auto grid = make_grid(0.0, 1.0, 101);
  const auto r = pod_sobol_indices(one, grid, opts(4096));
  CHECK(std::abs(r.at("x1").first_order - 1.0) < 0.05);
  CHECK(std::abs(r.at("x1").total - 1.0) < 0.05);
  CHECK(std::abs(r.at("x2").first_order) < 0.05);
  CHECK(std::abs(r.at("x2").total) < 0.05);
  CHECK(r.variance > 0);
  const FormulaModel none(laws, [](const Eigen::RowVectorXd&) { return 0.5; }, 0.05);
  CHECK_THROWS_AS(pod_sobol_indices(none, grid, opts(512)), DegenerateDispersionError);
}

TEST_CASE("POD curve ranking matches brute-force integrated POD and is grid-stable") {
  const std::vector<FeatureLaw> laws{Gaussian{0, 1}, Gaussian{0, 1}};
  const FormulaModel add(laws, [](const Eigen::RowVectorXd& x) { return 0.5 + 0.04 * x(0) + 0.1 * x(1); }, 0.05);
  const auto grid = make_grid(0.0, 1.0, 101);
  const auto r = pod_sobol_indices(add, grid, opts(4096));
  const auto w = curve_weights(grid, CurveNorm::Trapezoid);
  const auto integ = sobol_indices_scalar(
      [&](const Eigen::MatrixXd& x) {
        const Eigen::MatrixXd c = add.pod_x(x, grid);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
        for (std::size_t j = 0; j < grid.size(); ++j) out += w[j] * c.col(static_cast<Eigen::Index>(j));
        return out;
      },
      laws, {"x1", "x2"}, opts(4096, 9));
  CHECK((r.at("x2").first_order > r.at("x1").first_order) ==
        (integ.at("x2").first_order > integ.at("x1").first_order));
  const auto fine = pod_sobol_indices(add, make_grid(0.0, 1.0, 201), opts(4096));
  for (const char* n : {"x1", "x2"}) {
    CHECK(std::abs(fine.at(n).first_order - r.at(n).first_order) < 0.02);
    CHECK(std::abs(fine.at(n).total - r.at(n).total) < 0.02);
  }
}

TEST_CASE("indices of the POD value at a fixed size") {
  const std::vector<FeatureLaw> laws{Gaussian{0, 1}, Uniform{0, 1}};
  const FormulaModel one(laws, [](const Eigen::RowVectorXd& x) { return 0.5 + 0.1 * x(0); }, 0.05);
  CHECK_THROWS_AS(pod_value_sobol(one, -5.0, opts(512)), DegenerateVarianceError);
  const auto r = pod_value_sobol(one, 0.5, opts(4096));
  CHECK(std::abs(r.at("x1").first_order - 1.0) < 0.05);
  CHECK(std::abs(r.at("x1").total - 1.0) < 0.05);

  const FormulaModel two(laws, [](const Eigen::RowVectorXd& x) { return 0.5 + 0.05 * x(0) + 0.2 * (x(1) - 0.5); }, 0.05);
  const std::vector<double> at{0.52};
  const auto direct = sobol_indices_scalar(
      [&](const Eigen::MatrixXd& x) { return Eigen::VectorXd(two.pod_x(x, at).col(0)); }, laws, {"x1", "x2"},
      opts(4096, 4));
  const auto via = pod_value_sobol(two, 0.52, opts(4096, 5));
  for (const char* n : {"x1", "x2"}) {
    CHECK(std::abs(direct.at(n).first_order - via.at(n).first_order) <
          3 * std::hypot(direct.at(n).first_order_stderr, via.at(n).first_order_stderr) + 0.01);
    CHECK(std::abs(direct.at(n).total - via.at(n).total) <
          3 * std::hypot(direct.at(n).total_stderr, via.at(n).total_stderr) + 0.01);
  }
}

TEST_CASE("inverse POD indices") {
  const std::vector<FeatureLaw> laws{Uniform{0.2, 0.8}, Gaussian{0, 1}};
  const auto grid = make_grid(0.0, 1.0, 401);
  const FormulaModel step(laws, [](const Eigen::RowVectorXd& x) { return x(0); }, 0.0);
  const auto r = inverse_pod_sobol(step, grid, 0.9, opts(4096));
  CHECK(std::abs(r.at("x1").first_order - 1.0) < 0.05);
  CHECK(std::abs(r.at("x1").total - 1.0) < 0.05);
  CHECK(std::abs(r.at("x2").total) < 0.05);
  CHECK(r.rejected_fraction == 0.0);
  const FormulaModel shifted(laws, [](const Eigen::RowVectorXd& x) { return x(0) + 0.1; }, 0.0);
  const auto rs = inverse_pod_sobol(shifted, grid, 0.9, opts(4096));
  CHECK(std::abs(rs.at("x1").first_order - r.at("x1").first_order) < 0.01);
  const FormulaModel wide({Uniform{0.2, 1.5}, Gaussian{0, 1}}, [](const Eigen::RowVectorXd& x) { return x(0); }, 0.0);
  CHECK_THROWS_AS(inverse_pod_sobol(wide, grid, 0.9, opts(512)), CoverageError);
}

TEST_CASE("inverse POD indices agree with a double-loop estimate") {
  const std::vector<FeatureLaw> laws{Gaussian{0, 1}, Gaussian{0, 1}};
  auto m = [](double x1, double x2) { return 0.5 + 0.1 * x1 + 0.05 * x2 + 0.05 * x1 * x2; };
  const FormulaModel model(laws, [&](const Eigen::RowVectorXd& x) { return m(x(0), x(1)); }, 0.03);
  const auto grid = make_grid(-0.5, 1.5, 401);
  const auto r = inverse_pod_sobol(model, grid, 0.9, opts(8192));

  // Var(E[Y | x_k]) / Var(Y) with an outer loop over x_k and an inner loop over the other input.
  Rng rng = make_rng(77, 0);
  const int outer = 300, inner = 300;
  std::vector<double> z1(outer), z2(inner);
  for (auto& v : z1) v = normal_quantile(uniform_open(rng));
  for (auto& v : z2) v = normal_quantile(uniform_open(rng));
  auto inv = [&](double x1, double x2) {
    Eigen::MatrixXd row(1, 2);
    row << x1, x2;
    const Eigen::MatrixXd c = model.pod_x(row, grid);
    return a_at_level(grid, std::vector<double>(c.data(), c.data() + c.size()), 0.9);
  };
  for (int k = 0; k < 2; ++k) {
    std::vector<double> cond(outer);
    double tot = 0, tot2 = 0;
    for (int i = 0; i < outer; ++i) {
      double s = 0;
      for (int j = 0; j < inner; ++j) {
        const double y = k == 0 ? inv(z1[i], z2[j]) : inv(z2[j], z1[i]);
        s += y;
        tot += y;
        tot2 += y * y;
      }
      cond[i] = s / inner;
    }
    const double n = static_cast<double>(outer) * inner;
    const double mean = tot / n, var = tot2 / n - mean * mean;
    double vc = 0;
    for (double c : cond) vc += (c - mean) * (c - mean) / outer;
    const double s_ref = (vc - var / inner) / var;  // remove inner-loop noise bias
    CHECK(std::abs(r.at(k == 0 ? "x1" : "x2").first_order - s_ref) < 0.05);
  }
}
