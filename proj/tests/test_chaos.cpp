#include "doctest.h"

#include <cmath>
#include <vector>

#include "mapod/chaos.hpp"
#include "mapod/error.hpp"
#include "oracles.hpp"

using namespace mapod;

namespace {

Eigen::MatrixXd draw(const std::vector<FeatureLaw>& laws, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  return sample_nuisance(laws, n, rng);
}

std::vector<double> as_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("univariate normalized polynomials") {
  const auto uni = build_orthonormal_basis(std::vector<FeatureLaw>{Uniform{-1.0, 1.0}}, 1);
  const double x[1] = {0.4};
  CHECK(uni.evaluate_term(1, x) == doctest::Approx(std::sqrt(3.0) * 0.4));
  const auto gau = build_orthonormal_basis(std::vector<FeatureLaw>{Gaussian{0.0, 1.0}}, 1);
  CHECK(gau.evaluate_term(1, x) == doctest::Approx(0.4));
  CHECK(gau.evaluate_term(0, x) == 1.0);
  CHECK(hermite_normalized(2, 1.5) == doctest::Approx((1.5 * 1.5 - 1.0) / std::sqrt(2.0)));
  CHECK(legendre_normalized(2, 0.5) == doctest::Approx(std::sqrt(5.0) * 0.5 * (3 * 0.25 - 1)));
}

TEST_CASE("truncation counts") {
  std::vector<FeatureLaw> six(6, Uniform{0.0, 1.0});
  CHECK(build_orthonormal_basis(six, 1).size() == 7);
  CHECK(build_orthonormal_basis(std::vector<FeatureLaw>(3, Gaussian{0, 1}), 3).size() == 20);
  const auto b = build_orthonormal_basis(six, 2);
  CHECK(b.terms[0] == std::vector<unsigned>(6, 0));
  for (std::size_t k = 1; k < b.size(); ++k) {
    unsigned prev = 0, cur = 0;
    for (unsigned v : b.terms[k - 1]) prev += v;
    for (unsigned v : b.terms[k]) cur += v;
    CHECK(cur >= prev);
  }
}

TEST_CASE("Gram matrix under tensor quadrature is the identity") {
  const std::vector<FeatureLaw> laws{Uniform{0.1, 0.5}, Gaussian{1.27, 0.02}, Uniform{2.0, 20.0}};
  for (unsigned deg = 1; deg <= 3; ++deg) {
    const auto basis = build_orthonormal_basis(laws, deg);
    const auto [lx, lw] = oracle::gauss_legendre(6);
    const auto [hx, hw] = oracle::gauss_hermite(6);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(basis.size(), basis.size());
    std::vector<double> psi(basis.size());
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        for (int k = 0; k < 6; ++k) {
          const double x[3] = {0.3 + 0.2 * lx[i], 1.27 + 0.02 * hx[j], 11.0 + 9.0 * lx[k]};
          basis.evaluate(x, psi);
          const double w = lw[i] * hw[j] * lw[k];
          for (std::size_t p = 0; p < basis.size(); ++p)
            for (std::size_t q = 0; q < basis.size(); ++q) gram(p, q) += w * psi[p] * psi[q];
        }
    CHECK((gram - Eigen::MatrixXd::Identity(basis.size(), basis.size())).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("exact linear response selects degree 1") {
  const std::vector<FeatureLaw> laws{Uniform{0.1, 0.5}, Gaussian{0.0, 1.0}, Uniform{2.0, 20.0}};
  const auto X = draw(laws, 60, 1);
  std::vector<double> y(60);
  for (int i = 0; i < 60; ++i) y[i] = 1.0 + 4.0 * X(i, 0) - 0.5 * X(i, 1) + 0.1 * X(i, 2);
  const auto fit = fit_chaos(X, y, laws, {1, 2});
  CHECK(fit.basis.degree == 1);
  CHECK(fit.sigma_eps < 1e-10);
  CHECK(fit.q2 == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("product response selects degree 2") {
  const std::vector<FeatureLaw> laws{Uniform{-1.0, 1.0}, Uniform{-1.0, 1.0}};
  const auto X = draw(laws, 80, 2);
  Rng rng = make_rng(2, 5);
  std::vector<double> y(80);
  for (int i = 0; i < 80; ++i) y[i] = X(i, 0) * X(i, 1) + 0.01 * normal_quantile(uniform_open(rng));
  const auto fit = fit_chaos(X, y, laws, {1, 2});
  CHECK(fit.basis.degree == 2);
  REQUIRE(fit.q2_by_degree.size() == 2);
  CHECK(fit.q2_by_degree[1].second > fit.q2_by_degree[0].second);
}

TEST_CASE("coefficients match the normal equations and LOO matches explicit refits") {
  const std::vector<FeatureLaw> laws{Uniform{0.1, 0.5}, Gaussian{1.27, 0.02}, Uniform{2.0, 20.0}};
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto X = draw(laws, 50, 10 + seed);
    Rng rng = make_rng(seed, 7);
    Eigen::VectorXd y(50);
    for (int i = 0; i < 50; ++i)
      y(i) = 2.5 + 43.5 * X(i, 0) + 30.0 * (X(i, 1) - 1.27) + 0.05 * X(i, 2) * X(i, 0) + 0.5 * normal_quantile(uniform_open(rng));
    for (unsigned deg : {1u, 2u}) {
      const auto basis = build_orthonormal_basis(laws, deg);
      const auto fit = fit_chaos_basis(X, as_vec(y), basis);
      const Eigen::MatrixXd psi = basis.design_matrix(X);
      const Eigen::VectorXd ref = oracle::normal_equations(psi, y);
      CHECK((fit.coefficients - ref).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(std::abs(loo_q2(X, as_vec(y), basis) - oracle::brute_force_q2(psi, y)) < 1e-10);
      const double rss = (y - psi * ref).squaredNorm();
      CHECK(fit.sigma_eps == doctest::Approx(std::sqrt(rss / (50.0 - basis.size()))).epsilon(1e-9));
    }
  }
}

TEST_CASE("pure noise has low predictivity") {
  const std::vector<FeatureLaw> laws{Uniform{0.0, 1.0}, Gaussian{0.0, 1.0}};
  const auto X = draw(laws, 200, 3);
  Rng rng = make_rng(3, 9);
  std::vector<double> y(200);
  for (auto& v : y) v = normal_quantile(uniform_open(rng));
  CHECK(loo_q2(X, y, build_orthonormal_basis(laws, 1)) <= 0.1);
}

TEST_CASE("constant-only predictor is the sample mean") {
  const std::vector<FeatureLaw> laws{Uniform{0.0, 1.0}};
  const auto X = draw(laws, 10, 4);
  std::vector<double> y{1, 4, 2, 8, 5, 7, 1, 0, 3, 9};
  const auto fit = fit_chaos_basis(X, y, build_orthonormal_basis(laws, 0));
  const double x0[1] = {0.3};
  CHECK(fit.predict(x0) == doctest::Approx(4.0));
}

TEST_CASE("errors: underdetermined, singular, leverage") {
  const std::vector<FeatureLaw> laws{Uniform{0.0, 1.0}, Uniform{0.0, 1.0}};
  const auto X = draw(laws, 6, 5);
  const std::vector<double> y6{1, 2, 3, 4, 5, 6};
  CHECK_THROWS_AS(fit_chaos_basis(X, y6, build_orthonormal_basis(laws, 2)), UnderdeterminedError);
  Eigen::MatrixXd flat = X;
  flat.col(1).setConstant(0.5);
  CHECK_THROWS_AS(fit_chaos_basis(flat, y6, build_orthonormal_basis(laws, 1)), SingularDesignError);
  Eigen::MatrixXd lev = flat;
  lev(5, 1) = 0.9;  // only row with a distinct second input
  CHECK_THROWS_AS(loo_q2(lev, y6, build_orthonormal_basis(laws, 1)), LeverageError);
}

TEST_CASE("surrogate variance equals the sum of squared coefficients") {
  const std::vector<FeatureLaw> laws{Uniform{0.1, 0.5}, Gaussian{0.0, 1.0}};
  const auto X = draw(laws, 100, 6);
  std::vector<double> y(100);
  for (int i = 0; i < 100; ++i) y[i] = std::sin(3 * X(i, 0)) + X(i, 1) * X(i, 1) + X(i, 0) * X(i, 1);
  const auto fit = fit_chaos_basis(X, y, build_orthonormal_basis(laws, 3));
  const auto big = draw(laws, 200000, 7);
  std::vector<double> v(big.rows());
  double m = 0;
  for (Eigen::Index i = 0; i < big.rows(); ++i) {
    const double x[2] = {big(i, 0), big(i, 1)};
    v[i] = fit.predict(x);
    m += v[i];
  }
  m /= v.size();
  double s2 = 0, s4 = 0;
  for (double t : v) {
    s2 += (t - m) * (t - m);
    s4 += std::pow(t - m, 4);
  }
  const double n = static_cast<double>(v.size());
  const double var = s2 / (n - 1);
  const double se = std::sqrt((s4 / n - var * var) / n);
  CHECK(std::abs(var - fit.surrogate_variance()) < 3 * se);
}

namespace {

// Yhat = a + c x over laws {Uniform(-1,1), Gaussian(0,1)}.
ChaosFit linear_surrogate(double c, double sigma_eps) {
  ChaosFit f;
  f.basis = build_orthonormal_basis(std::vector<FeatureLaw>{Uniform{-1.0, 1.0}, Gaussian{0.0, 1.0}}, 1);
  f.coefficients = Eigen::VectorXd::Zero(3);
  for (std::size_t k = 0; k < 3; ++k) {
    if (f.basis.terms[k] == std::vector<unsigned>{1, 0}) f.coefficients(k) = 1.0 / std::sqrt(3.0);
    if (f.basis.terms[k] == std::vector<unsigned>{0, 1}) f.coefficients(k) = c;
  }
  f.sigma_eps = sigma_eps;
  f.information_matrix_inverse = Eigen::MatrixXd::Identity(3, 3) * 0.01;
  f.n = 100;
  return f;
}

}  // namespace

TEST_CASE("chaos POD special cases and Gaussian-exceedance agreement") {
  const std::vector<double> grid{-0.5, -0.1, 0.0, 0.1, 0.5};
  const auto det = chaos_pod(linear_surrogate(0.0, 0.0), 0.05, grid, {1000, 1});
  for (std::size_t j = 0; j < grid.size(); ++j) CHECK(det.pod[j] == (grid[j] > 0.05 ? 1.0 : 0.0));
  const std::vector<double> g0{0.2};
  const auto half = chaos_pod(linear_surrogate(0.0, 1.0), 0.2, g0, {10000, 2});
  CHECK(std::abs(half.pod[0] - 0.5) < 3 * std::sqrt(0.25 / 10000));
  const auto lin = chaos_pod(linear_surrogate(0.7, 0.4), 0.1, grid, {10000, 3});
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double truth = normal_cdf((grid[j] - 0.1) / std::sqrt(0.49 + 0.16));
    CHECK(std::abs(lin.pod[j] - truth) < 3 * std::sqrt(truth * (1 - truth) / 10000) + 1e-12);
  }
  CHECK(chaos_pod(linear_surrogate(0.7, 0.4), 0.1, grid, {10000, 3}).pod == lin.pod);
  CHECK_THROWS_AS(chaos_pod(linear_surrogate(0.7, 0.4), 0.1, grid, {999, 3}), ArgumentError);
}

TEST_CASE("chaos band ordering and degenerate posterior") {
  const std::vector<FeatureLaw> laws{Uniform{0.1, 0.5}, Gaussian{1.27, 0.02}};
  const auto X = draw(laws, 100, 8);
  Rng rng = make_rng(8, 1);
  std::vector<double> y(100), exact(100);
  for (int i = 0; i < 100; ++i) {
    exact[i] = 2.5 + 43.5 * X(i, 0) + 50.0 * (X(i, 1) - 1.27);
    y[i] = exact[i] + 1.95 * normal_quantile(uniform_open(rng));
  }
  const auto grid = make_grid(0.1, 0.5, 41);
  const auto fit = fit_chaos(X, y, laws, {1});
  const auto band = chaos_pod_band(fit, 13.051, grid, {150, 2000, 0.95, 4});
  for (std::size_t j = 0; j < grid.size(); ++j) {
    CHECK(band.lower[j] <= band.curve.pod[j]);
    CHECK(band.curve.pod[j] <= band.upper[j]);
  }
  const auto zero = chaos_pod_band(fit_chaos(X, exact, laws, {1}), 13.051, grid, {60, 5000, 0.95, 4});
  double width = 0;
  for (std::size_t j = 0; j < grid.size(); ++j) width = std::max(width, zero.upper[j] - zero.lower[j]);
  CHECK(width < 1e-6);
  CHECK_THROWS_AS(chaos_pod_band(fit, 13.0, grid, {49, 2000, 0.95, 4}), ArgumentError);

  const auto many = chaos_pod_band(fit, 13.051, grid, {1000, 2000, 0.95, 4});
  CHECK(std::abs(a_at_level_with_confidence(band, 0.9) - a_at_level_with_confidence(many, 0.9)) < 0.02);
}

TEST_CASE("conditional chaos curve uses the residual sd") {
  const ChaosConditionalPod model(linear_surrogate(0.7, 0.4), 0.1, {"x"});
  const std::vector<double> grid{-0.2, 0.1, 0.4};
  const double x[1] = {0.5};
  const auto c = pod_x_curve(model, x, grid);
  for (std::size_t j = 0; j < grid.size(); ++j)
    CHECK(c.pod[j] == doctest::Approx(normal_cdf((grid[j] + 0.35 - 0.1) / 0.4)).epsilon(1e-12));
}
