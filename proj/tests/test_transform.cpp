#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "mapod/error.hpp"
#include "mapod/stats.hpp"
#include "mapod/transform.hpp"

using namespace mapod;

TEST_CASE("Box-Cox values") {
  CHECK(apply_boxcox(5.0, 1.0) == doctest::Approx(4.0).epsilon(1e-15));
  for (double lam : {-1.5, -0.3, 0.0, 0.3, 2.0}) CHECK(apply_boxcox(1.0, lam) == doctest::Approx(0.0));
  CHECK(apply_boxcox(std::numbers::e, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(apply_boxcox(0.0, 0.5), DomainError);
  CHECK_THROWS_AS(apply_boxcox(-1.0, 1.0), DomainError);
}

TEST_CASE("Box-Cox inverse and continuity at zero") {
  for (double lam : {-2.0, -0.7, 0.0, 1e-7, 0.3, 1.0, 2.0}) {
    for (double x : {0.05, 0.9, 3.0, 47.0}) {
      CHECK(std::abs(invert_boxcox(apply_boxcox(x, lam), lam) - x) <= 1e-9 * x);
    }
  }
  for (double x = 0.1; x <= 10.0; x += 0.37) CHECK(std::abs(apply_boxcox(x, 1e-8) - std::log(x)) < 1e-6);
}

TEST_CASE("Box-Cox is increasing so exceedance is preserved") {
  for (double lam : {-2.0, -0.5, 0.0, 0.3, 1.5}) {
    double prev = -INFINITY;
    for (double x = 0.1; x < 20.0; x += 0.1) {
      const double y = apply_boxcox(x, lam);
      CHECK(y > prev);
      prev = y;
    }
    CHECK((7.0 > 6.5) == (apply_boxcox(7.0, lam) > apply_boxcox(6.5, lam)));
  }
}

namespace {
std::vector<double> spread(std::size_t n, double lo, double hi) {
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = lo + (hi - lo) * (i + 0.5) / static_cast<double>(n);
  return a;
}
}  // namespace

TEST_CASE("fit_boxcox recovers linear and log-linear data") {
  Rng rng = make_rng(3, 0);
  const auto a = spread(200, 1.0, 2.0);
  std::vector<double> lin(200), logn(200);
  for (std::size_t i = 0; i < 200; ++i) {
    lin[i] = 3.0 + 2.0 * a[i] + 0.05 * normal_quantile(uniform_open(rng));
    logn[i] = std::exp(1.0 + a[i] + 0.05 * normal_quantile(uniform_open(rng)));
  }
  const auto t1 = fit_boxcox(a, lin);
  CHECK(t1.lambda >= 0.8);
  CHECK(t1.lambda <= 1.2);
  const auto t0 = fit_boxcox(a, logn);
  CHECK(t0.lambda >= -0.1);
  CHECK(t0.lambda <= 0.1);
}

TEST_CASE("fit_boxcox dominates the 0.01 grid and maps the threshold") {
  Rng rng = make_rng(4, 0);
  const auto a = spread(100, 0.1, 0.5);
  std::vector<double> y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    y[i] = std::pow(1.0 + 0.3 * (2.5 + 43.5 * a[i] + 1.95 * normal_quantile(uniform_open(rng))), 1.0 / 0.3);
  }
  const auto t = fit_boxcox(a, y, 40.0);
  for (double lam = -2.0; lam <= 2.0 + 1e-12; lam += 0.01) {
    CHECK(t.log_likelihood >= boxcox_profile_loglik(a, y, lam) - 1e-9);
  }
  CHECK(t.transformed_threshold == doctest::Approx(apply_boxcox(40.0, t.lambda)));
  CHECK(t.log_likelihood == doctest::Approx(boxcox_profile_loglik(a, y, t.lambda)));
}

TEST_CASE("fit_boxcox range handling") {
  const auto a = spread(10, 0.0, 1.0);
  std::vector<double> y(10);
  for (std::size_t i = 0; i < 10; ++i) y[i] = 1.0 + a[i] + 0.01 * (i % 3);
  CHECK(fit_boxcox(a, y, NAN, {0.3, 0.3}).lambda == 0.3);
  CHECK_THROWS_AS(fit_boxcox(a, y, NAN, {0.5, 0.3}), ArgumentError);
  y[3] = 0.0;
  CHECK_THROWS_AS(fit_boxcox(a, y), DomainError);
}
