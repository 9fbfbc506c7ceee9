#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mapod/pod.hpp"

namespace mapod {

// Ordinary least-squares fit of y = beta0 + beta1 a + eps.
struct LinearFit {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double sigma = 0.0;            // sqrt(RSS / (N - 2))
  Eigen::Matrix2d xtx_inverse;   // (X^T X)^{-1} with X = [1 a]
  std::vector<double> a;
  std::vector<double> y;
  std::vector<double> residuals;
  double r_squared = 0.0;
  std::size_t n = 0;

  double predict(double at) const { return beta0 + beta1 * at; }
};

LinearFit fit_linear(std::span<const double> a, std::span<const double> y);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Residual checks. Kolmogorov-Smirnov and Anderson-Darling test normality
// against the Gaussian with the residuals' own mean and sd (KS without the
// Lilliefors correction, so it is conservative; AD uses Stephens' case-3
// modification). Breusch-Pagan is Koenker's N R^2 of e^2 on a, chi-square(1).
// Durbin-Watson is taken in row order with a two-sided normal approximation.
struct DiagnosticsReport {
  TestResult kolmogorov_smirnov;
  TestResult anderson_darling;
  TestResult breusch_pagan;
  TestResult durbin_watson;
};

DiagnosticsReport residual_diagnostics(const LinearFit& fit);
std::string format_diagnostics(const DiagnosticsReport& report);

// 1 - Phi((s - beta0 - beta1 a) / sigma); a step function when sigma = 0.
PodCurve berens_pod(const LinearFit& fit, double s, std::span<const double> grid);

struct PosteriorBandOptions {
  std::size_t n_draws = 10000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

// Posterior-sampling band: sigma^2 from the scaled inverse chi-square law
// with N - 2 degrees of freedom, then (beta0, beta1) ~ N(beta_hat,
// sigma^2 (X^T X)^{-1}); pointwise quantiles of the sampled POD curves.
PodBand berens_pod_band(const LinearFit& fit, double s, std::span<const double> grid,
                        const PosteriorBandOptions& options = {});

struct BinomialPod {
  PodCurve curve;
  std::vector<std::size_t> counts;  // N_s(a) per grid point
  std::size_t n = 0;
};

// Empirical-residual POD: N_s(a) = #{i : beta0 + beta1 a + e_i > s}.
BinomialPod binomial_pod(const LinearFit& fit, double s, std::span<const double> grid);

struct Interval {
  double lower = 0.0;
  double upper = 1.0;
};

// Exact two-sided Clopper-Pearson interval.
Interval clopper_pearson(std::size_t count, std::size_t n, double level);
// Exact one-sided lower Clopper-Pearson bound.
double clopper_pearson_lower(std::size_t count, std::size_t n, double level);

PodBand binomial_band(const BinomialPod& pod, double level = 0.95);

}  // namespace mapod
