#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mapod/pod.hpp"
#include "mapod/stats.hpp"

namespace mapod {

// Matern 5/2 correlation (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r).
double matern52(double r);

struct KrigingOptions {
  std::size_t n_starts = 10;
  bool estimate_nugget = false;
  double theta_lo = 1e-2;  // standardized units
  double theta_hi = 1e2;
  std::size_t max_evaluations = 0;  // 0: 400 * (parameters + 1)
};

struct PredictiveDistribution {
  double mean = 0.0;
  double variance = 0.0;
};

// Universal kriging with trend beta0 + beta1 x_0 and anisotropic Matern 5/2
// covariance sigma2 * (R(theta) + nugget I). Inputs are standardized
// internally; theta is reported in standardized units, theta_raw = theta *
// column sd.
struct KrigingFit {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double sigma2 = 0.0;
  std::vector<double> theta;
  std::vector<double> theta_raw;
  double nugget = 0.0;  // ratio to sigma2
  double jitter = 0.0;  // diagonal ratio added for the factorization
  double log_likelihood = 0.0;
  double q2 = 0.0;
  std::size_t converged_starts = 0;

  Eigen::MatrixXd x;  // raw design
  Eigen::VectorXd y;
  Eigen::RowVectorXd center;
  Eigen::RowVectorXd scale;
  // Laws of features 1.. (used for POD integration); may be empty.
  std::vector<FeatureLaw> nuisance_laws;

  // Internal state shared by prediction.
  Eigen::MatrixXd xs;       // standardized design
  Eigen::MatrixXd chol_l;   // lower factor of R + (nugget + jitter) I
  Eigen::VectorXd alpha;    // K^{-1} (y - F beta)
  Eigen::MatrixXd linv_f;   // L^{-1} F
  Eigen::Matrix2d gls_inverse;  // (F^T K^{-1} F)^{-1}

  std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }
  std::size_t n() const { return static_cast<std::size_t>(x.rows()); }
  std::vector<PredictiveDistribution> predict(const Eigen::MatrixXd& points) const;
  PredictiveDistribution predict(std::span<const double> point) const;
};

// Maximum-likelihood fit (profiled beta and sigma2, Nelder-Mead multistart in
// log theta).
KrigingFit fit_kriging(const Eigen::MatrixXd& x, std::span<const double> y,
                       const KrigingOptions& options = {},
                       std::vector<FeatureLaw> nuisance_laws = {});

// Fit with fixed hyperparameters (theta in standardized units).
KrigingFit fit_kriging_fixed(const Eigen::MatrixXd& x, std::span<const double> y,
                             std::span<const double> theta, double nugget = 0.0,
                             std::vector<FeatureLaw> nuisance_laws = {});

// Profiled log-likelihood at theta (standardized units).
double kriging_log_likelihood(const Eigen::MatrixXd& x, std::span<const double> y,
                              std::span<const double> theta, double nugget = 0.0);

// Virtual leave-one-out residuals y_i - yhat_{-i} with hyperparameters fixed.
Eigen::VectorXd kriging_loo_residuals(const KrigingFit& fit);
double kriging_q2(const KrigingFit& fit);
double kriging_q2(const Eigen::MatrixXd& x, std::span<const double> y,
                  const KrigingOptions& options = {});

// Joint draws of the latent process at `points` given the data: a points x
// n_paths matrix.
Eigen::MatrixXd conditional_simulation(const KrigingFit& fit, const Eigen::MatrixXd& points,
                                       std::size_t n_paths, Rng& rng);

struct KrigingPodOptions {
  std::size_t n_mc = 10000;
  std::uint64_t seed = 0;
};

// POD(a) = E_X[1 - Phi((s - mean(a, X)) / sd(a, X))] by Monte Carlo, with the
// same X draws at every grid point.
PodCurve kriging_pod(const KrigingFit& fit, double s, std::span<const double> grid,
                     const KrigingPodOptions& options = {});

struct KrigingBandOptions {
  std::size_t n_mc = 10000;
  std::size_t n_paths = 200;
  std::size_t band_points = 200;  // X draws carried into the simulations
  double level = 0.95;
  std::uint64_t seed = 0;
};

// Three envelopes around the same plug-in curve: Monte Carlo error only,
// process (GP) uncertainty only, and both.
struct KrigingBand {
  PodBand mc;
  PodBand gp;
  PodBand total;
};

KrigingBand kriging_pod_band(const KrigingFit& fit, double s, std::span<const double> grid,
                             const KrigingBandOptions& options = {});

// POD_X(a) = 1 - Phi((s - mean(a, x)) / sd(a, x)).
class KrigingConditionalPod final : public ConditionalPodModel {
 public:
  KrigingConditionalPod(KrigingFit fit, double threshold, std::vector<std::string> nuisance_names);

  const std::vector<FeatureLaw>& nuisance_laws() const override { return fit_.nuisance_laws; }
  const std::vector<std::string>& nuisance_names() const override { return names_; }
  Eigen::MatrixXd pod_x(const Eigen::MatrixXd& x, std::span<const double> grid) const override;

 private:
  KrigingFit fit_;
  double threshold_;
  std::vector<std::string> names_;
};

}  // namespace mapod
