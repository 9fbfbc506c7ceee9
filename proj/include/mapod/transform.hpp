#pragma once

#include <limits>
#include <span>
#include <vector>

namespace mapod {

// |lambda| below this is treated as the log transform.
inline constexpr double kBoxCoxLogThreshold = 1e-6;

// (x^lambda - 1) / lambda, or ln(x) near lambda = 0. Requires x > 0.
double apply_boxcox(double x, double lambda);
std::vector<double> apply_boxcox(std::span<const double> x, double lambda);
double invert_boxcox(double y, double lambda);

struct LambdaRange {
  double lo = -2.0;
  double hi = 2.0;
};

struct BoxCoxTransform {
  double lambda = 1.0;
  double log_likelihood = 0.0;
  // Box-Cox image of the raw detection threshold (NaN when none was given).
  double transformed_threshold = std::numeric_limits<double>::quiet_NaN();
};

// Profile log-likelihood of y(lambda) = b0 + b1 a + eps, Gaussian eps,
// including the Jacobian term (lambda - 1) sum ln x.
double boxcox_profile_loglik(std::span<const double> a, std::span<const double> x, double lambda);

// Maximum-likelihood lambda over the range: a 0.01-step scan brackets the
// maximum, golden-section refines it to 1e-4.
BoxCoxTransform fit_boxcox(std::span<const double> a, std::span<const double> response,
                           double threshold = std::numeric_limits<double>::quiet_NaN(),
                           LambdaRange range = {});

}  // namespace mapod
