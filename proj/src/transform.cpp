#include "mapod/transform.hpp"

#include <cmath>

#include "mapod/error.hpp"

namespace mapod {

double apply_boxcox(double x, double lambda) {
  if (!(x > 0.0)) throw DomainError("Box-Cox requires positive values");
  if (std::abs(lambda) < kBoxCoxLogThreshold) return std::log(x);
  return std::expm1(lambda * std::log(x)) / lambda;
}

std::vector<double> apply_boxcox(std::span<const double> x, double lambda) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = apply_boxcox(x[i], lambda);
  return out;
}

double invert_boxcox(double y, double lambda) {
  if (std::abs(lambda) < kBoxCoxLogThreshold) return std::exp(y);
  const double base = 1.0 + lambda * y;
  if (!(base > 0.0)) throw DomainError("value outside the Box-Cox image");
  return std::exp(std::log1p(lambda * y) / lambda);
}

double boxcox_profile_loglik(std::span<const double> a, std::span<const double> x, double lambda) {
  const std::size_t n = a.size();
  if (x.size() != n) throw ArgumentError("Box-Cox: length mismatch");
  if (n < 3) throw InsufficientDataError("Box-Cox needs at least 3 points");
  double sum_log = 0.0;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = apply_boxcox(x[i], lambda);
    sum_log += std::log(x[i]);
  }
  double ma = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) ma += a[i], my += y[i];
  ma /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (a[i] - ma) * (a[i] - ma);
    sxy += (a[i] - ma) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw SingularDesignError("Box-Cox: defect sizes are all equal");
  const double rss = std::max(syy - sxy * sxy / sxx, 0.0);
  const double nn = static_cast<double>(n);
  if (!(rss > 0.0)) return std::numeric_limits<double>::infinity();
  return -0.5 * nn * std::log(rss / nn) + (lambda - 1.0) * sum_log;
}

BoxCoxTransform fit_boxcox(std::span<const double> a, std::span<const double> response,
                           double threshold, LambdaRange range) {
  if (!(range.lo <= range.hi)) throw ArgumentError("Box-Cox: empty lambda range");
  for (double v : response) {
    if (!(v > 0.0)) throw DomainError("Box-Cox requires a strictly positive response");
  }
  auto ll = [&](double lam) { return boxcox_profile_loglik(a, response, lam); };

  double best = range.lo;
  double best_ll = ll(best);
  if (range.hi > range.lo) {
    const int steps = static_cast<int>(std::ceil((range.hi - range.lo) / 0.01));
    for (int k = 1; k <= steps; ++k) {
      const double lam = std::min(range.lo + 0.01 * k, range.hi);
      const double v = ll(lam);
      if (v > best_ll) best_ll = v, best = lam;
    }
    double lo = std::max(range.lo, best - 0.01);
    double hi = std::min(range.hi, best + 0.01);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - phi * (hi - lo);
    double d = lo + phi * (hi - lo);
    double fc = ll(c), fd = ll(d);
    while (hi - lo > 1e-4) {
      if (fc > fd) {
        hi = d, d = c, fd = fc;
        c = hi - phi * (hi - lo);
        fc = ll(c);
      } else {
        lo = c, c = d, fc = fd;
        d = lo + phi * (hi - lo);
        fd = ll(d);
      }
    }
    const double mid = 0.5 * (lo + hi);
    const double fm = ll(mid);
    if (fm >= best_ll) best_ll = fm, best = mid;
  }
  BoxCoxTransform out;
  out.lambda = best;
  out.log_likelihood = best_ll;
  if (!std::isnan(threshold)) out.transformed_threshold = apply_boxcox(threshold, best);
  return out;
}

}  // namespace mapod
