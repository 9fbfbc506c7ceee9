#include "mapod/berens.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <sstream>

#include "mapod/error.hpp"
#include "mapod/parallel.hpp"
#include "mapod/stats.hpp"

namespace mapod {

LinearFit fit_linear(std::span<const double> a, std::span<const double> y) {
  const std::size_t n = a.size();
  if (y.size() != n) throw ArgumentError("fit_linear: length mismatch");
  if (n < 2) throw InsufficientDataError("fit_linear needs at least 2 points");
  const double nn = static_cast<double>(n);
  double ma = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) ma += a[i], my += y[i];
  ma /= nn;
  my /= nn;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (a[i] - ma) * (a[i] - ma);
    sxy += (a[i] - ma) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 1e-300) || sxx <= 1e-14 * nn * (ma * ma + 1e-300)) {
    throw SingularDesignError("fit_linear: defect sizes are (numerically) constant");
  }

  LinearFit fit;
  fit.n = n;
  fit.beta1 = sxy / sxx;
  fit.beta0 = my - fit.beta1 * ma;
  fit.a.assign(a.begin(), a.end());
  fit.y.assign(y.begin(), y.end());
  fit.residuals.resize(n);
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Centered form keeps the residual mean at rounding level.
    const double r = (y[i] - my) - fit.beta1 * (a[i] - ma);
    fit.residuals[i] = r;
    rss += r * r;
  }
  fit.sigma = n > 2 ? std::sqrt(rss / (nn - 2.0)) : 0.0;
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - rss / syy, 0.0, 1.0) : 1.0;
  // (X^T X)^{-1} in centered form: det = n * sxx.
  const double sum_a2 = sxx + nn * ma * ma;
  fit.xtx_inverse << sum_a2 / (nn * sxx), -ma / sxx, -ma / sxx, 1.0 / sxx;
  return fit;
}

namespace {

double anderson_darling_pvalue(double a2_star) {
  const double z = a2_star;
  double p;
  if (z < 0.2) {
    p = 1.0 - std::exp(-13.436 + 101.14 * z - 223.73 * z * z);
  } else if (z < 0.34) {
    p = 1.0 - std::exp(-8.318 + 42.796 * z - 59.938 * z * z);
  } else if (z < 0.6) {
    p = std::exp(0.9177 - 4.279 * z - 1.38 * z * z);
  } else if (z < 10.0) {
    p = std::exp(1.2937 - 5.709 * z + 0.0186 * z * z);
  } else {
    p = 3.7e-24;
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

DiagnosticsReport residual_diagnostics(const LinearFit& fit) {
  const auto& e = fit.residuals;
  const std::size_t n = e.size();
  if (n < 8) throw InsufficientDataError("residual diagnostics need at least 8 residuals");
  const double nn = static_cast<double>(n);
  const double m = mean(e);
  const double sd = std::sqrt(sample_variance(e));
  DiagnosticsReport rep;

  if (sd > 0.0) {
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (e[i] - m) / sd;
    std::sort(z.begin(), z.end());

    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double f = normal_cdf(z[i]);
      d = std::max({d, (i + 1.0) / nn - f, f - i / nn});
    }
    const double sqn = std::sqrt(nn);
    rep.kolmogorov_smirnov = {d, kolmogorov_sf((sqn + 0.12 + 0.11 / sqn) * d)};

    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double lo = std::max(normal_cdf(z[i]), 1e-300);
      const double hi = std::max(normal_sf(z[n - 1 - i]), 1e-300);
      s += (2.0 * i + 1.0) * (std::log(lo) + std::log(hi));
    }
    const double a2 = -nn - s / nn;
    const double a2_star = a2 * (1.0 + 0.75 / nn + 2.25 / (nn * nn));
    rep.anderson_darling = {a2, anderson_darling_pvalue(a2_star)};
  } else {
    rep.kolmogorov_smirnov = {0.0, 1.0};
    rep.anderson_darling = {0.0, 1.0};
  }

  // Koenker-Breusch-Pagan: n * R^2 of e^2 regressed on a.
  {
    std::vector<double> e2(n);
    for (std::size_t i = 0; i < n; ++i) e2[i] = e[i] * e[i];
    const double me2 = mean(e2);
    const double ma = mean(fit.a);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sxx += (fit.a[i] - ma) * (fit.a[i] - ma);
      sxy += (fit.a[i] - ma) * (e2[i] - me2);
      syy += (e2[i] - me2) * (e2[i] - me2);
    }
    const double r2 = (syy > 0.0 && sxx > 0.0) ? sxy * sxy / (sxx * syy) : 0.0;
    const double lm = nn * r2;
    rep.breusch_pagan = {lm, chi2_1_sf(lm)};
  }

  {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      den += e[i] * e[i];
      if (i > 0) num += (e[i] - e[i - 1]) * (e[i] - e[i - 1]);
    }
    const double dw = den > 0.0 ? num / den : 2.0;
    const double z = (dw - 2.0) / (2.0 / std::sqrt(nn));
    rep.durbin_watson = {dw, std::clamp(2.0 * normal_sf(std::abs(z)), 0.0, 1.0)};
  }
  return rep;
}

std::string format_diagnostics(const DiagnosticsReport& r) {
  std::ostringstream out;
  out.precision(10);
  out << "kolmogorov_smirnov.statistic = " << r.kolmogorov_smirnov.statistic << '\n'
      << "kolmogorov_smirnov.p_value = " << r.kolmogorov_smirnov.p_value << '\n'
      << "kolmogorov_smirnov.note = Gaussian with fitted mean and sd, no Lilliefors correction\n"
      << "anderson_darling.statistic = " << r.anderson_darling.statistic << '\n'
      << "anderson_darling.p_value = " << r.anderson_darling.p_value << '\n'
      << "breusch_pagan.statistic = " << r.breusch_pagan.statistic << '\n'
      << "breusch_pagan.p_value = " << r.breusch_pagan.p_value << '\n'
      << "durbin_watson.statistic = " << r.durbin_watson.statistic << '\n'
      << "durbin_watson.p_value = " << r.durbin_watson.p_value << '\n';
  return out.str();
}

PodCurve berens_pod(const LinearFit& fit, double s, std::span<const double> grid) {
  PodCurve c;
  c.grid.assign(grid.begin(), grid.end());
  c.threshold = s;
  c.pod.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    c.pod[j] = gaussian_exceedance(fit.predict(grid[j]), fit.sigma, s);
  }
  c.validate();
  return c;
}

PodBand berens_pod_band(const LinearFit& fit, double s, std::span<const double> grid,
                        const PosteriorBandOptions& options) {
  if (options.n_draws < 100) throw ArgumentError("berens_pod_band: n_draws must be >= 100");
  if (fit.n < 3) throw InsufficientDataError("berens_pod_band needs N >= 3");
  const PodCurve estimate = berens_pod(fit, s, grid);
  const auto g = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(options.n_draws), g);

  const Eigen::Matrix2d chol = Eigen::LLT<Eigen::Matrix2d>(fit.xtx_inverse).matrixL();
  const double dof = static_cast<double>(fit.n - 2);
  constexpr std::size_t chunk = 1024;
  const std::size_t n_chunks = (options.n_draws + chunk - 1) / chunk;
  parallel_for(n_chunks, [&](std::size_t c) {
    Rng rng = make_rng(options.seed, c);
    std::chi_squared_distribution<double> chi2(dof);
    const std::size_t end = std::min(options.n_draws, (c + 1) * chunk);
    for (std::size_t d = c * chunk; d < end; ++d) {
      const double sigma2 = fit.sigma > 0.0 ? dof * fit.sigma * fit.sigma / chi2(rng) : 0.0;
      const double sd = std::sqrt(sigma2);
      const Eigen::Vector2d z(normal_quantile(uniform_open(rng)), normal_quantile(uniform_open(rng)));
      const Eigen::Vector2d beta = Eigen::Vector2d(fit.beta0, fit.beta1) + sd * (chol * z);
      for (Eigen::Index j = 0; j < g; ++j) {
        samples(static_cast<Eigen::Index>(d), j) =
            gaussian_exceedance(beta(0) + beta(1) * grid[static_cast<std::size_t>(j)], sd, s);
      }
    }
  });
  return band_from_samples(estimate, samples, options.level, {"regression-posterior"});
}

BinomialPod binomial_pod(const LinearFit& fit, double s, std::span<const double> grid) {
  if (fit.residuals.empty()) throw ArgumentError("binomial_pod: fit has no residuals");
  BinomialPod out;
  out.n = fit.residuals.size();
  out.curve.grid.assign(grid.begin(), grid.end());
  out.curve.threshold = s;
  out.curve.pod.resize(grid.size());
  out.counts.resize(grid.size());
  std::vector<double> sorted = fit.residuals;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    // Count residuals strictly above s - prediction.
    const double cut = s - fit.predict(grid[j]);
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), cut);
    const auto count = static_cast<std::size_t>(sorted.end() - it);
    out.counts[j] = count;
    out.curve.pod[j] = static_cast<double>(count) / static_cast<double>(out.n);
  }
  out.curve.validate();
  return out;
}

Interval clopper_pearson(std::size_t count, std::size_t n, double level) {
  if (n == 0 || count > n) throw ArgumentError("clopper_pearson: need 0 <= count <= n, n > 0");
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("confidence level must be in (0,1)");
  const double alpha = 1.0 - level;
  const auto k = static_cast<double>(count);
  const auto nn = static_cast<double>(n);
  Interval iv;
  iv.lower = count == 0 ? 0.0 : boost::math::ibeta_inv(k, nn - k + 1.0, 0.5 * alpha);
  iv.upper = count == n ? 1.0 : boost::math::ibeta_inv(k + 1.0, nn - k, 1.0 - 0.5 * alpha);
  return iv;
}

double clopper_pearson_lower(std::size_t count, std::size_t n, double level) {
  if (n == 0 || count > n) throw ArgumentError("clopper_pearson: need 0 <= count <= n, n > 0");
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("confidence level must be in (0,1)");
  if (count == 0) return 0.0;
  const auto k = static_cast<double>(count);
  return boost::math::ibeta_inv(k, static_cast<double>(n) - k + 1.0, 1.0 - level);
}

PodBand binomial_band(const BinomialPod& pod, double level) {
  PodBand band;
  band.curve = pod.curve;
  band.level = level;
  band.sources = {"binomial-exact"};
  const auto g = pod.counts.size();
  band.lower.resize(g);
  band.upper.resize(g);
  band.lower_one_sided.resize(g);
  for (std::size_t j = 0; j < g; ++j) {
    const auto iv = clopper_pearson(pod.counts[j], pod.n, level);
    band.lower[j] = iv.lower;
    band.upper[j] = iv.upper;
    band.lower_one_sided[j] = clopper_pearson_lower(pod.counts[j], pod.n, level);
  }
  return band;
}

}  // namespace mapod
