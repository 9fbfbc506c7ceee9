#include "mapod/kriging.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "mapod/doe.hpp"
#include "mapod/error.hpp"
#include "mapod/parallel.hpp"

namespace mapod {

double matern52(double r) {
  const double t = std::sqrt(5.0) * std::abs(r);
  return (1.0 + t + t * t / 3.0) * std::exp(-t);
}

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-6;

Eigen::MatrixXd scaled(const Eigen::MatrixXd& xs, std::span<const double> theta) {
  Eigen::MatrixXd out = xs;
  for (Eigen::Index k = 0; k < xs.cols(); ++k) out.col(k) /= theta[static_cast<std::size_t>(k)];
  return out;
}

// Correlation between rows of a and b, both already divided by theta.
Eigen::MatrixXd cross_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd r2 = -2.0 * a * b.transpose();
  r2.colwise() += na;
  r2.rowwise() += nb.transpose();
  return r2.unaryExpr([](double v) { return matern52(std::sqrt(std::max(v, 0.0))); });
}

Eigen::MatrixXd self_correlation(const Eigen::MatrixXd& a) {
  const auto n = a.rows();
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      r(i, j) = r(j, i) = matern52((a.row(i) - a.row(j)).norm());
    }
  }
  return r;
}

Eigen::MatrixXd trend_matrix(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd f(x.rows(), 2);
  f.col(0).setOnes();
  f.col(1) = x.col(0);
  return f;
}

struct Profile {
  bool ok = false;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  double sigma2 = 0.0;
  Eigen::Vector2d beta = Eigen::Vector2d::Zero();
  double jitter = 0.0;
  Eigen::MatrixXd l;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd linv_f;
  Eigen::Matrix2d gls_inverse;
};

struct Problem {
  Eigen::MatrixXd xs;
  Eigen::VectorXd y;
  Eigen::MatrixXd f;
  double sigma2_floor = 0.0;
};

Profile profile(const Problem& p, std::span<const double> theta, double nugget) {
  Profile out;
  const auto n = p.xs.rows();
  Eigen::MatrixXd r = self_correlation(scaled(p.xs, theta));
  r.diagonal().array() += nugget;
  Eigen::LLT<Eigen::MatrixXd> llt;
  // Without jitter the factor is accepted only when reasonably conditioned.
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd k = r;
    k.diagonal().array() += jitter;
    llt.compute(k);
    const bool last = jitter >= kJitterMax * 0.999;
    if (llt.info() == Eigen::Success && (last || llt.rcond() > 1e-12)) break;
    if (last) return out;
    jitter = jitter == 0.0 ? kJitterStart : jitter * 10.0;
  }
  out.jitter = jitter;
  out.l = llt.matrixL();
  const auto lower = out.l.triangularView<Eigen::Lower>();
  out.linv_f = lower.solve(p.f);
  const Eigen::VectorXd linv_y = lower.solve(p.y);
  const Eigen::Matrix2d a = out.linv_f.transpose() * out.linv_f;
  out.gls_inverse = a.inverse();
  out.beta = out.gls_inverse * (out.linv_f.transpose() * linv_y);
  const Eigen::VectorXd res = linv_y - out.linv_f * out.beta;
  out.sigma2 = std::max(res.squaredNorm() / static_cast<double>(n), p.sigma2_floor);
  const double logdet = 2.0 * out.l.diagonal().array().log().sum();
  out.log_likelihood = -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi * out.sigma2) + logdet +
                               res.squaredNorm() / out.sigma2);
  out.alpha = out.l.transpose().triangularView<Eigen::Upper>().solve(res);
  out.ok = std::isfinite(out.log_likelihood);
  return out;
}

struct NelderMeadResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                             std::vector<double> x0, const std::vector<double>& lo,
                             const std::vector<double>& hi, std::size_t max_evaluations) {
  const std::size_t d = x0.size();
  auto clamp = [&](std::vector<double>& v) {
    for (std::size_t k = 0; k < d; ++k) v[k] = std::clamp(v[k], lo[k], hi[k]);
  };
  std::size_t evaluations = 0;
  auto eval = [&](const std::vector<double>& v) {
    ++evaluations;
    const double f = objective(v);
    return std::isfinite(f) ? f : 1e300;
  };
  std::vector<std::vector<double>> pts(d + 1, x0);
  std::vector<double> fv(d + 1);
  for (std::size_t k = 0; k < d; ++k) {
    const double step = 0.1 * (hi[k] - lo[k]);
    pts[k + 1][k] += (pts[k + 1][k] + step <= hi[k]) ? step : -step;
  }
  for (std::size_t i = 0; i <= d; ++i) fv[i] = eval(pts[i]);

  NelderMeadResult result;
  std::vector<std::size_t> order(d + 1);
  while (true) {
    for (std::size_t i = 0; i <= d; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return fv[i] < fv[j]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];
    double diameter = 0.0;
    for (std::size_t i = 0; i <= d; ++i) {
      for (std::size_t k = 0; k < d; ++k) diameter = std::max(diameter, std::abs(pts[i][k] - pts[best][k]));
    }
    const double spread = fv[worst] - fv[best];
    if (fv[best] < 1e300 && spread <= 1e-8 * (1.0 + std::abs(fv[best])) && diameter <= 1e-3) {
      result.converged = true;
      break;
    }
    if (evaluations >= max_evaluations) break;

    std::vector<double> centroid(d, 0.0);
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == worst) continue;
      for (std::size_t k = 0; k < d; ++k) centroid[k] += pts[i][k] / static_cast<double>(d);
    }
    auto along = [&](double t) {
      std::vector<double> v(d);
      for (std::size_t k = 0; k < d; ++k) v[k] = centroid[k] + t * (pts[worst][k] - centroid[k]);
      clamp(v);
      return v;
    };
    auto reflected = along(-1.0);
    const double fr = eval(reflected);
    if (fr < fv[best]) {
      auto expanded = along(-2.0);
      const double fe = eval(expanded);
      if (fe < fr) {
        pts[worst] = std::move(expanded);
        fv[worst] = fe;
      } else {
        pts[worst] = std::move(reflected);
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      pts[worst] = std::move(reflected);
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    auto contracted = along(outside ? -0.5 : 0.5);
    const double fc = eval(contracted);
    if (fc < (outside ? fr : fv[worst])) {
      pts[worst] = std::move(contracted);
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < d; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
      fv[i] = eval(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  result.x = pts[best];
  result.f = fv[best];
  return result;
}

struct Prepared {
  Problem problem;
  Eigen::RowVectorXd center;
  Eigen::RowVectorXd scale;
};

Prepared prepare(const Eigen::MatrixXd& x, std::span<const double> y, bool allow_duplicates) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw ArgumentError("kriging: design and response lengths differ");
  if (d < 1) throw ArgumentError("kriging: design has no columns");
  if (n < d + 3) {
    throw InsufficientDataError("kriging: N = " + std::to_string(n) + " is below d + 3 = " + std::to_string(d + 3));
  }
  if (!x.allFinite()) throw DataError("kriging: design contains non-finite values");
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("kriging: response contains non-finite values");
  }
  if (!allow_duplicates) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        if (x.row(i) == x.row(j)) {
          throw ConditioningError("kriging: rows " + std::to_string(j + 1) + " and " + std::to_string(i + 1) +
                                  " are identical and the nugget is zero");
        }
      }
    }
  }
  Prepared p;
  p.center = x.colwise().mean();
  p.scale.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double var = (x.col(k).array() - p.center(k)).square().sum() / static_cast<double>(n - 1);
    p.scale(k) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  if (!((x.col(0).array() - p.center(0)).abs().maxCoeff() > 0.0)) {
    throw SingularDesignError("kriging: the defect-size column is constant");
  }
  p.problem.xs = (x.rowwise() - p.center).array().rowwise() / p.scale.array();
  p.problem.y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  p.problem.f = trend_matrix(x);
  const double ybar = p.problem.y.mean();
  const double var_y = (p.problem.y.array() - ybar).square().sum() / static_cast<double>(n);
  p.problem.sigma2_floor = std::max(1e-12 * var_y, std::numeric_limits<double>::min());
  return p;
}

KrigingFit assemble(const Eigen::MatrixXd& x, const Prepared& p, const Profile& prof,
                    std::vector<double> theta, double nugget, std::vector<FeatureLaw> laws) {
  KrigingFit fit;
  fit.beta0 = prof.beta(0);
  fit.beta1 = prof.beta(1);
  fit.sigma2 = prof.sigma2;
  fit.theta = std::move(theta);
  fit.theta_raw.resize(fit.theta.size());
  for (std::size_t k = 0; k < fit.theta.size(); ++k) {
    fit.theta_raw[k] = fit.theta[k] * p.scale(static_cast<Eigen::Index>(k));
  }
  fit.nugget = nugget;
  fit.jitter = prof.jitter;
  fit.log_likelihood = prof.log_likelihood;
  fit.x = x;
  fit.y = p.problem.y;
  fit.center = p.center;
  fit.scale = p.scale;
  fit.nuisance_laws = std::move(laws);
  fit.xs = p.problem.xs;
  fit.chol_l = prof.l;
  fit.alpha = prof.alpha;
  fit.linv_f = prof.linv_f;
  fit.gls_inverse = prof.gls_inverse;
  if (!fit.nuisance_laws.empty() && fit.nuisance_laws.size() + 1 != fit.dim()) {
    throw ArgumentError("kriging: nuisance law count does not match the design");
  }
  fit.q2 = kriging_q2(fit);
  return fit;
}

// Mean and variance for points whose correlation with the design is known.
void predict_from_correlation(const KrigingFit& fit, const Eigen::MatrixXd& corr,
                              const Eigen::VectorXd& a, Eigen::VectorXd& mean, Eigen::VectorXd& variance) {
  const auto m = corr.rows();
  mean = (fit.beta0 + fit.beta1 * a.array()).matrix() + corr * fit.alpha;
  const Eigen::MatrixXd v = fit.chol_l.triangularView<Eigen::Lower>().solve(corr.transpose());
  Eigen::MatrixXd u(2, m);
  u.row(0).setOnes();
  u.row(1) = a.transpose();
  u -= fit.linv_f.transpose() * v;
  const Eigen::MatrixXd gu = fit.gls_inverse * u;
  variance.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double s = 1.0 - v.col(i).squaredNorm() + u.col(i).dot(gu.col(i));
    variance(i) = std::max(fit.sigma2 * s, 0.0);
  }
}

Eigen::MatrixXd standardize(const KrigingFit& fit, const Eigen::MatrixXd& points) {
  return (points.rowwise() - fit.center).array().rowwise() / fit.scale.array();
}

}  // namespace

std::vector<PredictiveDistribution> KrigingFit::predict(const Eigen::MatrixXd& points) const {
  if (static_cast<std::size_t>(points.cols()) != dim()) {
    throw ArgumentError("kriging_predict: points have " + std::to_string(points.cols()) + " columns, expected " +
                        std::to_string(dim()));
  }
  const Eigen::MatrixXd corr = cross_correlation(scaled(standardize(*this, points), theta), scaled(xs, theta));
  Eigen::VectorXd mean, variance;
  predict_from_correlation(*this, corr, points.col(0), mean, variance);
  std::vector<PredictiveDistribution> out(static_cast<std::size_t>(points.rows()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {mean(static_cast<Eigen::Index>(i)), variance(static_cast<Eigen::Index>(i))};
  }
  return out;
}

PredictiveDistribution KrigingFit::predict(std::span<const double> point) const {
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(point.size()));
  for (std::size_t k = 0; k < point.size(); ++k) row(0, static_cast<Eigen::Index>(k)) = point[k];
  return predict(row).front();
}

double kriging_log_likelihood(const Eigen::MatrixXd& x, std::span<const double> y,
                              std::span<const double> theta, double nugget) {
  const auto p = prepare(x, y, nugget > 0.0);
  if (theta.size() != static_cast<std::size_t>(x.cols())) throw ArgumentError("kriging: theta dimension mismatch");
  return profile(p.problem, theta, nugget).log_likelihood;
}

KrigingFit fit_kriging_fixed(const Eigen::MatrixXd& x, std::span<const double> y,
                             std::span<const double> theta, double nugget,
                             std::vector<FeatureLaw> nuisance_laws) {
  const auto p = prepare(x, y, nugget > 0.0);
  if (theta.size() != static_cast<std::size_t>(x.cols())) throw ArgumentError("kriging: theta dimension mismatch");
  const auto prof = profile(p.problem, theta, nugget);
  if (!prof.ok) throw ConditioningError("kriging: covariance not positive definite after jitter up to 1e-6");
  return assemble(x, p, prof, {theta.begin(), theta.end()}, nugget, std::move(nuisance_laws));
}

KrigingFit fit_kriging(const Eigen::MatrixXd& x, std::span<const double> y, const KrigingOptions& options,
                       std::vector<FeatureLaw> nuisance_laws) {
  if (options.n_starts < 1) throw ArgumentError("kriging: at least one start is required");
  if (!(options.theta_lo > 0.0 && options.theta_lo < options.theta_hi)) {
    throw ArgumentError("kriging: invalid theta bounds");
  }
  const auto p = prepare(x, y, options.estimate_nugget);
  const std::size_t d = static_cast<std::size_t>(x.cols());
  const std::size_t np = d + (options.estimate_nugget ? 1 : 0);
  std::vector<double> lo(np, std::log(options.theta_lo)), hi(np, std::log(options.theta_hi));
  if (options.estimate_nugget) {
    lo[d] = std::log(1e-8);
    hi[d] = 0.0;
  }
  auto unpack = [&](const std::vector<double>& v, std::vector<double>& theta, double& nugget) {
    theta.resize(d);
    for (std::size_t k = 0; k < d; ++k) theta[k] = std::exp(v[k]);
    nugget = options.estimate_nugget ? std::exp(v[d]) : 0.0;
  };
  auto objective = [&](const std::vector<double>& v) {
    std::vector<double> theta;
    double nugget;
    unpack(v, theta, nugget);
    return -profile(p.problem, theta, nugget).log_likelihood;
  };
  const std::size_t max_eval = options.max_evaluations > 0 ? options.max_evaluations : 400 * (np + 1);
  if (np > kMaxSobolDimension) throw UnsupportedDimensionError("kriging: too many hyperparameters for the start design");
  const auto starts = sobol_sequence(np, options.n_starts);
  std::vector<NelderMeadResult> results(options.n_starts);
  parallel_for(options.n_starts, [&](std::size_t s) {
    std::vector<double> x0(np);
    for (std::size_t k = 0; k < np; ++k) x0[k] = lo[k] + starts.at(s, k) * (hi[k] - lo[k]);
    results[s] = nelder_mead(objective, x0, lo, hi, max_eval);
  });
  std::size_t converged = 0;
  const NelderMeadResult* best = nullptr;
  const NelderMeadResult* best_any = nullptr;
  for (const auto& r : results) {
    if (!best_any || r.f < best_any->f) best_any = &r;
    if (!r.converged) continue;
    ++converged;
    if (!best || r.f < best->f) best = &r;
  }
  if (!best) {
    throw FitError("kriging: no start converged; best negative log-likelihood " + std::to_string(best_any->f));
  }
  std::vector<double> theta;
  double nugget;
  unpack(best->x, theta, nugget);
  const auto prof = profile(p.problem, theta, nugget);
  if (!prof.ok) throw ConditioningError("kriging: covariance not positive definite after jitter up to 1e-6");
  auto fit = assemble(x, p, prof, std::move(theta), nugget, std::move(nuisance_laws));
  fit.converged_starts = converged;
  return fit;
}

Eigen::VectorXd kriging_loo_residuals(const KrigingFit& fit) {
  const auto n = static_cast<Eigen::Index>(fit.n());
  const auto lower = fit.chol_l.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd linv = lower.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd kinv = linv.transpose() * linv;
  const Eigen::MatrixXd kinv_f = linv.transpose() * fit.linv_f;
  const Eigen::MatrixXd q = kinv - kinv_f * fit.gls_inverse * kinv_f.transpose();
  const Eigen::VectorXd qy = q * fit.y;
  return qy.array() / q.diagonal().array();
}

double kriging_q2(const KrigingFit& fit) {
  const Eigen::VectorXd e = kriging_loo_residuals(fit);
  const double tss = (fit.y.array() - fit.y.mean()).square().sum();
  const double press = e.squaredNorm();
  if (!(tss > 0.0)) return press == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  return 1.0 - press / tss;
}

double kriging_q2(const Eigen::MatrixXd& x, std::span<const double> y, const KrigingOptions& options) {
  return fit_kriging(x, y, options).q2;
}

Eigen::MatrixXd conditional_simulation(const KrigingFit& fit, const Eigen::MatrixXd& points,
                                       std::size_t n_paths, Rng& rng) {
  if (static_cast<std::size_t>(points.cols()) != fit.dim()) throw ArgumentError("conditional_simulation: dimension mismatch");
  const auto m = points.rows();
  const Eigen::MatrixXd ps = scaled(standardize(fit, points), fit.theta);
  const Eigen::MatrixXd corr = cross_correlation(ps, scaled(fit.xs, fit.theta));
  Eigen::VectorXd mean, variance;
  predict_from_correlation(fit, corr, points.col(0), mean, variance);
  const Eigen::MatrixXd v = fit.chol_l.triangularView<Eigen::Lower>().solve(corr.transpose());
  Eigen::MatrixXd u(2, m);
  u.row(0).setOnes();
  u.row(1) = points.col(0).transpose();
  u -= fit.linv_f.transpose() * v;
  Eigen::MatrixXd cov = self_correlation(ps) - v.transpose() * v + u.transpose() * fit.gls_inverse * u;
  cov *= fit.sigma2;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const Eigen::VectorXd sqrt_d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd l = ldlt.matrixL();
  Eigen::MatrixXd z(m, static_cast<Eigen::Index>(n_paths));
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < m; ++i) z(i, j) = normal_quantile(uniform_open(rng));
  }
  Eigen::MatrixXd paths = l * (sqrt_d.asDiagonal() * z);
  paths = ldlt.transpositionsP().transpose() * paths;
  paths.colwise() += mean;
  return paths;
}

namespace {

struct PodSample {
  Eigen::MatrixXd x;        // nuisance draws, n_mc x (d - 1)
  Eigen::MatrixXd nuisance_r2;  // squared scaled distance over nuisance columns, n_mc x N
};

PodSample draw_pod_sample(const KrigingFit& fit, std::size_t n_mc, std::uint64_t seed) {
  if (n_mc < 1000) throw ArgumentError("kriging POD: n_mc must be >= 1000");
  if (fit.nuisance_laws.size() + 1 != fit.dim()) {
    throw ArgumentError("kriging POD: the fit carries no laws for its nuisance features");
  }
  Rng rng = make_rng(seed, 0);
  PodSample s;
  s.x = sample_nuisance(fit.nuisance_laws, n_mc, rng);
  const auto n = static_cast<Eigen::Index>(fit.n());
  s.nuisance_r2 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_mc), n);
  for (Eigen::Index k = 1; k < static_cast<Eigen::Index>(fit.dim()); ++k) {
    const double th = fit.theta[static_cast<std::size_t>(k)];
    const Eigen::VectorXd col = ((s.x.col(k - 1).array() - fit.center(k)) / fit.scale(k) / th).matrix();
    const Eigen::VectorXd train = fit.xs.col(k) / th;
    for (Eigen::Index j = 0; j < n; ++j) {
      s.nuisance_r2.col(j).array() += (col.array() - train(j)).square();
    }
  }
  return s;
}

void predict_on_slice(const KrigingFit& fit, const PodSample& s, double a, Eigen::Index rows,
                      Eigen::VectorXd& mean, Eigen::VectorXd& variance) {
  const double as = (a - fit.center(0)) / fit.scale(0) / fit.theta[0];
  const Eigen::ArrayXd a_train = fit.xs.col(0).array() / fit.theta[0];
  Eigen::MatrixXd corr = s.nuisance_r2.topRows(rows);
  for (Eigen::Index j = 0; j < corr.cols(); ++j) corr.col(j).array() += (as - a_train(j)) * (as - a_train(j));
  corr = corr.unaryExpr([](double v) { return matern52(std::sqrt(v)); });
  predict_from_correlation(fit, corr, Eigen::VectorXd::Constant(rows, a), mean, variance);
}

}  // namespace

PodCurve kriging_pod(const KrigingFit& fit, double s, std::span<const double> grid,
                     const KrigingPodOptions& options) {
  const auto sample = draw_pod_sample(fit, options.n_mc, options.seed);
  PodCurve c;
  c.grid.assign(grid.begin(), grid.end());
  c.threshold = s;
  c.pod.resize(grid.size());
  c.mc_stderr.resize(grid.size());
  const auto rows = static_cast<Eigen::Index>(options.n_mc);
  parallel_for(grid.size(), [&](std::size_t j) {
    Eigen::VectorXd mean, variance;
    predict_on_slice(fit, sample, grid[j], rows, mean, variance);
    Eigen::ArrayXd p(rows);
    for (Eigen::Index i = 0; i < rows; ++i) p(i) = gaussian_exceedance(mean(i), std::sqrt(variance(i)), s);
    const double m = p.mean();
    const double var = (p - m).square().sum() / static_cast<double>(rows - 1);
    c.pod[j] = m;
    c.mc_stderr[j] = std::sqrt(var / static_cast<double>(rows));
  });
  c.validate();
  return c;
}

KrigingBand kriging_pod_band(const KrigingFit& fit, double s, std::span<const double> grid,
                             const KrigingBandOptions& options) {
  if (options.n_paths < 50) throw ArgumentError("kriging_pod_band: n_paths must be >= 50");
  if (!(options.level > 0.0 && options.level < 1.0)) throw ArgumentError("confidence level must be in (0,1)");
  if (options.band_points < 2 || options.band_points > options.n_mc) {
    throw ArgumentError("kriging_pod_band: band_points must be in [2, n_mc]");
  }
  const auto curve = kriging_pod(fit, s, grid, {options.n_mc, options.seed});
  const auto g = grid.size();
  KrigingBand band;

  band.mc.curve = curve;
  band.mc.level = options.level;
  band.mc.sources = {"mc"};
  band.mc.lower.resize(g);
  band.mc.upper.resize(g);
  band.mc.lower_one_sided.resize(g);
  const double z2 = normal_quantile(1.0 - 0.5 * (1.0 - options.level));
  const double z1 = normal_quantile(options.level);
  for (std::size_t j = 0; j < g; ++j) {
    const double p = curve.pod[j], se = curve.mc_stderr[j];
    band.mc.lower[j] = std::clamp(p - z2 * se, 0.0, 1.0);
    band.mc.upper[j] = std::clamp(p + z2 * se, 0.0, 1.0);
    band.mc.lower_one_sided[j] = std::clamp(p - z1 * se, 0.0, 1.0);
  }

  // Joint simulations at the first band_points nuisance draws (same stream as
  // the curve), one independent set per grid point.
  const auto sample = draw_pod_sample(fit, options.n_mc, options.seed);
  const Eigen::MatrixXd xb = sample.x.topRows(static_cast<Eigen::Index>(options.band_points));
  const auto paths = static_cast<Eigen::Index>(options.n_paths);
  Eigen::MatrixXd gp(paths, static_cast<Eigen::Index>(g)), total(paths, static_cast<Eigen::Index>(g));
  parallel_for(g, [&](std::size_t j) {
    Rng rng = make_rng(options.seed, 1 + j);
    Eigen::MatrixXd pts(xb.rows(), static_cast<Eigen::Index>(fit.dim()));
    pts.col(0).setConstant(grid[j]);
    pts.rightCols(xb.cols()) = xb;
    const Eigen::MatrixXd y = conditional_simulation(fit, pts, options.n_paths, rng);
    Eigen::VectorXd path_pod(paths);
    for (Eigen::Index k = 0; k < paths; ++k) {
      path_pod(k) = (y.col(k).array() > s).cast<double>().mean();
    }
    const double centre = path_pod.mean();
    for (Eigen::Index k = 0; k < paths; ++k) {
      const double dev = path_pod(k) - centre;
      const double noise = curve.mc_stderr[j] * normal_quantile(uniform_open(rng));
      gp(k, static_cast<Eigen::Index>(j)) = curve.pod[j] + dev;
      total(k, static_cast<Eigen::Index>(j)) = curve.pod[j] + dev + noise;
    }
  });
  band.gp = band_from_samples(curve, gp, options.level, {"gp"});
  band.total = band_from_samples(curve, total, options.level, {"mc", "gp"});
  return band;
}

KrigingConditionalPod::KrigingConditionalPod(KrigingFit fit, double threshold,
                                             std::vector<std::string> nuisance_names)
    : fit_(std::move(fit)), threshold_(threshold), names_(std::move(nuisance_names)) {
  if (fit_.nuisance_laws.size() + 1 != fit_.dim()) {
    throw ArgumentError("KrigingConditionalPod: the fit carries no laws for its nuisance features");
  }
  if (names_.size() != fit_.nuisance_laws.size()) throw ArgumentError("KrigingConditionalPod: name count mismatch");
}

Eigen::MatrixXd KrigingConditionalPod::pod_x(const Eigen::MatrixXd& x, std::span<const double> grid) const {
  if (static_cast<std::size_t>(x.cols()) + 1 != fit_.dim()) throw ArgumentError("pod_x: nuisance dimension mismatch");
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(grid.size()));
  parallel_for(grid.size(), [&](std::size_t j) {
    Eigen::MatrixXd pts(x.rows(), static_cast<Eigen::Index>(fit_.dim()));
    pts.col(0).setConstant(grid[j]);
    pts.rightCols(x.cols()) = x;
    const auto pred = fit_.predict(pts);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto& p = pred[static_cast<std::size_t>(i)];
      out(i, static_cast<Eigen::Index>(j)) = gaussian_exceedance(p.mean, std::sqrt(p.variance), threshold_);
    }
  });
  return out;
}

}  // namespace mapod
