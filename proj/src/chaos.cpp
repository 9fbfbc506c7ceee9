#include "mapod/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "mapod/error.hpp"
#include "mapod/parallel.hpp"
#include "mapod/stats.hpp"

namespace mapod {

double legendre_normalized(unsigned degree, double t) {
  double p0 = 1.0, p1 = t;
  if (degree == 0) return 1.0;
  for (unsigned n = 1; n < degree; ++n) {
    const double p2 = ((2.0 * n + 1.0) * t * p1 - n * p0) / (n + 1.0);
    p0 = p1;
    p1 = p2;
  }
  return p1 * std::sqrt(2.0 * degree + 1.0);
}

double hermite_normalized(unsigned degree, double z) {
  double h0 = 1.0, h1 = z;
  if (degree == 0) return 1.0;
  double factorial = 1.0;
  for (unsigned n = 1; n < degree; ++n) {
    const double h2 = z * h1 - n * h0;
    h0 = h1;
    h1 = h2;
    factorial *= (n + 1.0);
  }
  return h1 / std::sqrt(factorial);
}

namespace {

// Values of the normalized univariate family of `law` at x, degrees 0..p.
void univariate_values(const FeatureLaw& law, double x, unsigned p, double* out) {
  if (const auto* g = std::get_if<Gaussian>(&law)) {
    const double z = (x - g->mean) / g->sd;
    double h0 = 1.0, h1 = z, fact = 1.0;
    out[0] = 1.0;
    if (p >= 1) out[1] = z;
    for (unsigned n = 1; n < p; ++n) {
      const double h2 = z * h1 - n * h0;
      h0 = h1;
      h1 = h2;
      fact *= (n + 1.0);
      out[n + 1] = h2 / std::sqrt(fact);
    }
  } else {
    const auto& u = std::get<Uniform>(law);
    const double t = 2.0 * (x - u.lo) / (u.hi - u.lo) - 1.0;
    double p0 = 1.0, p1 = t;
    out[0] = 1.0;
    if (p >= 1) out[1] = t * std::sqrt(3.0);
    for (unsigned n = 1; n < p; ++n) {
      const double p2 = ((2.0 * n + 1.0) * t * p1 - n * p0) / (n + 1.0);
      p0 = p1;
      p1 = p2;
      out[n + 1] = p2 * std::sqrt(2.0 * (n + 1) + 1.0);
    }
  }
}

void enumerate_terms(std::size_t dim, unsigned total, std::vector<unsigned>& current,
                     std::size_t pos, std::vector<std::vector<unsigned>>& out) {
  if (pos + 1 == dim) {
    current[pos] = total;
    out.push_back(current);
    return;
  }
  for (unsigned k = total + 1; k-- > 0;) {
    current[pos] = k;
    enumerate_terms(dim, total - k, current, pos + 1, out);
  }
}

}  // namespace

void OrthonormalBasis::evaluate(std::span<const double> x, std::span<double> out) const {
  if (x.size() != dim() || out.size() != size()) throw ArgumentError("basis: dimension mismatch");
  std::vector<double> uni((degree + 1) * dim());
  for (std::size_t k = 0; k < dim(); ++k) univariate_values(laws[k], x[k], degree, &uni[k * (degree + 1)]);
  for (std::size_t j = 0; j < size(); ++j) {
    double v = 1.0;
    for (std::size_t k = 0; k < dim(); ++k) {
      if (terms[j][k] != 0) v *= uni[k * (degree + 1) + terms[j][k]];
    }
    out[j] = v;
  }
}

double OrthonormalBasis::evaluate_term(std::size_t term, std::span<const double> x) const {
  std::vector<double> all(size());
  evaluate(x, all);
  return all.at(term);
}

Eigen::MatrixXd OrthonormalBasis::design_matrix(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != dim()) throw ArgumentError("basis: design dimension mismatch");
  Eigen::MatrixXd psi(X.rows(), static_cast<Eigen::Index>(size()));
  std::vector<double> row(dim()), vals(size());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (std::size_t k = 0; k < dim(); ++k) row[k] = X(i, static_cast<Eigen::Index>(k));
    evaluate(row, vals);
    for (std::size_t j = 0; j < size(); ++j) psi(i, static_cast<Eigen::Index>(j)) = vals[j];
  }
  return psi;
}

OrthonormalBasis build_orthonormal_basis(std::vector<FeatureLaw> laws, unsigned degree) {
  if (laws.empty()) throw SpecError("basis needs at least one input");
  for (const auto& law : laws) {
    if (const auto* g = std::get_if<Gaussian>(&law)) {
      if (!(g->sd > 0.0)) throw SpecError("basis: Gaussian sd must be positive");
    } else {
      const auto& u = std::get<Uniform>(law);
      if (!(u.lo < u.hi)) throw SpecError("basis: Uniform needs lo < hi");
    }
  }
  OrthonormalBasis b;
  b.laws = std::move(laws);
  b.degree = degree;
  std::vector<unsigned> current(b.laws.size(), 0);
  for (unsigned total = 0; total <= degree; ++total) enumerate_terms(b.laws.size(), total, current, 0, b.terms);
  return b;
}

OrthonormalBasis build_orthonormal_basis(const InputSet& inputs, unsigned degree) {
  std::vector<FeatureLaw> laws;
  for (const auto& s : inputs.specs()) {
    if (const auto* g = std::get_if<Gaussian>(&s.family)) {
      laws.emplace_back(*g);
    } else if (const auto* u = std::get_if<Uniform>(&s.family)) {
      laws.emplace_back(*u);
    } else {
      laws.emplace_back(Uniform{0.0, 1.0});
    }
  }
  return build_orthonormal_basis(std::move(laws), degree);
}

double ChaosFit::predict(std::span<const double> x) const {
  std::vector<double> vals(basis.size());
  basis.evaluate(x, vals);
  double s = 0.0;
  for (std::size_t j = 0; j < vals.size(); ++j) s += coefficients(static_cast<Eigen::Index>(j)) * vals[j];
  return s;
}

double ChaosFit::surrogate_variance() const {
  return coefficients.size() > 1 ? coefficients.tail(coefficients.size() - 1).squaredNorm() : 0.0;
}

namespace {

struct LeastSquares {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  Eigen::VectorXd leverage;
  Eigen::MatrixXd information_inverse;
};

LeastSquares solve_least_squares(const Eigen::MatrixXd& psi, const Eigen::VectorXd& y) {
  const auto n = psi.rows();
  const auto p = psi.cols();
  if (n <= p) {
    throw UnderdeterminedError("least squares: N = " + std::to_string(n) +
                               " does not exceed the basis size " + std::to_string(p));
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(psi);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw SingularDesignError("least squares: design is rank deficient in the basis");
  LeastSquares ls;
  ls.coefficients = qr.solve(y);
  ls.residuals = y - psi * ls.coefficients;
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  ls.leverage = q.rowwise().squaredNorm();
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rinv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd inner = rinv * rinv.transpose();
  ls.information_inverse = qr.colsPermutation() * inner * qr.colsPermutation().transpose();
  return ls;
}

double q2_from(const LeastSquares& ls, const Eigen::VectorXd& y) {
  const double ybar = y.mean();
  const double tss = (y.array() - ybar).square().sum();
  double press = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double h = ls.leverage(i);
    if (h > 1.0 - 1e-10) throw LeverageError("leave-one-out: observation " + std::to_string(i + 1) + " has leverage 1");
    const double e = ls.residuals(i) / (1.0 - h);
    press += e * e;
  }
  if (!(tss > 0.0)) return press == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  return 1.0 - press / tss;
}

Eigen::VectorXd to_vector(std::span<const double> y) {
  return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
}

}  // namespace

ChaosFit fit_chaos_basis(const Eigen::MatrixXd& X, std::span<const double> y,
                         const OrthonormalBasis& basis) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw ArgumentError("fit_chaos: length mismatch");
  const Eigen::VectorXd yv = to_vector(y);
  const auto ls = solve_least_squares(basis.design_matrix(X), yv);
  ChaosFit fit;
  fit.basis = basis;
  fit.coefficients = ls.coefficients;
  fit.n = y.size();
  const double dof = static_cast<double>(fit.n - basis.size());
  fit.sigma_eps = std::sqrt(ls.residuals.squaredNorm() / dof);
  fit.information_matrix_inverse = ls.information_inverse;
  fit.q2 = q2_from(ls, yv);
  fit.q2_by_degree.emplace_back(basis.degree, fit.q2);
  return fit;
}

double loo_q2(const Eigen::MatrixXd& X, std::span<const double> y, const OrthonormalBasis& basis) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw ArgumentError("loo_q2: length mismatch");
  const Eigen::VectorXd yv = to_vector(y);
  return q2_from(solve_least_squares(basis.design_matrix(X), yv), yv);
}

ChaosFit fit_chaos(const Eigen::MatrixXd& X, std::span<const double> y, std::vector<FeatureLaw> laws,
                   std::vector<unsigned> candidate_degrees) {
  if (candidate_degrees.empty()) throw ArgumentError("fit_chaos: no candidate degree");
  std::sort(candidate_degrees.begin(), candidate_degrees.end());
  candidate_degrees.erase(std::unique(candidate_degrees.begin(), candidate_degrees.end()),
                          candidate_degrees.end());
  std::vector<OrthonormalBasis> bases;
  for (unsigned d : candidate_degrees) {
    bases.push_back(build_orthonormal_basis(laws, d));
    if (static_cast<std::size_t>(X.rows()) <= bases.back().size()) {
      throw UnderdeterminedError("fit_chaos: degree " + std::to_string(d) + " needs more than " +
                                 std::to_string(bases.back().size()) + " runs, got " +
                                 std::to_string(X.rows()));
    }
  }
  std::optional<ChaosFit> best;
  std::vector<std::pair<unsigned, double>> scores;
  std::exception_ptr last_error;
  for (const auto& b : bases) {
    try {
      ChaosFit f = fit_chaos_basis(X, y, b);
      scores.emplace_back(b.degree, f.q2);
      // Lower degree wins unless a higher one is better by more than rounding.
      if (!best || f.q2 > best->q2 + 1e-9) best = std::move(f);
    } catch (const LeverageError&) {
      scores.emplace_back(b.degree, std::numeric_limits<double>::quiet_NaN());
      last_error = std::current_exception();
    } catch (const SingularDesignError&) {
      scores.emplace_back(b.degree, std::numeric_limits<double>::quiet_NaN());
      last_error = std::current_exception();
    }
  }
  if (!best) std::rethrow_exception(last_error);
  best->q2_by_degree = std::move(scores);
  return *best;
}

namespace {

// Basis factors that do not depend on the defect size (feature 0).
Eigen::MatrixXd nuisance_factors(const OrthonormalBasis& basis, const Eigen::MatrixXd& x) {
  const std::size_t p = basis.degree;
  const std::size_t d = basis.dim();
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(basis.size()));
  std::vector<double> uni((p + 1) * d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 1; k < d; ++k) {
      univariate_values(basis.laws[k], x(i, static_cast<Eigen::Index>(k - 1)), static_cast<unsigned>(p),
                        &uni[k * (p + 1)]);
    }
    for (std::size_t j = 0; j < basis.size(); ++j) {
      double v = 1.0;
      for (std::size_t k = 1; k < d; ++k) {
        if (basis.terms[j][k] != 0) v *= uni[k * (p + 1) + basis.terms[j][k]];
      }
      out(i, static_cast<Eigen::Index>(j)) = v;
    }
  }
  return out;
}

Eigen::VectorXd defect_factors(const OrthonormalBasis& basis, double a) {
  std::vector<double> uni(basis.degree + 1);
  univariate_values(basis.laws[0], a, basis.degree, uni.data());
  Eigen::VectorXd out(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) out(static_cast<Eigen::Index>(j)) = uni[basis.terms[j][0]];
  return out;
}

struct ChaosMonteCarlo {
  Eigen::MatrixXd factors;  // n_mc x P
  Eigen::VectorXd z;        // standard normal noise draws
};

ChaosMonteCarlo draw_chaos_mc(const ChaosFit& fit, std::size_t n_mc, std::uint64_t seed) {
  if (n_mc < 1000) throw ArgumentError("chaos POD: n_mc must be >= 1000");
  if (fit.basis.dim() < 1) throw ArgumentError("chaos POD: basis has no defect-size feature");
  Rng rng = make_rng(seed, 0);
  std::vector<FeatureLaw> nuisance(fit.basis.laws.begin() + 1, fit.basis.laws.end());
  const Eigen::MatrixXd x = sample_nuisance(nuisance, n_mc, rng);
  ChaosMonteCarlo mc;
  mc.factors = nuisance_factors(fit.basis, x);
  mc.z.resize(static_cast<Eigen::Index>(n_mc));
  for (std::size_t i = 0; i < n_mc; ++i) mc.z(static_cast<Eigen::Index>(i)) = normal_quantile(uniform_open(rng));
  return mc;
}

std::vector<double> exceedance_curve(const ChaosMonteCarlo& mc, const OrthonormalBasis& basis,
                                     const Eigen::VectorXd& coef, double sigma, double s,
                                     std::span<const double> grid) {
  std::vector<double> pod(grid.size());
  const auto n = mc.z.size();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Eigen::VectorXd w = coef.cwiseProduct(defect_factors(basis, grid[j]));
    const Eigen::VectorXd yhat = mc.factors * w;
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < n; ++i) hits += (yhat(i) + sigma * mc.z(i) > s) ? 1 : 0;
    pod[j] = static_cast<double>(hits) / static_cast<double>(n);
  }
  return pod;
}

}  // namespace

PodCurve chaos_pod(const ChaosFit& fit, double s, std::span<const double> grid,
                   const ChaosPodOptions& options) {
  const auto mc = draw_chaos_mc(fit, options.n_mc, options.seed);
  PodCurve c;
  c.grid.assign(grid.begin(), grid.end());
  c.threshold = s;
  c.pod = exceedance_curve(mc, fit.basis, fit.coefficients, fit.sigma_eps, s, grid);
  c.mc_stderr.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    c.mc_stderr[j] = std::sqrt(c.pod[j] * (1.0 - c.pod[j]) / static_cast<double>(options.n_mc));
  }
  c.validate();
  return c;
}

PodBand chaos_pod_band(const ChaosFit& fit, double s, std::span<const double> grid,
                       const ChaosBandOptions& options) {
  if (options.n_sets < 50) throw ArgumentError("chaos_pod_band: n_sets must be >= 50");
  const auto mc = draw_chaos_mc(fit, options.n_mc, options.seed);
  PodCurve estimate;
  estimate.grid.assign(grid.begin(), grid.end());
  estimate.threshold = s;
  estimate.pod = exceedance_curve(mc, fit.basis, fit.coefficients, fit.sigma_eps, s, grid);
  estimate.mc_stderr.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    estimate.mc_stderr[j] = std::sqrt(estimate.pod[j] * (1.0 - estimate.pod[j]) / static_cast<double>(options.n_mc));
  }

  const auto p = static_cast<Eigen::Index>(fit.basis.size());
  const double dof = static_cast<double>(fit.n) - static_cast<double>(p);
  if (!(dof > 0.0)) throw UnderdeterminedError("chaos_pod_band: no residual degrees of freedom");
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(fit.information_matrix_inverse).matrixL();
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(options.n_sets), static_cast<Eigen::Index>(grid.size()));
  parallel_for(options.n_sets, [&](std::size_t k) {
    Rng rng = make_rng(options.seed, 1 + k);
    std::chi_squared_distribution<double> chi2(dof);
    const double sigma2 = fit.sigma_eps > 0.0 ? dof * fit.sigma_eps * fit.sigma_eps / chi2(rng) : 0.0;
    const double sd = std::sqrt(sigma2);
    Eigen::VectorXd z(p);
    for (Eigen::Index j = 0; j < p; ++j) z(j) = normal_quantile(uniform_open(rng));
    const Eigen::VectorXd coef = fit.coefficients + sd * (chol * z);
    const auto curve = exceedance_curve(mc, fit.basis, coef, sd, s, grid);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      samples(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = curve[j];
    }
  });
  return band_from_samples(estimate, samples, options.level, {"chaos-coefficients", "residual-variance"});
}

ChaosConditionalPod::ChaosConditionalPod(ChaosFit fit, double threshold,
                                         std::vector<std::string> nuisance_names)
    : fit_(std::move(fit)),
      threshold_(threshold),
      laws_(fit_.basis.laws.begin() + 1, fit_.basis.laws.end()),
      names_(std::move(nuisance_names)) {
  if (names_.size() != laws_.size()) throw ArgumentError("ChaosConditionalPod: name count mismatch");
}

Eigen::MatrixXd ChaosConditionalPod::pod_x(const Eigen::MatrixXd& x, std::span<const double> grid) const {
  if (static_cast<std::size_t>(x.cols()) != laws_.size()) throw ArgumentError("pod_x: nuisance dimension mismatch");
  const Eigen::MatrixXd factors = nuisance_factors(fit_.basis, x);
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Eigen::VectorXd w = fit_.coefficients.cwiseProduct(defect_factors(fit_.basis, grid[j]));
    const Eigen::VectorXd yhat = factors * w;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out(i, static_cast<Eigen::Index>(j)) = gaussian_exceedance(yhat(i), fit_.sigma_eps, threshold_);
    }
  }
  return out;
}

}  // namespace mapod
