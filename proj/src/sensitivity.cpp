#include "mapod/sensitivity.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "mapod/error.hpp"
#include "mapod/stats.hpp"

namespace mapod {

const SobolIndex& SobolResult::at(const std::string& name) const {
  for (const auto& i : indices) {
    if (i.name == name) return i;
  }
  throw ArgumentError("no Sobol' index named '" + name + "'");
}

std::vector<double> curve_weights(std::span<const double> grid, CurveNorm norm) {
  const auto g = grid.size();
  if (g == 0) throw ArgumentError("curve_weights: empty grid");
  std::vector<double> w(g, 1.0);
  if (norm == CurveNorm::Trapezoid && g > 1) {
    for (std::size_t j = 0; j < g; ++j) {
      const double left = j > 0 ? grid[j] - grid[j - 1] : 0.0;
      const double right = j + 1 < g ? grid[j + 1] - grid[j] : 0.0;
      w[j] = 0.5 * (left + right);
    }
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= total;
  return w;
}

namespace {

constexpr double kDegenerate = 1e-12;

std::vector<InputGroup> resolve_groups(const SobolOptions& options, const std::vector<std::string>& names) {
  if (options.groups.empty()) {
    std::vector<InputGroup> g;
    for (std::size_t k = 0; k < names.size(); ++k) g.push_back({names[k], {k}});
    return g;
  }
  for (const auto& g : options.groups) {
    if (g.columns.empty()) throw ArgumentError("input group '" + g.name + "' is empty");
    for (auto c : g.columns) {
      if (c >= names.size()) throw ArgumentError("input group '" + g.name + "' references a missing column");
    }
  }
  return options.groups;
}

struct Design {
  Eigen::MatrixXd stacked;  // [A; B; C_1; ...; C_G]
  std::size_t n = 0;
  std::size_t groups = 0;
};

Design make_design(const std::vector<FeatureLaw>& laws, const std::vector<InputGroup>& groups,
                   const SobolOptions& options) {
  if (options.n_base < 256) throw ArgumentError("Sobol' indices: n_base must be >= 256");
  if (laws.empty()) throw ArgumentError("Sobol' indices: no inputs");
  const auto n = static_cast<Eigen::Index>(options.n_base);
  const auto d = static_cast<Eigen::Index>(laws.size());
  Rng rng = make_rng(options.seed, 0);
  Eigen::MatrixXd a(n, d), b(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) a(i, k) = feature_inverse_cdf(laws[static_cast<std::size_t>(k)], uniform_open(rng));
    for (Eigen::Index k = 0; k < d; ++k) b(i, k) = feature_inverse_cdf(laws[static_cast<std::size_t>(k)], uniform_open(rng));
  }
  Design des;
  des.n = options.n_base;
  des.groups = groups.size();
  des.stacked.resize(n * static_cast<Eigen::Index>(2 + groups.size()), d);
  des.stacked.topRows(n) = a;
  des.stacked.middleRows(n, n) = b;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Eigen::MatrixXd c = a;
    for (auto col : groups[g].columns) c.col(static_cast<Eigen::Index>(col)) = b.col(static_cast<Eigen::Index>(col));
    des.stacked.middleRows(n * static_cast<Eigen::Index>(2 + g), n) = c;
  }
  return des;
}

struct Estimates {
  std::vector<double> first;
  std::vector<double> total;
  double dispersion = 0.0;
};

// y holds (2 + G) blocks of n rows; columns are grid points with weights w.
Estimates estimate(const Eigen::MatrixXd& y, std::size_t n, std::size_t groups, const std::vector<double>& w,
                   std::span<const std::size_t> rows) {
  const auto g = static_cast<Eigen::Index>(w.size());
  const double m = static_cast<double>(rows.size());
  auto at = [&](std::size_t block, std::size_t i, Eigen::Index j) {
    return y(static_cast<Eigen::Index>(block * n + i), j);
  };
  Estimates e;
  for (Eigen::Index j = 0; j < g; ++j) {
    double sum = 0.0, sum2 = 0.0;
    for (auto i : rows) {
      const double ya = at(0, i, j), yb = at(1, i, j);
      sum += ya + yb;
      sum2 += ya * ya + yb * yb;
    }
    const double mu = sum / (2.0 * m);
    e.dispersion += w[static_cast<std::size_t>(j)] * (sum2 / (2.0 * m) - mu * mu) * (2.0 * m) / (2.0 * m - 1.0);
  }
  e.first.assign(groups, 0.0);
  e.total.assign(groups, 0.0);
  for (std::size_t k = 0; k < groups; ++k) {
    double num = 0.0, den = 0.0, tot = 0.0;
    for (Eigen::Index j = 0; j < g; ++j) {
      double sb = 0.0, sc = 0.0, sbc = 0.0, sq = 0.0, jansen = 0.0;
      for (auto i : rows) {
        const double yb = at(1, i, j), yc = at(2 + k, i, j), ya = at(0, i, j);
        sb += yb;
        sc += yc;
        sbc += yb * yc;
        sq += 0.5 * (yb * yb + yc * yc);
        jansen += (ya - yc) * (ya - yc);
      }
      const double mu = 0.5 * (sb + sc) / m;
      const double wj = w[static_cast<std::size_t>(j)];
      num += wj * (sbc / m - mu * mu);
      den += wj * (sq / m - mu * mu);
      tot += wj * 0.5 * jansen / m;
    }
    e.first[k] = den > 0.0 ? num / den : 0.0;
    e.total[k] = e.dispersion > 0.0 ? tot / e.dispersion : 0.0;
  }
  return e;
}

SobolResult run(const Eigen::MatrixXd& y, std::size_t n, const std::vector<InputGroup>& groups,
                const std::vector<double>& w, const SobolOptions& options, std::vector<std::size_t> rows,
                bool functional) {
  const auto e = estimate(y, n, groups.size(), w, rows);
  double scale = 0.0;
  {
    // Scale reference for the degeneracy test: mean square of the outputs.
    double s = 0.0;
    for (auto i : rows) {
      for (Eigen::Index j = 0; j < y.cols(); ++j) s += w[static_cast<std::size_t>(j)] * y(static_cast<Eigen::Index>(i), j) * y(static_cast<Eigen::Index>(i), j);
    }
    scale = std::max(1.0, s / static_cast<double>(rows.size()));
  }
  if (!(e.dispersion > kDegenerate * scale)) {
    if (functional) {
      throw DegenerateDispersionError("POD Sobol' indices: total dispersion D = " + std::to_string(e.dispersion) +
                                      " is degenerate");
    }
    throw DegenerateVarianceError("Sobol' indices: output variance " + std::to_string(e.dispersion) +
                                  " is degenerate");
  }
  SobolResult r;
  r.n_base = n;
  r.estimator = "janon-first/jansen-total";
  r.variance = e.dispersion;
  r.indices.resize(groups.size());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    r.indices[k].name = groups[k].name;
    r.indices[k].first_order = e.first[k];
    r.indices[k].total = e.total[k];
  }
  if (options.n_bootstrap > 1) {
    Rng rng = make_rng(options.seed, 1);
    std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
    std::vector<double> s1(groups.size(), 0.0), s2(groups.size(), 0.0), t1(groups.size(), 0.0), t2(groups.size(), 0.0);
    std::vector<std::size_t> resampled(rows.size());
    for (std::size_t b = 0; b < options.n_bootstrap; ++b) {
      for (auto& i : resampled) i = rows[pick(rng)];
      const auto eb = estimate(y, n, groups.size(), w, resampled);
      for (std::size_t k = 0; k < groups.size(); ++k) {
        s1[k] += eb.first[k];
        s2[k] += eb.first[k] * eb.first[k];
        t1[k] += eb.total[k];
        t2[k] += eb.total[k] * eb.total[k];
      }
    }
    const double nb = static_cast<double>(options.n_bootstrap);
    for (std::size_t k = 0; k < groups.size(); ++k) {
      r.indices[k].first_order_stderr = std::sqrt(std::max(0.0, (s2[k] - s1[k] * s1[k] / nb) / (nb - 1.0)));
      r.indices[k].total_stderr = std::sqrt(std::max(0.0, (t2[k] - t1[k] * t1[k] / nb) / (nb - 1.0)));
    }
  }
  return r;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

void check_names(const std::vector<FeatureLaw>& laws, const std::vector<std::string>& names) {
  if (laws.size() != names.size()) throw ArgumentError("Sobol' indices: law and name counts differ");
}

}  // namespace

SobolResult sobol_indices_scalar(const ScalarEvaluator& f, const std::vector<FeatureLaw>& laws,
                                 const std::vector<std::string>& names, const SobolOptions& options) {
  check_names(laws, names);
  const auto groups = resolve_groups(options, names);
  const auto des = make_design(laws, groups, options);
  const Eigen::VectorXd y = f(des.stacked);
  if (y.size() != des.stacked.rows()) throw ArgumentError("Sobol' evaluator returned the wrong number of values");
  return run(y, des.n, groups, {1.0}, options, all_rows(des.n), false);
}

SobolResult sobol_indices_curve(const CurveEvaluator& f, const std::vector<FeatureLaw>& laws,
                                const std::vector<std::string>& names, std::span<const double> grid,
                                const SobolOptions& options) {
  check_names(laws, names);
  const auto groups = resolve_groups(options, names);
  const auto des = make_design(laws, groups, options);
  const Eigen::MatrixXd y = f(des.stacked);
  if (y.rows() != des.stacked.rows() || static_cast<std::size_t>(y.cols()) != grid.size()) {
    throw ArgumentError("curve evaluator returned the wrong shape");
  }
  auto r = run(y, des.n, groups, curve_weights(grid, options.norm), options, all_rows(des.n), true);
  r.grid.assign(grid.begin(), grid.end());
  return r;
}

SobolResult pod_sobol_indices(const ConditionalPodModel& model, std::span<const double> grid,
                              const SobolOptions& options) {
  return sobol_indices_curve([&](const Eigen::MatrixXd& x) { return model.pod_x(x, grid); },
                             model.nuisance_laws(), model.nuisance_names(), grid, options);
}

SobolResult pod_value_sobol(const ConditionalPodModel& model, double a, const SobolOptions& options) {
  const double g[1] = {a};
  return sobol_indices_scalar(
      [&](const Eigen::MatrixXd& x) -> Eigen::VectorXd { return model.pod_x(x, g).col(0); },
      model.nuisance_laws(), model.nuisance_names(), options);
}

SobolResult inverse_pod_sobol(const ConditionalPodModel& model, std::span<const double> grid, double p,
                              const SobolOptions& options) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("inverse_pod_sobol: p must be in (0,1)");
  const auto& names = model.nuisance_names();
  const auto groups = resolve_groups(options, names);
  const auto des = make_design(model.nuisance_laws(), groups, options);
  const Eigen::MatrixXd curves = model.pod_x(des.stacked, grid);
  Eigen::VectorXd y(curves.rows());
  std::vector<double> row(grid.size());
  for (Eigen::Index i = 0; i < curves.rows(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j) row[j] = curves(i, static_cast<Eigen::Index>(j));
    try {
      y(i) = a_at_level(grid, row, p);
    } catch (const NotAttainedError&) {
      y(i) = std::numeric_limits<double>::quiet_NaN();
    }
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < des.n; ++i) {
    bool ok = true;
    for (std::size_t block = 0; block < 2 + des.groups && ok; ++block) {
      ok = std::isfinite(y(static_cast<Eigen::Index>(block * des.n + i)));
    }
    if (ok) kept.push_back(i);
  }
  const double rejected = 1.0 - static_cast<double>(kept.size()) / static_cast<double>(des.n);
  if (rejected > 0.2) {
    throw CoverageError("inverse POD indices: level " + std::to_string(p) + " not attained in " +
                        std::to_string(100.0 * rejected) + "% of the pick-freeze rows");
  }
  auto r = run(y, des.n, groups, {1.0}, options, kept, false);
  r.rejected_fraction = rejected;
  return r;
}

}  // namespace mapod
