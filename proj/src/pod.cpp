#include "mapod/pod.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mapod/error.hpp"
#include "mapod/stats.hpp"

namespace mapod {

void PodCurve::validate() const {
  if (grid.size() != pod.size()) throw ArgumentError("POD curve: grid and values differ in length");
  if (!mc_stderr.empty() && mc_stderr.size() != grid.size()) {
    throw ArgumentError("POD curve: stderr length mismatch");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ArgumentError("POD curve: grid must be strictly increasing");
  }
  for (double v : pod) {
    if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("POD curve: value outside [0,1]");
  }
}

void PodBand::validate() const {
  curve.validate();
  const auto n = curve.grid.size();
  if (lower.size() != n || upper.size() != n || lower_one_sided.size() != n) {
    throw ArgumentError("POD band: envelope length mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lower[i] <= curve.pod[i] && curve.pod[i] <= upper[i])) {
      throw ArgumentError("POD band: envelope does not contain the estimate");
    }
    if (!(lower[i] >= 0.0 && upper[i] <= 1.0)) throw ArgumentError("POD band: outside [0,1]");
  }
}

std::vector<double> make_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(lo < hi)) throw ArgumentError("make_grid: need n >= 2 and lo < hi");
  std::vector<double> g(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
  g.back() = hi;
  return g;
}

double a_at_level(std::span<const double> grid, std::span<const double> pod, double p) {
  if (grid.size() != pod.size() || grid.empty()) throw ArgumentError("a_at_level: bad curve");
  for (std::size_t k = 0; k < pod.size(); ++k) {
    if (pod[k] >= p) {
      if (k == 0) return grid[0];
      const double t = (p - pod[k - 1]) / (pod[k] - pod[k - 1]);
      return grid[k - 1] + t * (grid[k] - grid[k - 1]);
    }
  }
  const double max_pod = *std::max_element(pod.begin(), pod.end());
  std::ostringstream msg;
  msg << "POD level " << p << " not attained on the grid (max POD " << max_pod << ")";
  throw NotAttainedError(msg.str(), max_pod);
}

double a_at_level(const PodCurve& curve, double p) { return a_at_level(curve.grid, curve.pod, p); }

double a_at_level_with_confidence(const PodBand& band, double p) {
  return a_at_level(band.curve.grid, band.lower_one_sided, p);
}

bool is_nondecreasing(std::span<const double> pod, double tolerance) {
  for (std::size_t i = 1; i < pod.size(); ++i) {
    if (pod[i] < pod[i - 1] - tolerance) return false;
  }
  return true;
}

DetectabilitySummary summarize(const std::string& method, const PodCurve& curve,
                               const PodBand& band, double p) {
  DetectabilitySummary s;
  s.method = method;
  s.a90 = a_at_level(curve, p);
  s.a90_95 = a_at_level_with_confidence(band, p);
  if (!is_nondecreasing(curve.pod, 1e-9)) {
    s.warnings.push_back("POD estimate is not monotone; first up-crossing used");
  }
  if (!is_nondecreasing(band.lower_one_sided, 1e-9)) {
    s.warnings.push_back("lower POD curve is not monotone; first up-crossing used");
  }
  return s;
}

PodBand band_from_samples(const PodCurve& curve, const Eigen::MatrixXd& samples, double level,
                          std::vector<std::string> sources) {
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("confidence level must be in (0,1)");
  const auto g = curve.grid.size();
  if (static_cast<std::size_t>(samples.cols()) != g || samples.rows() < 2) {
    throw ArgumentError("band_from_samples: sample matrix shape mismatch");
  }
  PodBand band;
  band.curve = curve;
  band.level = level;
  band.sources = std::move(sources);
  band.lower.resize(g);
  band.upper.resize(g);
  band.lower_one_sided.resize(g);
  const double tail = 1.0 - level;
  std::vector<double> column(static_cast<std::size_t>(samples.rows()));
  for (std::size_t j = 0; j < g; ++j) {
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      column[static_cast<std::size_t>(i)] = samples(i, static_cast<Eigen::Index>(j));
    }
    const double est = curve.pod[j];
    band.lower[j] = std::clamp(std::min(empirical_quantile_inplace(column, 0.5 * tail), est), 0.0, 1.0);
    band.upper[j] = std::clamp(std::max(empirical_quantile_inplace(column, 1.0 - 0.5 * tail), est), 0.0, 1.0);
    band.lower_one_sided[j] = std::clamp(std::min(empirical_quantile_inplace(column, tail), est), 0.0, 1.0);
  }
  return band;
}

PodCurve pod_x_curve(const ConditionalPodModel& model, std::span<const double> x,
                     std::span<const double> grid) {
  if (x.size() != model.nuisance_dim()) throw ArgumentError("pod_x_curve: nuisance dimension mismatch");
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k) row(0, static_cast<Eigen::Index>(k)) = x[k];
  const Eigen::MatrixXd vals = model.pod_x(row, grid);
  PodCurve c;
  c.grid.assign(grid.begin(), grid.end());
  c.pod.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) c.pod[j] = vals(0, static_cast<Eigen::Index>(j));
  return c;
}

Eigen::MatrixXd sample_nuisance(const std::vector<FeatureLaw>& laws, std::size_t n, Rng& rng) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(laws.size()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < laws.size(); ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          feature_inverse_cdf(laws[k], uniform_open(rng));
    }
  }
  return x;
}

}  // namespace mapod
