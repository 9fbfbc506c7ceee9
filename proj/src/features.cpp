#include "mapod/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mapod/error.hpp"
#include "mapod/stats.hpp"

namespace mapod {

double feature_inverse_cdf(const FeatureLaw& law, double u) {
  if (const auto* g = std::get_if<Gaussian>(&law)) return g->mean + g->sd * normal_quantile(u);
  const auto& un = std::get<Uniform>(law);
  return un.lo + u * (un.hi - un.lo);
}

double feature_cdf(const FeatureLaw& law, double x) {
  if (const auto* g = std::get_if<Gaussian>(&law)) return normal_cdf((x - g->mean) / g->sd);
  const auto& un = std::get<Uniform>(law);
  return std::clamp((x - un.lo) / (un.hi - un.lo), 0.0, 1.0);
}

double feature_median(const FeatureLaw& law) {
  if (const auto* g = std::get_if<Gaussian>(&law)) return g->mean;
  const auto& un = std::get<Uniform>(law);
  return 0.5 * (un.lo + un.hi);
}

double feature_standard_score(const FeatureLaw& law, double x) {
  if (const auto* g = std::get_if<Gaussian>(&law)) return (x - g->mean) / g->sd;
  const auto& un = std::get<Uniform>(law);
  const double half = 0.5 * (un.hi - un.lo);
  return std::numbers::sqrt3 * (x - 0.5 * (un.lo + un.hi)) / half;
}

Uniform defect_size_range(const InputSet& inputs) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : inputs.specs()) {
    if (s.role != InputRole::DefectSize) continue;
    const auto* u = std::get_if<Uniform>(&s.family);
    if (!u) throw SpecError("defect-size input '" + s.name + "' must be Uniform");
    lo = std::min(lo, u->lo);
    hi = std::max(hi, u->hi);
  }
  if (!(lo < hi)) throw SpecError("no defect-size input declared");
  return {lo, hi};
}

FeatureMap::FeatureMap(const InputSet& inputs, Uniform defect_range) {
  if (!(defect_range.lo < defect_range.hi)) throw SpecError("empty defect-size range");
  names_.push_back("a");
  laws_.push_back(defect_range);
  for (const auto& s : inputs.specs()) {
    if (s.role == InputRole::DefectSize) continue;
    Source src{s.name, {}, {}};
    if (const auto* g = std::get_if<Gaussian>(&s.family)) {
      names_.push_back(s.name);
      laws_.push_back(*g);
    } else if (const auto* u = std::get_if<Uniform>(&s.family)) {
      names_.push_back(s.name);
      laws_.push_back(*u);
    } else {
      const auto& c = std::get<ConditionalUniform>(s.family);
      names_.push_back(s.name + "[u]");
      laws_.push_back(Uniform{0.0, 1.0});
      src.conditional_source = c.source;
      src.conditional = c;
    }
    sources_.push_back(std::move(src));
  }
}

FeatureMap::FeatureMap(std::vector<std::string> names, std::vector<FeatureLaw> laws)
    : names_(std::move(names)), laws_(std::move(laws)) {
  if (names_.size() != laws_.size() || laws_.empty()) {
    throw ArgumentError("feature names and laws must be non-empty and of equal length");
  }
  for (std::size_t k = 1; k < names_.size(); ++k) sources_.push_back({names_[k], {}, {}});
}

Eigen::MatrixXd FeatureMap::features(const SimulationDataset& ds,
                                     std::span<const double> a) const {
  if (a.size() != ds.rows()) throw ArgumentError("defect-size column length mismatch");
  Eigen::MatrixXd X(ds.rows(), dim());
  std::vector<std::size_t> cols;
  std::vector<std::optional<std::size_t>> src_cols;
  for (const auto& s : sources_) {
    const auto c = ds.column_index(s.input);
    if (!c) throw SchemaError("missing column '" + s.input + "'");
    cols.push_back(*c);
    if (!s.conditional_source.empty()) {
      const auto sc = ds.column_index(s.conditional_source);
      if (!sc) throw SchemaError("missing column '" + s.conditional_source + "'");
      src_cols.push_back(sc);
    } else {
      src_cols.push_back(std::nullopt);
    }
  }
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    X(r, 0) = a[r];
    for (std::size_t k = 0; k < sources_.size(); ++k) {
      const auto& law = laws_[k + 1];
      const auto v = ds.value(r, cols[k]);
      double x;
      if (!v) {
        x = feature_median(law);
      } else if (src_cols[k]) {
        const auto sv = ds.value(r, *src_cols[k]);
        if (!sv) {
          x = 0.5;
        } else {
          const Uniform iv = realized_interval(sources_[k].conditional, *sv);
          x = std::clamp((*v - iv.lo) / (iv.hi - iv.lo), 0.0, 1.0);
        }
      } else {
        x = *v;
      }
      X(r, static_cast<Eigen::Index>(k + 1)) = x;
    }
  }
  return X;
}

}  // namespace mapod
