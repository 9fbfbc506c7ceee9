#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mapod/data.hpp"

namespace mapod {

// Independent marginal law of one metamodel feature.
using FeatureLaw = std::variant<Gaussian, Uniform>;

double feature_inverse_cdf(const FeatureLaw& law, double u);
double feature_cdf(const FeatureLaw& law, double x);
double feature_median(const FeatureLaw& law);
// (x - mean) / sd under the law; unit variance, zero mean.
double feature_standard_score(const FeatureLaw& law, double x);

// Metamodel parameterization: feature 0 is the defect size a, followed by
// every nuisance input in declaration order. ConditionalUniform inputs are
// carried in quantile space (u in [0,1]) so all nuisance features are
// independent. Absent cells are imputed at the median of their law.
class FeatureMap {
 public:
  FeatureMap(const InputSet& inputs, Uniform defect_range);
  // Direct construction (synthetic studies, tests).
  FeatureMap(std::vector<std::string> names, std::vector<FeatureLaw> laws);

  std::size_t dim() const noexcept { return laws_.size(); }
  std::size_t nuisance_dim() const noexcept { return laws_.size() - 1; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<FeatureLaw>& laws() const noexcept { return laws_; }
  std::vector<FeatureLaw> nuisance_laws() const { return {laws_.begin() + 1, laws_.end()}; }
  std::vector<std::string> nuisance_names() const { return {names_.begin() + 1, names_.end()}; }

  // N x dim feature matrix for the dataset rows.
  Eigen::MatrixXd features(const SimulationDataset& ds, std::span<const double> a) const;

 private:
  struct Source {
    std::string input;
    std::string conditional_source;  // non-empty for quantile-space inputs
    ConditionalUniform conditional;
  };
  std::vector<std::string> names_;
  std::vector<FeatureLaw> laws_;
  std::vector<Source> sources_;  // one per nuisance feature
};

// Default defect-size range: the union of the contributors' supports.
Uniform defect_size_range(const InputSet& inputs);

}  // namespace mapod
