#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mapod/pod.hpp"

namespace mapod {

// Columns frozen together; one group per input by default.
struct InputGroup {
  std::string name;
  std::vector<std::size_t> columns;
};

struct SobolIndex {
  std::string name;
  double first_order = 0.0;
  double total = 0.0;
  double first_order_stderr = 0.0;
  double total_stderr = 0.0;
};

struct SobolResult {
  std::vector<SobolIndex> indices;
  std::size_t n_base = 0;
  std::string estimator;
  double variance = 0.0;  // output variance, or the dispersion D for curves
  double rejected_fraction = 0.0;
  std::vector<double> grid;  // functional indices only

  const SobolIndex& at(const std::string& name) const;
};

enum class CurveNorm { Trapezoid, Euclidean };

struct SobolOptions {
  std::size_t n_base = 4096;
  std::uint64_t seed = 0;
  std::size_t n_bootstrap = 200;
  std::vector<InputGroup> groups;
  CurveNorm norm = CurveNorm::Trapezoid;
};

// Batch evaluator: rows of x are input realizations; returns one value per
// row.
using ScalarEvaluator = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;
// Curve evaluator: rows x grid values.
using CurveEvaluator = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

// Pick-freeze indices of independent inputs with the given laws. First order
// by the correlation (Janon) form, total by Jansen's formula; bootstrap
// standard errors. Cost (groups + 2) * n_base evaluations.
SobolResult sobol_indices_scalar(const ScalarEvaluator& f, const std::vector<FeatureLaw>& laws,
                                 const std::vector<std::string>& names, const SobolOptions& options = {});

// Same estimators applied to curves with the squared L2 norm over the grid.
SobolResult sobol_indices_curve(const CurveEvaluator& f, const std::vector<FeatureLaw>& laws,
                                const std::vector<std::string>& names, std::span<const double> grid,
                                const SobolOptions& options = {});

// Indices of the whole conditional curve POD_X over the grid.
SobolResult pod_sobol_indices(const ConditionalPodModel& model, std::span<const double> grid,
                              const SobolOptions& options = {});

// Scalar indices of POD_X(a) at a fixed size.
SobolResult pod_value_sobol(const ConditionalPodModel& model, double a, const SobolOptions& options = {});

// Scalar indices of POD_X^{-1}(p) (first up-crossing on the grid). Rows where
// the level is not attained are dropped; more than 20% dropped is an error.
SobolResult inverse_pod_sobol(const ConditionalPodModel& model, std::span<const double> grid, double p,
                              const SobolOptions& options = {});

// Normalized integration weights for a grid.
std::vector<double> curve_weights(std::span<const double> grid, CurveNorm norm);

}  // namespace mapod
