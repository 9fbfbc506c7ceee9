#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "mapod/features.hpp"
#include "mapod/stats.hpp"

namespace mapod {

// POD values on a strictly increasing defect-size grid (mm).
struct PodCurve {
  std::vector<double> grid;
  std::vector<double> pod;
  std::vector<double> mc_stderr;  // empty unless the curve is a Monte Carlo estimate
  double threshold = 0.0;         // detection threshold in the regression scale

  void validate() const;
};

// Pointwise confidence envelopes around a curve. `lower`/`upper` are the
// two-sided bounds at `level`; `lower_one_sided` is the one-sided lower bound
// at the same level (the curve used for a90/95).
struct PodBand {
  PodCurve curve;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> lower_one_sided;
  double level = 0.95;
  std::vector<std::string> sources;

  void validate() const;
};

struct DetectabilitySummary {
  std::string method;
  double a90 = 0.0;
  double a90_95 = 0.0;
  std::vector<std::string> warnings;
};

// n equally spaced points from lo to hi inclusive.
std::vector<double> make_grid(double lo, double hi, std::size_t n = 201);

// Smallest a with POD(a) >= p, linearly interpolated on the first
// up-crossing segment. Throws NotAttainedError if p is never reached.
double a_at_level(const PodCurve& curve, double p);
double a_at_level(std::span<const double> grid, std::span<const double> pod, double p);
double a_at_level_with_confidence(const PodBand& band, double p);

bool is_nondecreasing(std::span<const double> pod, double tolerance = 0.0);

DetectabilitySummary summarize(const std::string& method, const PodCurve& curve,
                               const PodBand& band, double p = 0.9);

// Pointwise band from a matrix of sampled curves (draws x grid). Envelopes
// are widened where needed so they contain `curve`.
PodBand band_from_samples(const PodCurve& curve, const Eigen::MatrixXd& samples, double level,
                          std::vector<std::string> sources);

// A metamodel viewed as the family of conditional curves POD_X(a) =
// P(Y > s | a, X), indexed by nuisance realizations x.
class ConditionalPodModel {
 public:
  virtual ~ConditionalPodModel() = default;

  virtual const std::vector<FeatureLaw>& nuisance_laws() const = 0;
  virtual const std::vector<std::string>& nuisance_names() const = 0;
  std::size_t nuisance_dim() const { return nuisance_laws().size(); }

  // Rows of `x` are nuisance realizations; result is rows x grid.
  virtual Eigen::MatrixXd pod_x(const Eigen::MatrixXd& x, std::span<const double> grid) const = 0;
};

PodCurve pod_x_curve(const ConditionalPodModel& model, std::span<const double> x,
                     std::span<const double> grid);

// Draws n nuisance realizations by inverse-CDF mapping of uniform variates.
Eigen::MatrixXd sample_nuisance(const std::vector<FeatureLaw>& laws, std::size_t n, Rng& rng);

}  // namespace mapod
