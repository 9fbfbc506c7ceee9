#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "mapod/pod.hpp"

namespace mapod {

// Orthonormal univariate polynomials: Legendre on [-1,1] scaled by
// sqrt(2n+1), probabilists' Hermite scaled by 1/sqrt(n!).
double legendre_normalized(unsigned degree, double t);
double hermite_normalized(unsigned degree, double z);

// Tensorized orthonormal basis truncated at total degree. Terms are sorted
// by total degree; term 0 is the constant.
struct OrthonormalBasis {
  std::vector<FeatureLaw> laws;
  unsigned degree = 0;
  std::vector<std::vector<unsigned>> terms;

  std::size_t size() const noexcept { return terms.size(); }
  std::size_t dim() const noexcept { return laws.size(); }
  void evaluate(std::span<const double> x, std::span<double> out) const;
  double evaluate_term(std::size_t term, std::span<const double> x) const;
  Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& X) const;
};

OrthonormalBasis build_orthonormal_basis(std::vector<FeatureLaw> laws, unsigned degree);
// ConditionalUniform inputs enter in quantile space as Uniform(0,1).
OrthonormalBasis build_orthonormal_basis(const InputSet& inputs, unsigned degree);

struct ChaosFit {
  OrthonormalBasis basis;
  Eigen::VectorXd coefficients;
  double sigma_eps = 0.0;  // sqrt(RSS / (N - P))
  double q2 = 1.0;         // leave-one-out predictivity of the selected degree
  Eigen::MatrixXd information_matrix_inverse;  // (Psi^T Psi)^{-1}
  std::size_t n = 0;
  std::vector<std::pair<unsigned, double>> q2_by_degree;

  double predict(std::span<const double> x) const;
  // Surrogate variance under the input law: sum of squared non-constant
  // coefficients.
  double surrogate_variance() const;
};

// Least-squares fit (column-pivoted QR) for every candidate degree; the
// degree with the largest LOO Q^2 wins, ties toward lower degree.
ChaosFit fit_chaos(const Eigen::MatrixXd& X, std::span<const double> y,
                   std::vector<FeatureLaw> laws, std::vector<unsigned> candidate_degrees = {1, 2, 3});
ChaosFit fit_chaos_basis(const Eigen::MatrixXd& X, std::span<const double> y,
                         const OrthonormalBasis& basis);

// Q^2 = 1 - sum (e_i / (1 - h_ii))^2 / sum (y_i - ybar)^2.
double loo_q2(const Eigen::MatrixXd& X, std::span<const double> y, const OrthonormalBasis& basis);

struct ChaosPodOptions {
  std::size_t n_mc = 10000;
  std::uint64_t seed = 0;
};

// Feature 0 of the basis is the defect size; the remaining features are
// drawn from their laws with common random numbers across the grid.
PodCurve chaos_pod(const ChaosFit& fit, double s, std::span<const double> grid,
                   const ChaosPodOptions& options = {});

struct ChaosBandOptions {
  std::size_t n_sets = 150;
  std::size_t n_mc = 10000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

// (coefficients, sigma_eps) drawn from the regression posterior with N - P
// degrees of freedom; each draw gives one POD curve with the same X and eps
// draws as the plug-in curve.
PodBand chaos_pod_band(const ChaosFit& fit, double s, std::span<const double> grid,
                       const ChaosBandOptions& options = {});

// POD_X(a) = 1 - Phi((s - Yhat(a, x)) / sigma_eps).
class ChaosConditionalPod final : public ConditionalPodModel {
 public:
  ChaosConditionalPod(ChaosFit fit, double threshold, std::vector<std::string> nuisance_names);

  const std::vector<FeatureLaw>& nuisance_laws() const override { return laws_; }
  const std::vector<std::string>& nuisance_names() const override { return names_; }
  Eigen::MatrixXd pod_x(const Eigen::MatrixXd& x, std::span<const double> grid) const override;

 private:
  ChaosFit fit_;
  double threshold_;
  std::vector<FeatureLaw> laws_;
  std::vector<std::string> names_;
};

}  // namespace mapod
