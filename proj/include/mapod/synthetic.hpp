#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mapod/data.hpp"
#include "mapod/pod.hpp"

namespace mapod {

enum class SyntheticKind { LinearGaussian, PowerLaw, NonlinearInteraction };

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string to_string(SyntheticKind kind);

// Forward models with known ground truth. Each response is built from the
// linear predictor eta = beta0 + beta1 a + sigma eps (eps standard normal,
// drawn in row order from the seed):
//   linear-gaussian        y = eta
//   power-law              y = (1 + lambda eta)^(1/lambda), exp(eta) at lambda 0
//   nonlinear-interaction  y = eta + c1 z1 + c2 z2 + c12 z1 z2
// where z1, z2 are the standardized scores of two nuisance inputs.
struct SyntheticModelSpec {
  SyntheticKind kind = SyntheticKind::LinearGaussian;
  double beta0 = 2.5;
  double beta1 = 43.5;
  double sigma = 1.95;
  double lambda = 0.3;
  std::string input1 = "E";
  std::string input2 = "h1";
  double c1 = 0.0;
  double c2 = 0.0;
  double c12 = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Responses for the rows of a design; a is the defect size of each row.
std::vector<double> evaluate(const SyntheticModelSpec& spec, const InputSet& inputs,
                             const SimulationDataset& design, std::span<const double> a);

// Design of n Sobol' points through the input laws plus responses.
SimulationDataset synthesize(const SyntheticModelSpec& spec, const InputSet& inputs, std::size_t n);

// Ground-truth POD for a raw threshold s (linear-gaussian and power-law).
PodCurve true_pod(const SyntheticModelSpec& spec, double s, std::span<const double> grid);
double true_pod_at(const SyntheticModelSpec& spec, double s, double a);
// a90 = (s - beta0 + z_0.9 sigma) / beta1 with s taken to the linear scale.
double true_a90(const SyntheticModelSpec& spec, double s);
// Raw threshold giving the requested true a90.
double threshold_for_a90(const SyntheticModelSpec& spec, double a90);

struct InteractionIndices {
  double s1 = 0.0, s2 = 0.0, t1 = 0.0, t2 = 0.0;
};
// Indices of c1 z1 + c2 z2 + c12 z1 z2 with respect to (input1, input2).
InteractionIndices interaction_indices(const SyntheticModelSpec& spec);

// Default demonstration inputs: E ~ N(1.27, 0.02), h ~ U[2, 20],
// P ~ U[0.1, 0.5] (defect size), ebav ~ U[-P, 0.3]; second-flaw inputs
// carry flaw = 2.
InputSet demo_inputs();

}  // namespace mapod
