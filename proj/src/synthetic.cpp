#include "mapod/synthetic.hpp"

#include <cmath>

#include "mapod/doe.hpp"
#include "mapod/error.hpp"
#include "mapod/features.hpp"
#include "mapod/stats.hpp"
#include "mapod/transform.hpp"

namespace mapod {

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "linear-gaussian") return SyntheticKind::LinearGaussian;
  if (name == "power-law") return SyntheticKind::PowerLaw;
  if (name == "nonlinear-interaction") return SyntheticKind::NonlinearInteraction;
  throw SpecError("unknown synthetic model '" + name + "'");
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::LinearGaussian: return "linear-gaussian";
    case SyntheticKind::PowerLaw: return "power-law";
    case SyntheticKind::NonlinearInteraction: return "nonlinear-interaction";
  }
  return "unknown";
}

void SyntheticModelSpec::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw SpecError("synthetic: sigma must be finite and >= 0");
  if (!std::isfinite(beta0) || !std::isfinite(beta1)) throw SpecError("synthetic: beta must be finite");
  if (kind == SyntheticKind::PowerLaw && !std::isfinite(lambda)) throw SpecError("synthetic: lambda must be finite");
}

namespace {

double score(const InputSet& inputs, const SimulationDataset& ds, const std::string& name, std::size_t row) {
  const auto idx = inputs.index_of(name);
  if (!idx) throw SpecError("synthetic: unknown input '" + name + "'");
  const auto& spec = inputs[*idx];
  const auto col = ds.column_index(name);
  if (!col) throw SpecError("synthetic: design has no column '" + name + "'");
  const auto v = ds.value(row, *col);
  if (const auto* g = std::get_if<Gaussian>(&spec.family)) {
    return v ? feature_standard_score(FeatureLaw{*g}, *v) : 0.0;
  }
  if (const auto* u = std::get_if<Uniform>(&spec.family)) {
    return v ? feature_standard_score(FeatureLaw{*u}, *v) : 0.0;
  }
  throw SpecError("synthetic: interaction input '" + name + "' must be Gaussian or Uniform");
}

}  // namespace

std::vector<double> evaluate(const SyntheticModelSpec& spec, const InputSet& inputs,
                             const SimulationDataset& design, std::span<const double> a) {
  spec.validate();
  if (a.size() != design.rows()) throw ArgumentError("synthetic: defect-size length mismatch");
  Rng rng = make_rng(spec.seed, 0);
  std::vector<double> y(design.rows());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double eps = normal_quantile(uniform_open(rng));
    const double eta = spec.beta0 + spec.beta1 * a[i] + spec.sigma * eps;
    switch (spec.kind) {
      case SyntheticKind::LinearGaussian:
        y[i] = eta;
        break;
      case SyntheticKind::PowerLaw: {
        if (std::abs(spec.lambda) < kBoxCoxLogThreshold) {
          y[i] = std::exp(eta);
        } else {
          const double base = 1.0 + spec.lambda * eta;
          if (!(base > 0.0)) {
            throw SpecError("synthetic: power-law response is not positive at row " + std::to_string(i + 1));
          }
          y[i] = std::pow(base, 1.0 / spec.lambda);
        }
        if (!(y[i] > 0.0) || !std::isfinite(y[i])) {
          throw SpecError("synthetic: power-law response is not positive at row " + std::to_string(i + 1));
        }
        break;
      }
      case SyntheticKind::NonlinearInteraction: {
        const double z1 = score(inputs, design, spec.input1, i);
        const double z2 = score(inputs, design, spec.input2, i);
        y[i] = eta + spec.c1 * z1 + spec.c2 * z2 + spec.c12 * z1 * z2;
        break;
      }
    }
  }
  return y;
}

SimulationDataset synthesize(const SyntheticModelSpec& spec, const InputSet& inputs, std::size_t n) {
  const auto design = sample_inputs(inputs, n);
  const auto contributors = inputs.defect_size_inputs();
  const auto a = derive_defect_size(design, contributors).a;
  return design.with_response(evaluate(spec, inputs, design, a));
}

double true_pod_at(const SyntheticModelSpec& spec, double s, double a) {
  double st = s;
  switch (spec.kind) {
    case SyntheticKind::LinearGaussian:
      break;
    case SyntheticKind::PowerLaw:
      if (!(s > 0.0)) throw ArgumentError("true_pod: power-law threshold must be positive");
      st = apply_boxcox(s, spec.lambda);
      break;
    case SyntheticKind::NonlinearInteraction:
      throw ArgumentError("true_pod: no closed form for the interaction model");
  }
  return gaussian_exceedance(spec.beta0 + spec.beta1 * a, spec.sigma, st);
}

PodCurve true_pod(const SyntheticModelSpec& spec, double s, std::span<const double> grid) {
  PodCurve c;
  c.grid.assign(grid.begin(), grid.end());
  c.threshold = s;
  for (double a : grid) c.pod.push_back(true_pod_at(spec, s, a));
  return c;
}

double true_a90(const SyntheticModelSpec& spec, double s) {
  if (spec.beta1 == 0.0) throw ArgumentError("true_a90: beta1 is zero");
  if (spec.kind == SyntheticKind::PowerLaw) {
    if (!(s > 0.0)) throw ArgumentError("true_a90: power-law threshold must be positive");
    s = apply_boxcox(s, spec.lambda);
  }
  return (s - spec.beta0 + normal_quantile(0.9) * spec.sigma) / spec.beta1;
}

// Raw-scale threshold: power-law models map the linear threshold back.
double threshold_for_a90(const SyntheticModelSpec& spec, double a90) {
  const double lin = spec.beta0 + spec.beta1 * a90 - normal_quantile(0.9) * spec.sigma;
  return spec.kind == SyntheticKind::PowerLaw ? invert_boxcox(lin, spec.lambda) : lin;
}

InteractionIndices interaction_indices(const SyntheticModelSpec& spec) {
  const double v = spec.c1 * spec.c1 + spec.c2 * spec.c2 + spec.c12 * spec.c12;
  if (!(v > 0.0)) throw DegenerateVarianceError("interaction model has no nuisance variance");
  const double i12 = spec.c12 * spec.c12;
  return {spec.c1 * spec.c1 / v, spec.c2 * spec.c2 / v, (spec.c1 * spec.c1 + i12) / v,
          (spec.c2 * spec.c2 + i12) / v};
}

InputSet demo_inputs() {
  return InputSet({
      {"E", Gaussian{1.27, 0.02}, InputRole::Nuisance, 0},
      {"h1", Uniform{2.0, 20.0}, InputRole::Nuisance, 0},
      {"h2", Uniform{2.0, 20.0}, InputRole::Nuisance, 2},
      {"P1", Uniform{0.1, 0.5}, InputRole::DefectSize, 0},
      {"P2", Uniform{0.1, 0.5}, InputRole::DefectSize, 2},
      {"ebav1", ConditionalUniform{"P1", 0.0, 0.3}, InputRole::Nuisance, 0},
      {"ebav2", ConditionalUniform{"P2", 0.0, 0.3}, InputRole::Nuisance, 2},
  });
}

}  // namespace mapod
