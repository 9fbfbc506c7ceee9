#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mapod {

// Standard normal distribution function, computed from std::erfc.
double normal_cdf(double x);
// Upper tail 1 - Phi(x), accurate far into the right tail.
double normal_sf(double x);
double normal_pdf(double x);
// Inverse of normal_cdf on (0,1). Acklam's rational approximation refined by
// one Halley step against normal_cdf.
double normal_quantile(double p);

// Exceedance probability P(mean + sd * Z > threshold). A zero sd degenerates
// to the indicator 1{mean > threshold}.
double gaussian_exceedance(double mean, double sd, double threshold);

double mean(std::span<const double> x);
// Unbiased sample variance (divisor n - 1).
double sample_variance(std::span<const double> x);

// Linear-interpolation quantile of an unsorted sample (R type 7). The input
// is copied.
double empirical_quantile(std::span<const double> x, double prob);
// Same, but the sample is partially reordered in place.
double empirical_quantile_inplace(std::span<double> x, double prob);

// Asymptotic Kolmogorov survival function Q(t) = 2 sum (-1)^{j-1} exp(-2 j^2 t^2).
double kolmogorov_sf(double t);

// Survival function of chi-square with one degree of freedom.
double chi2_1_sf(double x);

// Independent per-stream seeds derived from a master seed (splitmix64).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

using Rng = std::mt19937_64;
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng{mix_seed(seed, stream)};
}

// Uniform draw in the open interval (0,1), safe for inverse-CDF mapping.
double uniform_open(Rng& rng);

}  // namespace mapod
