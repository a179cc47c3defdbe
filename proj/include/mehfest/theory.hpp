#pragma once

#include <cstddef>
#include <cstdint>

namespace mehfest::theory {

inline constexpr std::size_t kDefaultMonteCarloRuns = 1000;

// Inputs shared by the Monte Carlo predictions.
struct TheoryParams {
  std::size_t window_length = 400;  // W
  std::size_t band_bins = 33;       // M, degrees of freedom of each chi-squared draw
  std::size_t frames = 492;         // F
  std::size_t mc_runs = kDefaultMonteCarloRuns;
  std::uint64_t seed = 0;

  void validate() const;
};

// Expected per-bin STFT power of N(0, sigma^2) noise under a Hann window:
// 3 (W - 1) sigma^2 / 8.
double gamma(std::size_t window_length, double sigma);

// Monte Carlo estimate of E[min over F draws of chi^2_M], each draw the sum of
// M squared standard normals. Deterministic per seed.
double expected_min_chi2(std::size_t band_bins, std::size_t frames, std::size_t mc_runs,
                         std::uint64_t seed);
double expected_min_chi2(const TheoryParams& params);

// Predicted minimum high-band energy for white noise of std sigma.
double predicted_energy(const TheoryParams& params, double sigma);
double predicted_energy(std::size_t window_length, double expected_min, double sigma);

// E / sigma^2 = (3/8)(W - 1) E[min chi^2_M].
double energy_per_variance(const TheoryParams& params);

// Noise std whose predicted minimum energy equals the threshold D.
double sigma_d(const TheoryParams& params, double threshold);
double sigma_d(std::size_t window_length, double expected_min, double threshold);

}  // namespace mehfest::theory
