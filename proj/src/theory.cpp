#include "mehfest/theory.hpp"

#include <cmath>
#include <limits>

#include "mehfest/error.hpp"
#include "mehfest/random.hpp"

namespace mehfest::theory {

void TheoryParams::validate() const {
  if (window_length < 2) throw Error(ErrorKind::InvalidArgument, "W must be >= 2");
  if (band_bins < 1) throw Error(ErrorKind::InvalidArgument, "M must be >= 1");
  if (frames < 1) throw Error(ErrorKind::InvalidArgument, "F must be >= 1");
  if (mc_runs < 1) throw Error(ErrorKind::InvalidArgument, "mc_runs must be >= 1");
}

double gamma(std::size_t window_length, double sigma) {
  if (window_length < 2) throw Error(ErrorKind::InvalidArgument, "W must be >= 2");
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be >= 0");
  return 0.375 * static_cast<double>(window_length - 1) * sigma * sigma;
}

double expected_min_chi2(std::size_t band_bins, std::size_t frames, std::size_t mc_runs,
                         std::uint64_t seed) {
  TheoryParams{2, band_bins, frames, mc_runs, seed}.validate();
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double total = 0.0;
  for (std::size_t run = 0; run < mc_runs; ++run) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < frames; ++f) {
      double x = 0.0;
      for (std::size_t i = 0; i < band_bins; ++i) {
        const double z = normal(rng);
        x += z * z;
      }
      if (x < best) best = x;
    }
    total += best;
  }
  return total / static_cast<double>(mc_runs);
}

double expected_min_chi2(const TheoryParams& params) {
  return expected_min_chi2(params.band_bins, params.frames, params.mc_runs, params.seed);
}

double predicted_energy(std::size_t window_length, double expected_min, double sigma) {
  return gamma(window_length, sigma) * expected_min;
}

double predicted_energy(const TheoryParams& params, double sigma) {
  params.validate();
  return predicted_energy(params.window_length, expected_min_chi2(params), sigma);
}

double energy_per_variance(const TheoryParams& params) {
  return predicted_energy(params, 1.0);
}

double sigma_d(std::size_t window_length, double expected_min, double threshold) {
  if (!(threshold > 0.0)) throw Error(ErrorKind::InvalidArgument, "threshold D must be > 0");
  if (window_length < 2) throw Error(ErrorKind::InvalidArgument, "W must be >= 2");
  if (!(expected_min > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "expected minimum must be > 0");
  }
  return std::sqrt(8.0 * threshold /
                   (3.0 * static_cast<double>(window_length - 1) * expected_min));
}

double sigma_d(const TheoryParams& params, double threshold) {
  params.validate();
  if (!(threshold > 0.0)) throw Error(ErrorKind::InvalidArgument, "threshold D must be > 0");
  return sigma_d(params.window_length, expected_min_chi2(params), threshold);
}

}  // namespace mehfest::theory
