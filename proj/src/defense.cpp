#include "mehfest/defense.hpp"

#include <cmath>

#include "mehfest/error.hpp"

namespace mehfest::defense {

void NoiseDefenseParams::validate() const {
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorKind::InvalidArgument, "noise_sigma must be finite and >= 0");
  }
}

double defended_score(const sv::SvModel& model, const AudioClip& clip,
                      const NoiseDefenseParams& params, std::uint64_t seed) {
  params.validate();
  if (params.noise_sigma == 0.0) return sv::score(model, clip);
  return sv::score(model, add_white_noise(clip, params.noise_sigma, seed));
}

NoiseDefense::NoiseDefense(const sv::SvModel& model, NoiseDefenseParams params, std::uint64_t seed)
    : scorer_(model), params_(params), seed_(seed), stream_(make_rng(seed)) {
  params_.validate();
}

double NoiseDefense::score(const AudioClip& clip) {
  if (params_.noise_sigma == 0.0) return scorer_(clip);
  const std::uint64_t seed = params_.policy == SeedPolicy::FixedSeed ? seed_ : stream_();
  return scorer_(add_white_noise(clip, params_.noise_sigma, seed));
}

}  // namespace mehfest::defense
