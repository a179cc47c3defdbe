#pragma once

#include <cstdint>

#include "mehfest/audio.hpp"
#include "mehfest/random.hpp"
#include "mehfest/sv.hpp"

namespace mehfest::defense {

enum class SeedPolicy { FixedSeed, FreshPerCall };

struct NoiseDefenseParams {
  double noise_sigma = 0.0;
  SeedPolicy policy = SeedPolicy::FreshPerCall;

  void validate() const;
};

// score(sv, clip + N(0, noise_sigma^2)) with noise drawn from `seed`.
// noise_sigma == 0 returns the plain score bit-for-bit.
double defended_score(const sv::SvModel& model, const AudioClip& clip,
                      const NoiseDefenseParams& params, std::uint64_t seed);

// Noise-adding wrapper around a scorer. FixedSeed reuses `seed` for every
// call; FreshPerCall draws each call's noise seed from its own stream.
class NoiseDefense {
 public:
  NoiseDefense(const sv::SvModel& model, NoiseDefenseParams params, std::uint64_t seed);

  double score(const AudioClip& clip);
  bool accepts(const AudioClip& clip) { return score(clip) >= scorer_.model().theta; }
  const NoiseDefenseParams& params() const noexcept { return params_; }

 private:
  sv::Scorer scorer_;
  NoiseDefenseParams params_;
  std::uint64_t seed_;
  Rng stream_;
};

}  // namespace mehfest::defense
