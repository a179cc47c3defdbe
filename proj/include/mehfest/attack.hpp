#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mehfest/audio.hpp"
#include "mehfest/stft.hpp"
#include "mehfest/sv.hpp"

namespace mehfest::attack {

// Frame geometry the attacker shares with the defender when freezing frames.
struct DetectorGeometry {
  StftParams stft{};
  std::size_t freq_threshold_bin = 224;
  std::size_t spacing = 4;
};

struct AttackParams {
  double epsilon = 0.002;
  std::size_t max_iters = 200;
  double learning_rate = 0.0002;  // epsilon / 10 for the default epsilon
  std::size_t nes_samples = 50;
  double nes_sigma = 0.001;
  std::uint64_t seed = 0;
  std::size_t freeze_order = 0;  // 0 = plain FAKEBOB
  DetectorGeometry geometry{};
  bool clamp_to_unit = true;  // clamp to [-1, 1] after the epsilon-ball projection

  void validate() const;
};

// Returns params with learning_rate = epsilon / 10.
AttackParams with_default_learning_rate(AttackParams params);

struct FrozenRange {
  std::size_t frame = 0;
  std::size_t begin = 0;  // sample range [begin, end)
  std::size_t end = 0;
};

struct AttackResult {
  AudioClip adversarial;
  bool success = false;
  std::size_t iterations_used = 0;
  std::size_t queries = 0;
  std::vector<double> score_trace;
  std::vector<FrozenRange> frozen_frames;
  double seconds = 0.0;
};

using ScoreFn = std::function<double(std::span<const double>)>;

// max(theta - score, 0).
double loss(double score, double theta) noexcept;

// Antithetic NES estimate of the loss gradient at `point`:
// g = 1/(q sigma) sum_i [L(a + sigma u_i) - L(a - sigma u_i)] u_i over q/2
// draws u_i ~ N(0, I). Issues exactly nes_samples score queries.
std::vector<double> nes_gradient(const ScoreFn& score_fn, std::span<const double> point,
                                 double theta, std::size_t nes_samples, double nes_sigma,
                                 std::uint64_t seed);

// Per-sample projection of a onto [s - eps, s + eps].
AudioClip clip_to_ball(const AudioClip& a, const AudioClip& s, double epsilon);

// Sample ranges [T_j H, T_j H + N) of the n lowest spaced high-band frames of s.
std::vector<FrozenRange> frozen_ranges(const AudioClip& s, std::size_t order,
                                       const DetectorGeometry& geometry);

// Generic BIM/NES loop against any score oracle. params.freeze_order selects
// plain (0) or n-th FAKEBOB.
AttackResult run(const AudioClip& s, const ScoreFn& score_fn, double theta,
                 const AttackParams& params);

// Plain FAKEBOB; params.freeze_order must be 0.
AttackResult fakebob(const AudioClip& s, const sv::SvModel& model, const AttackParams& params);

// n-th FAKEBOB; params.freeze_order must be >= 1.
AttackResult nth_fakebob(const AudioClip& s, const sv::SvModel& model, const AttackParams& params);

// Sample std of p = a - s over the samples of frame T_1 of the original clip.
double perturbation_std_at_min_frame(const AudioClip& original, const AudioClip& adversarial,
                                     const DetectorGeometry& geometry);

}  // namespace mehfest::attack
