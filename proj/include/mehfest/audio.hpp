#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mehfest {

inline constexpr int kDefaultSampleRate = 16000;

// Mono waveform. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::span<const double> view() const noexcept { return samples; }
  double duration_s() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  // Throws InvalidArgument on a non-positive rate or non-finite sample.
  void validate() const;
};

// Parameters of the speech-like test signal: harmonic bursts separated by
// stretches that contain only background noise.
struct SynthSpec {
  double duration_s = 2.0;
  int n_bursts = 3;
  std::vector<double> burst_freqs = {220.0, 440.0, 880.0};
  double burst_amplitude = 0.3;
  double gap_fraction = 0.4;
  double floor_noise_sigma = 1e-4;
  // Relative per-clip jitter of burst_freqs, drawn uniformly in +/-jitter.
  double freq_jitter = 0.0;
  // White noise added inside bursts only, under the same envelope.
  double burst_noise_sigma = 0.0;

  void validate(int sample_rate) const;
};

AudioClip load_wav(const std::filesystem::path& path);

// Writes PCM16 mono. Samples must already lie in [-1, 1].
void save_wav(const AudioClip& clip, const std::filesystem::path& path);

// PCM16 conversions used by the WAV codec.
double pcm16_to_sample(std::int16_t value) noexcept;
std::int16_t sample_to_pcm16(double sample) noexcept;

AudioClip synth_audio(const SynthSpec& spec, int sample_rate, std::uint64_t seed);

// Adds i.i.d. N(0, sigma^2) noise. The result is not clamped.
AudioClip add_white_noise(const AudioClip& clip, double sigma, std::uint64_t seed);

// Explicit clamp to the legal amplitude range.
AudioClip clamp_unit(const AudioClip& clip);

// Sample ranges [begin, end) that hold floor noise only in a synth_audio clip.
std::vector<std::pair<std::size_t, std::size_t>> synth_gap_ranges(
    const SynthSpec& spec, int sample_rate);

}  // namespace mehfest
