#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mehfest/audio.hpp"
#include "mehfest/stft.hpp"

namespace mehfest {

// Minimum spacing between picked frames whose windows do not overlap:
// ceil(N / H).
std::size_t default_spacing(const StftParams& params);

// Converts a physical cut-off frequency to a bin: round((N/2) * f / (fs/2)).
std::size_t hz_to_bin(double hz, const StftParams& params, int sample_rate);

struct DetectorProfile {
  StftParams stft{};
  int sample_rate = kDefaultSampleRate;
  std::size_t freq_threshold_bin = 224;
  std::size_t order = 1;
  std::size_t spacing = 4;
  // thresholds[j] is D_{j+1}; empty until calibrated.
  std::vector<double> thresholds;
  double calibration_k = 3.0;

  // Number of high-band bins, N/2 - f_t + 1.
  std::size_t band_bins() const noexcept { return stft.bins() - freq_threshold_bin; }
  double threshold() const;

  void validate() const;
  static DetectorProfile defaults();
};

// One selected low-energy frame.
struct Pick {
  std::size_t order = 0;  // 1-based
  std::size_t frame = 0;
  double energy = 0.0;

  friend bool operator==(const Pick&, const Pick&) = default;
};

struct MetricReport {
  std::vector<double> energies;
  std::vector<Pick> picks;
};

enum class Verdict { Original, Adversarial, Indeterminate };
const char* to_string(Verdict v);

struct Detection {
  Verdict verdict = Verdict::Indeterminate;
  double threshold = 0.0;
  MetricReport report;
  std::string note;  // reason when indeterminate
};

// E_r[m] = sum_{k >= f_t} |S[k, m]|^2, Nyquist bin included.
std::vector<double> band_energy_series(const Spectrogram& spec, std::size_t freq_threshold_bin);

// Greedy spaced minima: T_1 = argmin E_r; T_j = argmin over frames at
// distance >= spacing from every earlier pick. Ties go to the lower index.
// Throws Infeasible when fewer than `order` picks fit.
std::vector<Pick> pick_minima(std::span<const double> energies, std::size_t order,
                              std::size_t spacing);

// D = mean + k * sample_std (n - 1 denominator).
double calibrate_threshold(std::span<const double> values, double k);

// Energies and picks for a clip under the profile geometry. Throws TooShort
// or Infeasible.
MetricReport measure(const AudioClip& clip, const DetectorProfile& profile);

// Adversarial iff E_n > D_n. Infeasible picks yield Verdict::Indeterminate.
Detection detect(const AudioClip& clip, const DetectorProfile& profile);

// Verdict from a precomputed E_n.
Verdict classify(double energy, double threshold) noexcept;

struct CalibrationStats {
  std::vector<double> mean;  // per order
  std::vector<double> stddev;
  std::vector<std::vector<double>> values;  // values[j][clip]
};

// Calibrates D_1..D_n on trusted originals. The template supplies geometry
// and order; thresholds and calibration_k are overwritten.
DetectorProfile calibrate_profile(std::span<const AudioClip> trusted, DetectorProfile profile,
                                  double k, CalibrationStats* stats = nullptr);

}  // namespace mehfest
