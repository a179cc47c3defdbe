#include "mehfest/detector.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "mehfest/error.hpp"

namespace mehfest {

std::size_t default_spacing(const StftParams& params) {
  return (params.fft_length + params.hop - 1) / params.hop;
}

std::size_t hz_to_bin(double hz, const StftParams& params, int sample_rate) {
  if (sample_rate <= 0 || !(hz >= 0.0) || hz > sample_rate / 2.0) {
    throw Error(ErrorKind::InvalidArgument, "cut-off frequency must lie in [0, fs/2]");
  }
  const double half = static_cast<double>(params.fft_length / 2);
  return static_cast<std::size_t>(std::llround(half * hz / (sample_rate / 2.0)));
}

double DetectorProfile::threshold() const {
  if (thresholds.size() < order) {
    throw Error(ErrorKind::InvalidArgument,
                "profile has no calibrated threshold for order " + std::to_string(order));
  }
  return thresholds[order - 1];
}

void DetectorProfile::validate() const {
  stft.validate();
  if (sample_rate <= 0) throw Error(ErrorKind::InvalidArgument, "sample_rate must be positive");
  if (freq_threshold_bin > stft.fft_length / 2) {
    throw Error(ErrorKind::InvalidArgument, "frequency threshold bin exceeds N/2");
  }
  if (order < 1) throw Error(ErrorKind::InvalidArgument, "order must be >= 1");
  if (spacing < 1) throw Error(ErrorKind::InvalidArgument, "spacing must be >= 1");
  for (double d : thresholds) {
    if (!std::isfinite(d) && d != std::numeric_limits<double>::infinity()) {
      throw Error(ErrorKind::InvalidArgument, "thresholds must be finite or +inf");
    }
  }
}

DetectorProfile DetectorProfile::defaults() {
  DetectorProfile p;
  p.spacing = default_spacing(p.stft);
  p.freq_threshold_bin = hz_to_bin(7000.0, p.stft, p.sample_rate);
  return p;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Original: return "original";
    case Verdict::Adversarial: return "adversarial";
    case Verdict::Indeterminate: return "indeterminate";
  }
  return "unknown";
}

std::vector<double> band_energy_series(const Spectrogram& spec, std::size_t freq_threshold_bin) {
  if (freq_threshold_bin >= spec.bins()) {
    throw Error(ErrorKind::InvalidArgument, "frequency threshold bin exceeds N/2");
  }
  std::vector<double> energies(spec.frames());
  for (std::size_t m = 0; m < spec.frames(); ++m) {
    const auto frame = spec.frame(m);
    double e = 0.0;
    for (std::size_t k = freq_threshold_bin; k < frame.size(); ++k) e += power(frame[k]);
    energies[m] = e;
  }
  return energies;
}

std::vector<Pick> pick_minima(std::span<const double> energies, std::size_t order,
                              std::size_t spacing) {
  if (order < 1) throw Error(ErrorKind::InvalidArgument, "order must be >= 1");
  if (spacing < 1) throw Error(ErrorKind::InvalidArgument, "spacing must be >= 1");
  std::vector<Pick> picks;
  picks.reserve(order);
  std::vector<bool> blocked(energies.size(), false);
  for (std::size_t j = 1; j <= order; ++j) {
    std::size_t best = energies.size();
    for (std::size_t m = 0; m < energies.size(); ++m) {
      if (blocked[m]) continue;
      if (best == energies.size() || energies[m] < energies[best]) best = m;
    }
    if (best == energies.size()) {
      throw Error(ErrorKind::Infeasible,
                  "only " + std::to_string(j - 1) + " of " + std::to_string(order) +
                      " picks fit " + std::to_string(energies.size()) +
                      " frames at spacing " + std::to_string(spacing));
    }
    picks.push_back({j, best, energies[best]});
    const std::size_t lo = best >= spacing - 1 ? best - (spacing - 1) : 0;
    const std::size_t hi = std::min(energies.size() - 1, best + (spacing - 1));
    for (std::size_t m = lo; m <= hi; ++m) blocked[m] = true;
  }
  return picks;
}

double calibrate_threshold(std::span<const double> values, double k) {
  if (values.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "calibration needs at least two values");
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return mean + k * std::sqrt(ss / (n - 1.0));
}

MetricReport measure(const AudioClip& clip, const DetectorProfile& profile) {
  profile.validate();
  if (clip.sample_rate != profile.sample_rate) {
    throw Error(ErrorKind::InvalidArgument,
                "clip sample rate " + std::to_string(clip.sample_rate) +
                    " Hz does not match detector rate " + std::to_string(profile.sample_rate));
  }
  MetricReport report;
  report.energies = band_energy_series(stft(clip, profile.stft), profile.freq_threshold_bin);
  report.picks = pick_minima(report.energies, profile.order, profile.spacing);
  return report;
}

Verdict classify(double energy, double threshold) noexcept {
  return energy > threshold ? Verdict::Adversarial : Verdict::Original;
}

Detection detect(const AudioClip& clip, const DetectorProfile& profile) {
  Detection out;
  out.threshold = profile.threshold();
  try {
    out.report = measure(clip, profile);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Infeasible) throw;
    out.verdict = Verdict::Indeterminate;
    out.note = e.what();
    return out;
  }
  out.verdict = classify(out.report.picks.back().energy, out.threshold);
  return out;
}

DetectorProfile calibrate_profile(std::span<const AudioClip> trusted, DetectorProfile profile,
                                  double k, CalibrationStats* stats) {
  if (trusted.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "calibration needs at least two trusted clips");
  }
  profile.thresholds.clear();
  profile.validate();
  std::vector<std::vector<double>> values(profile.order, std::vector<double>(trusted.size()));
  for (std::size_t c = 0; c < trusted.size(); ++c) {
    const MetricReport report = measure(trusted[c], profile);
    for (std::size_t j = 0; j < profile.order; ++j) values[j][c] = report.picks[j].energy;
  }
  profile.calibration_k = k;
  for (std::size_t j = 0; j < profile.order; ++j) {
    profile.thresholds.push_back(calibrate_threshold(values[j], k));
  }
  if (stats != nullptr) {
    stats->mean.clear();
    stats->stddev.clear();
    for (const auto& v : values) {
      const double mean = calibrate_threshold(v, 0.0);
      stats->mean.push_back(mean);
      stats->stddev.push_back(calibrate_threshold(v, 1.0) - mean);
    }
    stats->values = std::move(values);
  }
  return profile;
}

}  // namespace mehfest
