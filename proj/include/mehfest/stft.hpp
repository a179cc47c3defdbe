#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "mehfest/audio.hpp"

namespace mehfest {

enum class WindowKind { Hann };

// Framing geometry. The window is W points long and zero-padded to the FFT
// length N.
struct StftParams {
  std::size_t window_length = 400;
  std::size_t fft_length = 512;
  std::size_t hop = 160;
  WindowKind window = WindowKind::Hann;

  std::size_t bins() const noexcept { return fft_length / 2 + 1; }
  // Throws InvalidArgument unless 2 <= W <= N, N is a power of two, H >= 1.
  void validate() const;

  friend bool operator==(const StftParams&, const StftParams&) = default;
};

// Symmetric Hann window: w[n] = 0.5 - 0.5 cos(2 pi n / (W - 1)).
std::vector<double> hann_window(std::size_t length);

// Number of frames lying entirely inside a signal of the given length:
// floor((L - N) / H) + 1. Throws TooShort when L < N.
std::size_t frame_count(std::size_t length, const StftParams& params);

// Real-input FFT (FFTW r2c) of a fixed power-of-two size. Immutable after
// construction, so one instance may be shared across threads.
class RealFft {
 public:
  explicit RealFft(std::size_t n);

  std::size_t size() const noexcept { return n_; }

  // in.size() == n, out.size() == n/2 + 1. Thread-safe.
  void forward(std::span<const double> in, std::span<std::complex<double>> out) const;

 private:
  struct Plan;
  std::size_t n_;
  std::shared_ptr<const Plan> plan_;
};

// |z|^2 as re^2 + im^2 (std::norm may route through abs()).
inline double power(std::complex<double> z) noexcept {
  return z.real() * z.real() + z.imag() * z.imag();
}

// Complex STFT frames S[k, m], stored frame-major.
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(StftParams params, int sample_rate, std::size_t frames);

  const StftParams& params() const noexcept { return params_; }
  int sample_rate() const noexcept { return sample_rate_; }
  std::size_t frames() const noexcept { return frames_; }
  std::size_t bins() const noexcept { return params_.bins(); }

  std::span<const std::complex<double>> frame(std::size_t m) const {
    return {data_.data() + m * bins(), bins()};
  }
  std::span<std::complex<double>> frame(std::size_t m) {
    return {data_.data() + m * bins(), bins()};
  }
  const std::complex<double>& at(std::size_t k, std::size_t m) const {
    return data_[m * bins() + k];
  }

 private:
  StftParams params_{};
  int sample_rate_ = kDefaultSampleRate;
  std::size_t frames_ = 0;
  std::vector<std::complex<double>> data_;
};

// S[k, m] = sum_{n<N} w'[n] s[n + mH] e^{-j 2 pi k n / N}, k = 0..N/2.
//
// NOTE: frames are NOT centred and the signal is NOT padded. Frame m covers
// samples [mH, mH + N) and m runs over 0..floor((L - N)/H). Most audio
// libraries pad by N/2 on both sides by default; this one does not, so frame
// counts and frame positions differ from theirs.
Spectrogram stft(const AudioClip& clip, const StftParams& params);

// Same transform over a raw sample span; used on hot paths that already
// hold an FFT plan and window.
Spectrogram stft(std::span<const double> samples, int sample_rate, const StftParams& params,
                 const RealFft& fft, std::span<const double> padded_window);

// Hann window of length W zero-padded to N.
std::vector<double> padded_window(const StftParams& params);

}  // namespace mehfest
