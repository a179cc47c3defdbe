#include "mehfest/stft.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "mehfest/error.hpp"

namespace mehfest {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

void StftParams::validate() const {
  if (window_length < 2) throw Error(ErrorKind::InvalidArgument, "window_length must be >= 2");
  if (!is_power_of_two(fft_length) || fft_length < 2) {
    throw Error(ErrorKind::InvalidArgument, "fft_length must be a power of two");
  }
  if (fft_length < window_length) {
    throw Error(ErrorKind::InvalidArgument, "fft_length must be >= window_length");
  }
  if (hop < 1) throw Error(ErrorKind::InvalidArgument, "hop must be >= 1");
}

std::vector<double> hann_window(std::size_t length) {
  if (length < 2) throw Error(ErrorKind::InvalidArgument, "Hann window needs length >= 2");
  std::vector<double> w(length);
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
  }
  // cos() is not exactly symmetric in floating point; mirror so w[n] == w[W-1-n].
  for (std::size_t n = 0; n < length / 2; ++n) w[length - 1 - n] = w[n];
  return w;
}

std::size_t frame_count(std::size_t length, const StftParams& params) {
  params.validate();
  if (length < params.fft_length) {
    throw Error(ErrorKind::TooShort, "signal of " + std::to_string(length) +
                                         " samples is shorter than one frame of " +
                                         std::to_string(params.fft_length));
  }
  return (length - params.fft_length) / params.hop + 1;
}

std::vector<double> padded_window(const StftParams& params) {
  params.validate();
  std::vector<double> w = hann_window(params.window_length);
  w.resize(params.fft_length, 0.0);
  return w;
}

// ---------------------------------------------------------------------------

namespace {

// The FFTW planner is not thread-safe; execution with a shared plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct RealFft::Plan {
  fftw_plan plan = nullptr;

  ~Plan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
};

RealFft::RealFft(std::size_t n) : n_(n) {
  if (!is_power_of_two(n) || n < 2) {
    throw Error(ErrorKind::InvalidArgument, "FFT size must be a power of two >= 2");
  }
  std::vector<double> in(n);
  std::vector<std::complex<double>> out(n / 2 + 1);
  auto plan = std::make_shared<Plan>();
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    // FFTW_ESTIMATE keeps planning deterministic; FFTW_UNALIGNED lets the plan
    // run on arbitrary caller buffers.
    plan->plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                      reinterpret_cast<fftw_complex*>(out.data()),
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  if (plan->plan == nullptr) throw Error(ErrorKind::InvalidArgument, "FFTW planning failed");
  plan_ = std::move(plan);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) const {
  if (in.size() != n_ || out.size() != n_ / 2 + 1) {
    throw Error(ErrorKind::InvalidArgument, "RealFft::forward size mismatch");
  }
  // Out-of-place r2c leaves the input untouched.
  fftw_execute_dft_r2c(plan_->plan, const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

// ---------------------------------------------------------------------------

Spectrogram::Spectrogram(StftParams params, int sample_rate, std::size_t frames)
    : params_(params), sample_rate_(sample_rate), frames_(frames),
      data_(frames * params.bins()) {}

Spectrogram stft(std::span<const double> samples, int sample_rate, const StftParams& params,
                 const RealFft& fft, std::span<const double> window) {
  const std::size_t frames = frame_count(samples.size(), params);
  const std::size_t n = params.fft_length;
  if (fft.size() != n || window.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "FFT plan or window does not match fft_length");
  }
  Spectrogram spec(params, sample_rate, frames);
  std::vector<double> buf(n);
  for (std::size_t m = 0; m < frames; ++m) {
    const double* src = samples.data() + m * params.hop;
    for (std::size_t i = 0; i < n; ++i) buf[i] = window[i] * src[i];
    fft.forward(buf, spec.frame(m));
  }
  return spec;
}

Spectrogram stft(const AudioClip& clip, const StftParams& params) {
  params.validate();
  if (clip.sample_rate <= 0) throw Error(ErrorKind::InvalidArgument, "invalid sample rate");
  const RealFft fft(params.fft_length);
  const std::vector<double> window = padded_window(params);
  return stft(clip.view(), clip.sample_rate, params, fft, window);
}

}  // namespace mehfest
