#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "mehfest/error.hpp"
#include "mehfest/stft.hpp"

using namespace mehfest;

namespace {

AudioClip random_clip(std::size_t n, std::uint64_t seed, double scale = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  AudioClip clip;
  clip.samples.resize(n);
  for (double& s : clip.samples) s = g(rng);
  return clip;
}

// Direct O(N^2) evaluation of one frame.
std::vector<std::complex<double>> direct_frame(const std::vector<double>& s, std::size_t start,
                                               const StftParams& p) {
  const std::vector<double> w = hann_window(p.window_length);
  const std::size_t n = p.fft_length;
  std::vector<std::complex<double>> out(p.bins());
  for (std::size_t k = 0; k < out.size(); ++k) {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t i = 0; i < p.window_length; ++i) {
      const long double ang = -2.0L * std::numbers::pi_v<long double> * k * i / n;
      const long double v = static_cast<long double>(w[i]) * s[start + i];
      re += v * std::cos(ang);
      im += v * std::sin(ang);
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

}  // namespace

TEST(Hann, ThreePoint) {
  EXPECT_EQ(hann_window(3), (std::vector<double>{0.0, 1.0, 0.0}));
}

TEST(Hann, Symmetric) {
  for (std::size_t w : {2u, 5u, 64u, 399u, 400u, 1001u}) {
    const auto h = hann_window(w);
    for (std::size_t n = 0; n < w; ++n) ASSERT_EQ(h[n], h[w - 1 - n]) << w << " " << n;
  }
}

TEST(Hann, EnergyNearThreeEighths) {
  const auto h = hann_window(400);
  double sum = 0.0;
  for (double v : h) sum += v * v;
  EXPECT_NEAR(sum, 149.625, 0.01 * 149.625);
}

TEST(Hann, RejectsShortWindow) {
  EXPECT_THROW(hann_window(1), Error);
}

TEST(FrameCount, Examples) {
  const StftParams p;
  EXPECT_EQ(frame_count(79219, p), 492u);
  EXPECT_EQ(frame_count(512, p), 1u);
  EXPECT_EQ(frame_count(512 + 160, p), 2u);
  EXPECT_EQ(frame_count(512 + 159, p), 1u);
}

TEST(FrameCount, TooShortThrows) {
  try {
    frame_count(511, StftParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooShort);
  }
}

TEST(Params, Validation) {
  EXPECT_NO_THROW(StftParams{}.validate());
  EXPECT_THROW((StftParams{400, 500, 160}.validate()), Error);
  EXPECT_THROW((StftParams{600, 512, 160}.validate()), Error);
  EXPECT_THROW((StftParams{400, 512, 0}.validate()), Error);
  EXPECT_THROW((StftParams{1, 512, 160}.validate()), Error);
}

TEST(Stft, ZeroClipGivesZeroSpectrum) {
  AudioClip clip{std::vector<double>(2000, 0.0), 16000};
  const Spectrogram s = stft(clip, StftParams{});
  EXPECT_EQ(s.frames(), frame_count(2000, StftParams{}));
  for (std::size_t m = 0; m < s.frames(); ++m) {
    for (auto z : s.frame(m)) ASSERT_EQ(z, std::complex<double>(0.0, 0.0));
  }
}

TEST(Stft, ImpulseAtHannEndpointVanishes) {
  const StftParams p{512, 512, 160};
  AudioClip clip{std::vector<double>(512, 0.0), 16000};
  clip.samples[0] = 1.0;
  const Spectrogram s = stft(clip, p);
  for (auto z : s.frame(0)) EXPECT_EQ(std::abs(z), 0.0);
}

TEST(Stft, SineAtBinPeaksAtThatBin) {
  const StftParams p;
  const std::size_t k0 = 37;
  AudioClip clip{std::vector<double>(512), 16000};
  for (std::size_t n = 0; n < 512; ++n) {
    clip.samples[n] = std::sin(2.0 * std::numbers::pi * k0 * n / 512.0);
  }
  const Spectrogram s = stft(clip, p);
  const auto direct = direct_frame(clip.samples, 0, p);
  std::size_t best = 0;
  for (std::size_t k = 0; k < s.bins(); ++k) {
    if (std::abs(s.at(k, 0)) > std::abs(s.at(best, 0))) best = k;
    EXPECT_NEAR(std::abs(s.at(k, 0) - direct[k]), 0.0, 1e-9);
  }
  EXPECT_EQ(best, k0);
}

TEST(Stft, MatchesDirectDft) {
  const StftParams p;
  const AudioClip clip = random_clip(1500, 3);
  const Spectrogram s = stft(clip, p);
  ASSERT_EQ(s.frames(), 7u);
  for (std::size_t m = 0; m < s.frames(); ++m) {
    const auto direct = direct_frame(clip.samples, m * p.hop, p);
    for (std::size_t k = 0; k < s.bins(); ++k) {
      ASSERT_NEAR(std::abs(s.at(k, m) - direct[k]), 0.0, 1e-10) << m << " " << k;
    }
  }
}

TEST(Stft, Linearity) {
  const StftParams p;
  const AudioClip a = random_clip(3000, 1);
  const AudioClip b = random_clip(3000, 2);
  AudioClip sum = a;
  for (std::size_t i = 0; i < sum.size(); ++i) sum.samples[i] += b.samples[i];
  const Spectrogram sa = stft(a, p), sb = stft(b, p), ss = stft(sum, p);
  for (std::size_t m = 0; m < ss.frames(); ++m) {
    for (std::size_t k = 0; k < ss.bins(); ++k) {
      const auto expect = sa.at(k, m) + sb.at(k, m);
      ASSERT_LE(std::abs(ss.at(k, m) - expect), 1e-9 * (std::abs(expect) + 1e-12) + 1e-15);
    }
  }
}

TEST(Stft, Parseval) {
  const StftParams p;
  const AudioClip clip = random_clip(512, 7);
  const Spectrogram s = stft(clip, p);
  const auto w = padded_window(p);
  double time = 0.0;
  for (std::size_t n = 0; n < 512; ++n) time += (w[n] * clip.samples[n]) * (w[n] * clip.samples[n]);
  double freq = 0.0;
  for (std::size_t k = 0; k < s.bins(); ++k) {
    const double weight = (k == 0 || k == s.bins() - 1) ? 1.0 : 2.0;
    freq += weight * power(s.at(k, 0));
  }
  EXPECT_NEAR(freq / 512.0, time, 1e-6 * time);
}

TEST(Stft, FrameLocality) {
  const StftParams p;
  const AudioClip clip = random_clip(5000, 9);
  const Spectrogram base = stft(clip, p);
  const std::size_t m = 12;
  AudioClip changed = clip;
  for (std::size_t i = 0; i < changed.size(); ++i) {
    if (i < m * p.hop || i >= m * p.hop + p.fft_length) changed.samples[i] += 0.5;
  }
  const Spectrogram after = stft(changed, p);
  for (std::size_t k = 0; k < base.bins(); ++k) ASSERT_EQ(after.at(k, m), base.at(k, m));
}

TEST(Stft, PowerIsSumOfSquares) {
  const std::complex<double> z(3.0, -4.0);
  EXPECT_EQ(power(z), 25.0);
}

TEST(RealFft, RejectsNonPowerOfTwoAndSizeMismatch) {
  EXPECT_THROW(RealFft(300), Error);
  const RealFft fft(8);
  std::vector<double> in(8);
  std::vector<std::complex<double>> out(4);
  EXPECT_THROW(fft.forward(in, out), Error);
}
