#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mehfest/audio.hpp"
#include "mehfest/error.hpp"

namespace fs = std::filesystem;
using namespace mehfest;

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

// Hand-built RIFF/WAVE bytes with arbitrary format tag and channel count.
std::string wav_bytes(const std::vector<std::int16_t>& pcm, std::uint16_t channels = 1,
                      std::uint16_t format = 1, std::uint16_t bits = 16, int rate = 16000) {
  const auto data_bytes = static_cast<std::uint32_t>(pcm.size() * 2);
  std::string out = "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(rate));
  put_u32(out, static_cast<std::uint32_t>(rate) * channels * bits / 8);
  put_u16(out, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_bytes);
  for (auto v : pcm) put_u16(out, static_cast<std::uint16_t>(v));
  return out;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mehfest_audio_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& bytes) {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << bytes;
    return p;
  }

  fs::path dir_;
};

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::Parse;
}

}  // namespace

using WavTest = TempDir;

TEST_F(WavTest, ZerosLoadAsZeros) {
  const AudioClip clip = load_wav(write("z.wav", wav_bytes({0, 0, 0})));
  EXPECT_EQ(clip.samples, (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(clip.sample_rate, 16000);
}

TEST_F(WavTest, ExtremesMapByDivisionBy32768) {
  const AudioClip clip = load_wav(write("e.wav", wav_bytes({-32768, 32767})));
  ASSERT_EQ(clip.size(), 2u);
  EXPECT_EQ(clip.samples[0], -1.0);
  EXPECT_EQ(clip.samples[1], 32767.0 / 32768.0);
}

TEST_F(WavTest, StereoIsAveragedToMono) {
  const AudioClip clip = load_wav(write("s.wav", wav_bytes({1000, 3000, -200, 200}, 2)));
  ASSERT_EQ(clip.size(), 2u);
  EXPECT_DOUBLE_EQ(clip.samples[0], 2000.0 / 32768.0);
  EXPECT_DOUBLE_EQ(clip.samples[1], 0.0);
}

TEST_F(WavTest, SampleRateComesFromHeader) {
  EXPECT_EQ(load_wav(write("r.wav", wav_bytes({1}, 1, 1, 16, 8000))).sample_rate, 8000);
}

TEST_F(WavTest, ErrorsAreDistinct) {
  EXPECT_EQ(kind_of([&] { load_wav(dir_ / "missing.wav"); }), ErrorKind::FileNotFound);
  const fs::path flt = write("f.wav", wav_bytes({0, 0}, 1, 3, 32));
  EXPECT_EQ(kind_of([&] { load_wav(flt); }), ErrorKind::UnsupportedFormat);
  const fs::path empty = write("n.wav", wav_bytes({}));
  EXPECT_EQ(kind_of([&] { load_wav(empty); }), ErrorKind::EmptyData);
  const fs::path junk = write("j.wav", "not a wav file at all");
  EXPECT_EQ(kind_of([&] { load_wav(junk); }), ErrorKind::UnsupportedFormat);
}

TEST_F(WavTest, SaveExamples) {
  EXPECT_EQ(sample_to_pcm16(0.0), 0);
  EXPECT_EQ(sample_to_pcm16(1.0), 32767);
  EXPECT_EQ(sample_to_pcm16(0.5), 16384);
  EXPECT_EQ(sample_to_pcm16(-1.0), -32768);
}

TEST_F(WavTest, SaveRejectsOutOfRangeAndBadPath) {
  AudioClip loud{{0.0, 1.5}, 16000};
  EXPECT_EQ(kind_of([&] { save_wav(loud, dir_ / "l.wav"); }), ErrorKind::InvalidArgument);
  AudioClip ok{{0.0}, 16000};
  EXPECT_EQ(kind_of([&] { save_wav(ok, dir_ / "no" / "such" / "dir.wav"); }), ErrorKind::Io);
}

TEST_F(WavTest, RoundTripIsIdentityOnQuantizedClips) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> pcm(-32768, 32767);
  AudioClip clip;
  clip.sample_rate = 22050;
  for (int i = 0; i < 4000; ++i) clip.samples.push_back(pcm16_to_sample(static_cast<std::int16_t>(pcm(rng))));
  clip.samples.push_back(-1.0);
  clip.samples.push_back(32767.0 / 32768.0);
  const fs::path p = dir_ / "rt.wav";
  save_wav(clip, p);
  const AudioClip back = load_wav(p);
  EXPECT_EQ(back.sample_rate, clip.sample_rate);
  EXPECT_EQ(back.samples, clip.samples);
}

TEST(Synth, SilentSpecGivesZeros) {
  SynthSpec spec;
  spec.burst_amplitude = 0.0;
  spec.floor_noise_sigma = 0.0;
  const AudioClip clip = synth_audio(spec, 16000, 3);
  EXPECT_EQ(clip.size(), 32000u);
  for (double s : clip.samples) ASSERT_EQ(s, 0.0);
}

TEST(Synth, GapTimeCoversFraction) {
  SynthSpec spec;
  spec.duration_s = 4.0;
  spec.gap_fraction = 0.5;
  std::size_t gap = 0;
  for (auto [b, e] : synth_gap_ranges(spec, 16000)) gap += e - b;
  EXPECT_GE(gap, 32000u);

  spec.floor_noise_sigma = 0.0;
  const AudioClip clip = synth_audio(spec, 16000, 9);
  for (auto [b, e] : synth_gap_ranges(spec, 16000)) {
    for (std::size_t i = b; i < e; ++i) ASSERT_EQ(clip.samples[i], 0.0);
  }
}

TEST(Synth, DeterministicPerSeed) {
  SynthSpec spec;
  spec.freq_jitter = 0.05;
  spec.burst_noise_sigma = 0.01;
  EXPECT_EQ(synth_audio(spec, 16000, 11).samples, synth_audio(spec, 16000, 11).samples);
  EXPECT_NE(synth_audio(spec, 16000, 11).samples, synth_audio(spec, 16000, 12).samples);
}

TEST(Synth, PeakWithinUnit) {
  SynthSpec spec;
  spec.burst_amplitude = 1.0;
  spec.burst_noise_sigma = 0.2;
  for (double s : synth_audio(spec, 16000, 1).samples) ASSERT_LE(std::abs(s), 1.0);
}

TEST(Synth, GapSamplesStayWithinSixSigma) {
  SynthSpec spec;
  spec.floor_noise_sigma = 1e-4;
  const auto gaps = synth_gap_ranges(spec, 16000);
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const AudioClip clip = synth_audio(spec, 16000, seed);
    bool all = true;
    for (auto [b, e] : gaps) {
      for (std::size_t i = b; i < e; ++i) all = all && std::abs(clip.samples[i]) <= 6e-4;
    }
    good += all;
  }
  EXPECT_GE(good, 99);
}

TEST(Synth, TooShortDurationThrows) {
  SynthSpec spec;
  spec.duration_s = 0.01;
  spec.n_bursts = 5;
  EXPECT_EQ(kind_of([&] { synth_audio(spec, 16000, 0); }), ErrorKind::TooShort);
}

TEST(Synth, InvalidSpecThrows) {
  SynthSpec spec;
  spec.gap_fraction = 1.0;
  EXPECT_THROW(synth_audio(spec, 16000, 0), Error);
  spec.gap_fraction = 0.4;
  spec.burst_freqs = {9000.0};
  EXPECT_THROW(synth_audio(spec, 16000, 0), Error);
  spec.burst_freqs = {440.0};
  spec.floor_noise_sigma = -1.0;
  EXPECT_THROW(synth_audio(spec, 16000, 0), Error);
}

TEST(WhiteNoise, ZeroSigmaIsIdentity) {
  AudioClip clip{{0.1, -0.2, 0.3}, 16000};
  EXPECT_EQ(add_white_noise(clip, 0.0, 4).samples, clip.samples);
}

TEST(WhiteNoise, StatisticsMatchSigma) {
  AudioClip zero{std::vector<double>(80000, 0.0), 16000};
  const AudioClip noisy = add_white_noise(zero, 0.003, 21);
  const double n = static_cast<double>(noisy.size());
  const double mean = std::accumulate(noisy.samples.begin(), noisy.samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : noisy.samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  EXPECT_NEAR(sd, 0.003, 0.02 * 0.003);
  EXPECT_LT(std::abs(mean), 3.0 * 0.003 / std::sqrt(n));
}

TEST(WhiteNoise, SameSeedSameNoiseAndNoClamp) {
  AudioClip clip{std::vector<double>(1000, 0.999), 16000};
  const AudioClip a = add_white_noise(clip, 0.01, 8);
  EXPECT_EQ(a.samples, add_white_noise(clip, 0.01, 8).samples);
  bool above = false;
  for (double s : a.samples) above = above || s > 1.0;
  EXPECT_TRUE(above);
  for (double s : clamp_unit(a).samples) ASSERT_LE(s, 1.0);
}

TEST(WhiteNoise, NegativeSigmaThrows) {
  AudioClip clip{{0.0}, 16000};
  EXPECT_THROW(add_white_noise(clip, -0.1, 0), Error);
}

TEST(Clip, ValidateRejectsBadClips) {
  EXPECT_THROW((AudioClip{{0.0}, 0}.validate()), Error);
  EXPECT_THROW((AudioClip{{std::nan("")}, 16000}.validate()), Error);
  EXPECT_NO_THROW((AudioClip{{0.0}, 16000}.validate()));
}
