#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "mehfest/attack.hpp"
#include "mehfest/detector.hpp"
#include "mehfest/error.hpp"

using namespace mehfest;
using namespace mehfest::attack;

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  const double ab = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  const double aa = std::inner_product(a.begin(), a.end(), a.begin(), 0.0);
  const double bb = std::inner_product(b.begin(), b.end(), b.begin(), 0.0);
  return ab / std::sqrt(aa * bb);
}

// Score equal to the sum of samples, with a call counter.
struct SumScore {
  std::size_t* calls;
  double operator()(std::span<const double> x) const {
    ++*calls;
    return std::accumulate(x.begin(), x.end(), 0.0);
  }
};

AttackParams small_params() {
  AttackParams p;
  p.epsilon = 0.01;
  p.learning_rate = 0.001;
  p.nes_samples = 10;
  p.max_iters = 20;
  p.seed = 3;
  return p;
}

AudioClip quiet_clip(std::uint64_t seed) {
  SynthSpec spec;
  spec.duration_s = 0.5;
  spec.n_bursts = 1;
  return synth_audio(spec, 16000, seed);
}

}  // namespace

TEST(Loss, Examples) {
  EXPECT_EQ(loss(1.5, 1.5), 0.0);
  EXPECT_EQ(loss(0.5, 1.5), 1.0);
  EXPECT_EQ(loss(6.5, 1.5), 0.0);
}

TEST(Nes, ConstantLossGivesZeroGradient) {
  const std::vector<double> x(50, 0.1);
  const auto g = nes_gradient([](std::span<const double>) { return 100.0; }, x, 0.0, 50, 0.001, 1);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Nes, QuadraticLossCorrelatesWithTrueGradient) {
  for (std::size_t dim : {20u, 1000u}) {
    std::mt19937_64 rng(dim);
    std::normal_distribution<double> n;
    std::vector<double> x(dim);
    for (double& v : x) v = n(rng);
    // loss(score, 0) = |x|^2 / 2 when score = -|x|^2 / 2.
    auto score = [](std::span<const double> p) {
      return -0.5 * std::inner_product(p.begin(), p.end(), p.begin(), 0.0);
    };
    const std::size_t samples = dim <= 20 ? 50 : 2000;
    const auto g = nes_gradient(score, x, 0.0, samples, 0.001, 5);
    EXPECT_GT(cosine(g, x), 0.5) << dim;
  }
}

TEST(Nes, DeterministicAndExactQueryCount) {
  std::size_t calls = 0;
  const std::vector<double> x(30, 0.0);
  const ScoreFn fn = SumScore{&calls};
  const auto a = nes_gradient(fn, x, 1.0, 20, 0.01, 7);
  EXPECT_EQ(calls, 20u);
  EXPECT_EQ(a, nes_gradient(fn, x, 1.0, 20, 0.01, 7));
  EXPECT_THROW(nes_gradient(fn, x, 1.0, 3, 0.01, 7), Error);
  EXPECT_THROW(nes_gradient(fn, x, 1.0, 4, 0.0, 7), Error);
}

TEST(ClipToBall, Examples) {
  const AudioClip s{{0.0, 0.0, 0.5}, 16000};
  EXPECT_EQ(clip_to_ball(s, s, 0.002).samples, s.samples);
  const AudioClip a{{0.01, -0.01, 0.5005}, 16000};
  const AudioClip c = clip_to_ball(a, s, 0.002);
  EXPECT_EQ(c.samples[0], 0.002);
  EXPECT_EQ(c.samples[1], -0.002);
  EXPECT_EQ(c.samples[2], 0.5005);
  EXPECT_THROW(clip_to_ball(AudioClip{{0.0}, 16000}, s, 0.1), Error);
}

TEST(ClipToBall, ComputedDistanceNeverExceedsEpsilon) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  AudioClip s{std::vector<double>(100000), 16000}, a = s;
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.samples[i] = 0.3 * u(rng);
    a.samples[i] = s.samples[i] + (u(rng) > 0.0 ? 0.02 : -0.02);
  }
  for (double eps : {0.002, 0.01, 0.1}) {
    const AudioClip c = clip_to_ball(a, s, eps);
    for (std::size_t i = 0; i < s.size(); ++i) ASSERT_LE(std::abs(c.samples[i] - s.samples[i]), eps);
  }
}

TEST(Run, AlreadyAcceptedReturnsInputAtIterationZero) {
  std::size_t calls = 0;
  const AudioClip s{std::vector<double>(600, 0.01), 16000};
  const AttackResult r = run(s, SumScore{&calls}, 1.0, small_params());
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.iterations_used, 0u);
  EXPECT_EQ(r.queries, 1u);
  EXPECT_EQ(calls, 1u);
  EXPECT_EQ(r.adversarial.samples, s.samples);
}

TEST(Run, SuccessQueryAccounting) {
  std::size_t calls = 0;
  const AudioClip s{std::vector<double>(4, 0.0), 16000};
  AttackParams p = small_params();
  p.max_iters = 50;
  const AttackResult r = run(s, SumScore{&calls}, 0.002, p);
  ASSERT_TRUE(r.success);
  EXPECT_GE(r.iterations_used, 1u);
  EXPECT_EQ(r.queries, 1 + r.iterations_used * (p.nes_samples + 1));
  EXPECT_EQ(r.queries, calls);
  EXPECT_EQ(r.score_trace.size(), r.iterations_used + 1);
  EXPECT_GE(r.score_trace.back(), 0.002);
}

TEST(Run, FailureQueryAccounting) {
  std::size_t calls = 0;
  const AudioClip s{std::vector<double>(600, 0.0), 16000};
  AttackParams p = small_params();
  const AttackResult r = run(s, SumScore{&calls}, 100.0, p);
  EXPECT_FALSE(r.success);
  EXPECT_EQ(r.iterations_used, p.max_iters);
  EXPECT_EQ(r.queries, 1 + p.max_iters * (p.nes_samples + 1));
  EXPECT_EQ(r.queries, calls);
  EXPECT_EQ(r.score_trace.size(), p.max_iters + 1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    ASSERT_LE(std::abs(r.adversarial.samples[i] - s.samples[i]), p.epsilon);
  }
}

TEST(Run, ZeroEpsilonKeepsInput) {
  std::size_t calls = 0;
  const AudioClip s = quiet_clip(1);
  AttackParams p = small_params();
  p.epsilon = 0.0;
  p.max_iters = 3;
  const AttackResult r = run(s, SumScore{&calls}, 1e9, p);
  EXPECT_EQ(r.adversarial.samples, s.samples);
  EXPECT_FALSE(r.success);
  p.freeze_order = 2;
  EXPECT_EQ(run(s, SumScore{&calls}, 1e9, p).adversarial.samples, s.samples);
}

TEST(Run, ClampsToUnitRange) {
  std::size_t calls = 0;
  const AudioClip s{std::vector<double>(600, 0.9995), 16000};
  const AttackResult r = run(s, SumScore{&calls}, 1e9, small_params());
  for (double v : r.adversarial.samples) ASSERT_LE(v, 1.0);
}

TEST(Run, FreezingKeepsFrozenFramesBitIdentical) {
  const AudioClip s = quiet_clip(2);
  std::size_t calls = 0;
  AttackParams p = small_params();
  p.freeze_order = 2;
  const AttackResult r = run(s, SumScore{&calls}, 1e9, p);
  ASSERT_EQ(r.frozen_frames.size(), 2u);
  for (const FrozenRange& f : r.frozen_frames) {
    EXPECT_EQ(f.begin, f.frame * 160);
    EXPECT_EQ(f.end, f.begin + 512);
    for (std::size_t i = f.begin; i < f.end; ++i) ASSERT_EQ(r.adversarial.samples[i], s.samples[i]);
  }
  const auto before = band_energy_series(stft(s, StftParams{}), 224);
  const auto after = band_energy_series(stft(r.adversarial, StftParams{}), 224);
  for (const FrozenRange& f : r.frozen_frames) EXPECT_EQ(after[f.frame], before[f.frame]);
  EXPECT_LE(*std::min_element(after.begin(), after.end()),
            *std::min_element(before.begin(), before.end()));
  EXPECT_GT(*std::max_element(after.begin(), after.end()),
            *std::max_element(before.begin(), before.end()));
}

TEST(Run, FrozenRangesFollowDetectorPicks) {
  const AudioClip s = quiet_clip(3);
  DetectorProfile profile = DetectorProfile::defaults();
  profile.order = 3;
  const MetricReport report = measure(s, profile);
  const auto ranges = frozen_ranges(s, 3, DetectorGeometry{});
  ASSERT_EQ(ranges.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(ranges[j].frame, report.picks[j].frame);
  EXPECT_TRUE(frozen_ranges(s, 0, DetectorGeometry{}).empty());
}

TEST(Run, DeterministicPerSeed) {
  const AudioClip s = quiet_clip(4);
  std::size_t calls = 0;
  const AttackResult a = run(s, SumScore{&calls}, 1e9, small_params());
  const AttackResult b = run(s, SumScore{&calls}, 1e9, small_params());
  EXPECT_EQ(a.adversarial.samples, b.adversarial.samples);
  EXPECT_EQ(a.score_trace, b.score_trace);
}

TEST(Params, ValidationAndDefaults) {
  AttackParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_DOUBLE_EQ(with_default_learning_rate(p).learning_rate, 0.0002);
  p.nes_samples = 5;
  EXPECT_THROW(p.validate(), Error);
  p = AttackParams{};
  p.max_iters = 0;
  EXPECT_THROW(p.validate(), Error);
  p = AttackParams{};
  p.epsilon = -1.0;
  EXPECT_THROW(p.validate(), Error);
  p = AttackParams{};
  p.nes_sigma = 0.0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Diagnostics, PerturbationStdAtMinimumFrame) {
  const AudioClip s = quiet_clip(5);
  EXPECT_EQ(perturbation_std_at_min_frame(s, s, DetectorGeometry{}), 0.0);
  const AudioClip noisy = add_white_noise(s, 0.003, 9);
  EXPECT_NEAR(perturbation_std_at_min_frame(s, noisy, DetectorGeometry{}), 0.003, 0.0005);
}
