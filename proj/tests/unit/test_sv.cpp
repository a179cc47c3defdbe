#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "mehfest/error.hpp"
#include "mehfest/eval.hpp"
#include "mehfest/sv.hpp"

using namespace mehfest;
using namespace mehfest::sv;

namespace {

AudioClip noise_clip(std::size_t n, std::uint64_t seed, double sigma) {
  return add_white_noise(AudioClip{std::vector<double>(n, 0.0), 16000}, sigma, seed);
}

FeatureMatrix gaussian_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> a(-1.0, 0.5), b(2.0, 0.8);
  FeatureMatrix f;
  f.rows = rows;
  f.cols = cols;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) f.values.push_back(r % 3 == 0 ? b(rng) : a(rng));
  }
  return f;
}

double total_ll(const Gmm& g, const FeatureMatrix& f) {
  return g.mean_log_likelihood(f) * static_cast<double>(f.rows);
}

}  // namespace

TEST(Features, ZeroClipHitsFloor) {
  const AudioClip z{std::vector<double>(3000, 0.0), 16000};
  const FeatureMatrix f = extract_features(z, FeatureParams{});
  EXPECT_EQ(f.rows, frame_count(3000, StftParams{}));
  EXPECT_EQ(f.cols, 20u);
  for (double v : f.values) ASSERT_EQ(v, std::log(1e-10));
}

TEST(Features, DoublingAmplitudeAddsLogFour) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const AudioClip a = noise_clip(4000, seed, 0.05);
    AudioClip b = a;
    for (double& s : b.samples) s *= 2.0;
    const FeatureMatrix fa = extract_features(a, FeatureParams{});
    const FeatureMatrix fb = extract_features(b, FeatureParams{});
    for (std::size_t i = 0; i < fa.values.size(); ++i) {
      ASSERT_NEAR(fb.values[i] - fa.values[i], std::log(4.0), 1e-6);
    }
  }
}

TEST(Features, TooShortClipThrows) {
  EXPECT_THROW(extract_features(AudioClip{std::vector<double>(100, 0.0), 16000}, FeatureParams{}),
               Error);
}

TEST(Features, FilterbankCoversBandWithPositiveWeights) {
  const MelFilterbank bank(FeatureParams{}, 16000);
  EXPECT_EQ(bank.filters(), 20u);
  for (std::size_t f = 0; f < bank.filters(); ++f) {
    ASSERT_FALSE(bank.weights(f).empty());
    for (double w : bank.weights(f)) ASSERT_GE(w, 0.0);
    if (f > 0) ASSERT_GE(bank.first_bin(f), bank.first_bin(f - 1));
  }
  FeatureParams bad;
  bad.fmax_hz = 9000.0;
  EXPECT_THROW(MelFilterbank(bad, 16000), Error);
}

TEST(Gmm, DensityIntegratesToOneIn1D) {
  const Gmm g({0.3, 0.7}, {-1.0, 2.0}, {0.25, 1.5}, 1);
  double acc = 0.0;
  const double h = 1e-3;
  for (double x = -12.0; x <= 14.0; x += h) {
    const double v[1] = {x};
    acc += std::exp(g.log_density(v)) * h;
  }
  EXPECT_NEAR(acc, 1.0, 1e-3);
}

TEST(Gmm, ConstructorValidates) {
  EXPECT_THROW(Gmm({0.5, 0.6}, {0.0, 0.0}, {1.0, 1.0}, 1), Error);
  EXPECT_THROW(Gmm({1.0}, {0.0}, {0.0}, 1), Error);
  EXPECT_THROW(Gmm({1.0}, {0.0, 1.0}, {1.0}, 1), Error);
}

TEST(Gmm, SingleComponentIsClosedForm) {
  const FeatureMatrix f = gaussian_rows(300, 4, 1);
  GmmTrainOptions opt;
  opt.n_components = 1;
  opt.em_iters = 5;
  const Gmm g = train_gmm(f, opt);
  ASSERT_EQ(g.components(), 1u);
  EXPECT_NEAR(g.weights()[0], 1.0, 1e-12);
  for (std::size_t d = 0; d < 4; ++d) {
    double mean = 0.0;
    for (std::size_t r = 0; r < f.rows; ++r) mean += f.row(r)[d];
    mean /= static_cast<double>(f.rows);
    double var = 0.0;
    for (std::size_t r = 0; r < f.rows; ++r) var += (f.row(r)[d] - mean) * (f.row(r)[d] - mean);
    var /= static_cast<double>(f.rows);
    EXPECT_NEAR(g.means()[d], mean, 1e-10);
    EXPECT_NEAR(g.variances()[d], std::max(var, opt.variance_floor), 1e-10);
  }
}

TEST(Gmm, EmIsMonotone) {
  const FeatureMatrix f = gaussian_rows(400, 3, 2);
  GmmTrainOptions opt;
  opt.n_components = 4;
  Gmm g = initialize_gmm(f, opt);
  double prev = total_ll(g, f);
  for (int it = 0; it < 30; ++it) {
    em_step(g, f, opt.variance_floor);
    const double now = total_ll(g, f);
    ASSERT_GE(now, prev - 1e-8) << it;
    prev = now;
  }
}

TEST(Gmm, WeightsSumToOneAndVariancesFloored) {
  const FeatureMatrix f = gaussian_rows(200, 5, 3);
  GmmTrainOptions opt;
  opt.variance_floor = 0.3;
  const Gmm g = train_gmm(f, opt);
  EXPECT_NEAR(std::accumulate(g.weights().begin(), g.weights().end(), 0.0), 1.0, 1e-9);
  for (double v : g.variances()) EXPECT_GE(v, 0.3);
}

TEST(Gmm, FixedSeedIsReproducible) {
  const FeatureMatrix f = gaussian_rows(200, 3, 4);
  GmmTrainOptions opt;
  opt.seed = 17;
  const Gmm a = train_gmm(f, opt), b = train_gmm(f, opt);
  EXPECT_EQ(a.weights(), b.weights());
  EXPECT_EQ(a.means(), b.means());
  EXPECT_EQ(a.variances(), b.variances());
}

TEST(Gmm, IdenticalFramesDoNotCrash) {
  FeatureMatrix f;
  f.rows = 50;
  f.cols = 3;
  f.values.assign(150, 1.25);
  const Gmm g = train_gmm(f, GmmTrainOptions{});
  for (double v : g.variances()) EXPECT_GE(v, 1e-6);
  EXPECT_TRUE(std::isfinite(g.mean_log_likelihood(f)));
}

TEST(Gmm, TooFewFramesThrows) {
  const FeatureMatrix f = gaussian_rows(3, 2, 5);
  EXPECT_THROW(train_gmm(f, GmmTrainOptions{}), Error);
}

TEST(Score, IdenticalModelsScoreZero) {
  const FeatureMatrix f = extract_features(noise_clip(8000, 1, 0.01), FeatureParams{});
  SvModel m;
  m.speaker = train_gmm(f, GmmTrainOptions{});
  m.background = m.speaker;
  for (std::uint64_t s = 0; s < 3; ++s) EXPECT_EQ(score(m, noise_clip(5000, 10 + s, 0.02)), 0.0);
}

TEST(Score, SpeakerOutscoresOtherVoice) {
  eval::SyntheticSetup setup;
  const auto enroll = eval::synth_training_voice(setup, setup.speaker_freqs, 20, 1);
  std::vector<AudioClip> background;
  for (std::size_t v = 0; v < setup.background_voices.size(); ++v) {
    const auto c = eval::synth_training_voice(setup, setup.background_voices[v], 10, 2 + v);
    background.insert(background.end(), c.begin(), c.end());
  }
  const SvModel model = train_sv(enroll, background, FeatureParams{}, GmmTrainOptions{});
  const auto own = eval::synth_voice(setup, setup.speaker_freqs, 20, 50);
  const auto other = eval::synth_voice(setup, {500.0, 1700.0, 3100.0}, 20, 51);
  const Scorer scorer(model);
  int wins = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const double a = scorer(own[i]);
    ASSERT_TRUE(std::isfinite(a));
    ASSERT_EQ(a, score(model, own[i]));
    wins += a > scorer(other[i]);
  }
  EXPECT_GE(wins, 18);
}

TEST(Eer, SeparatedScores) {
  const std::vector<double> legit{1, 2, 3}, impostor{-3, -2, -1};
  const EerResult r = set_threshold_eer(legit, impostor);
  EXPECT_EQ(r.theta, 1.0);
  EXPECT_EQ(r.eer, 0.0);
  EXPECT_EQ(r.far, 0.0);
  EXPECT_EQ(r.frr, 0.0);
}

TEST(Eer, OneOverlappingPoint) {
  const std::vector<double> legit{0, 2}, impostor{-2, 0};
  EXPECT_EQ(false_acceptance_rate(impostor, 0.0), 0.5);
  EXPECT_EQ(false_rejection_rate(legit, 0.0), 0.0);
  const EerResult r = set_threshold_eer(legit, impostor);
  EXPECT_EQ(r.eer, 0.25);
  EXPECT_EQ(r.far, 0.0);
  EXPECT_EQ(r.frr, 0.5);
  EXPECT_GT(r.theta, 0.0);
}

TEST(Eer, IndistinguishableScoresNearHalf) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  std::vector<double> a(2000), b(2000);
  for (double& v : a) v = g(rng);
  for (double& v : b) v = g(rng);
  EXPECT_NEAR(set_threshold_eer(a, b).eer, 0.5, 0.05);
}

TEST(Eer, EmptyListThrowsAndModelThetaIsSet) {
  const std::vector<double> some{1.0}, none;
  EXPECT_THROW(set_threshold_eer(some, none), Error);
  EXPECT_THROW(set_threshold_eer(none, some), Error);
  SvModel m;
  const std::vector<double> legit{1, 2, 3}, impostor{-3, -2, -1};
  set_threshold_eer(m, legit, impostor);
  EXPECT_EQ(m.theta, 1.0);
  EXPECT_TRUE(m.accepts(1.0));
  EXPECT_FALSE(m.accepts(0.999));
}
