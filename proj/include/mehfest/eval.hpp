#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mehfest/attack.hpp"
#include "mehfest/audio.hpp"
#include "mehfest/defense.hpp"
#include "mehfest/detector.hpp"
#include "mehfest/sv.hpp"

namespace mehfest::eval {

struct Rates {
  double fpr = 0.0;
  double fnr = 0.0;
};

// FPR = share of originals flagged, FNR = share of adversarials passed as
// original. Indeterminate verdicts count as flagged.
Rates fpr_fnr(const DetectorProfile& profile, std::span<const AudioClip> originals,
              std::span<const AudioClip> adversarials);
Rates fpr_fnr(std::span<const Verdict> originals, std::span<const Verdict> adversarials);

double asr(std::span<const attack::AttackResult> results);

struct CdfPoint {
  double value = 0.0;
  double fraction = 0.0;

  friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

// Empirical P(X <= x) at each distinct value, ascending.
std::vector<CdfPoint> cdf(std::span<const double> values);

struct LatencyStats {
  double median_ms = 0.0;
  double mean_ms = 0.0;
  double min_ms = 0.0;
  std::size_t repeats = 0;
};

LatencyStats measure_detect_latency(const AudioClip& clip, const DetectorProfile& profile,
                                    std::size_t repeats);

// ---------------------------------------------------------------------------
// Corpora

enum class Label { Legit, Impostor };
const char* to_string(Label label);
Label parse_label(const std::string& text);

struct LabeledClip {
  std::string name;
  AudioClip clip;
  Label label = Label::Legit;
};

using Corpus = std::vector<LabeledClip>;

// Desk-scale synthetic stand-in for a two-speaker SV data set. Each voice is
// a set of burst frequencies; clips vary in background-noise level.
struct SyntheticSetup {
  int sample_rate = kDefaultSampleRate;
  double duration_s = 1.0;
  int n_bursts = 2;
  double gap_fraction = 0.4;
  double burst_amplitude = 0.3;
  double freq_jitter = 0.05;
  double burst_noise_sigma = 0.01;
  double floor_sigma_min = 0.5e-4;
  double floor_sigma_max = 1.5e-4;
  // Floor range for SV training clips (enrollment and background), drawn
  // log-uniformly. A wide range keeps the floor level from carrying speaker
  // evidence.
  double train_floor_sigma_min = 5e-5;
  double train_floor_sigma_max = 3e-3;
  std::vector<double> speaker_freqs = {300.0, 1200.0, 2400.0};
  std::vector<double> impostor_freqs = {315.0, 1260.0, 2520.0};
  std::vector<std::vector<double>> background_voices = {
      {270.0, 1080.0, 2160.0}, {285.0, 1140.0, 2280.0}, {312.0, 1248.0, 2496.0},
      {330.0, 1320.0, 2640.0}};
  std::size_t enrollment_clips = 40;
  std::size_t clips_per_background_voice = 20;
  std::size_t dev_clips = 20;  // per class, for the EER threshold
};

SynthSpec voice_spec(const SyntheticSetup& setup, const std::vector<double>& freqs,
                     double floor_sigma);

// Clips of one voice with per-clip floor noise drawn from the setup range.
std::vector<AudioClip> synth_voice(const SyntheticSetup& setup, const std::vector<double>& freqs,
                                   std::size_t count, std::uint64_t seed);
// Same, with floor noise drawn log-uniformly from the training range.
std::vector<AudioClip> synth_training_voice(const SyntheticSetup& setup,
                                            const std::vector<double>& freqs, std::size_t count,
                                            std::uint64_t seed);

struct TrainedSystem {
  sv::SvModel model;
  sv::EerResult eer;
};

// Trains speaker/background GMMs and sets theta at the EER point on
// held-out development clips.
TrainedSystem train_synthetic_system(const SyntheticSetup& setup,
                                     const sv::GmmTrainOptions& options, std::uint64_t seed);

Corpus synthetic_corpus(const SyntheticSetup& setup, std::size_t legit, std::size_t impostor,
                        std::uint64_t seed);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded random split; train receives round(fraction * n) items.
Split split_indices(std::size_t n, double train_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Attacker-vs-defender game

struct ExperimentConfig {
  Corpus corpus;
  sv::SvModel sv;
  double train_fraction = 0.8;
  DetectorProfile detector = DetectorProfile::defaults();
  double calibration_k = 3.0;
  std::vector<double> epsilons = {0.002};
  std::vector<std::size_t> attack_orders = {0, 1};
  // Detector orders evaluated per cell; empty means n_attack + 1.
  std::vector<std::size_t> detector_orders;
  attack::AttackParams attack{};
  double lr_ratio = 0.1;  // learning rate = lr_ratio * epsilon
  defense::NoiseDefenseParams defense{};
  std::map<std::size_t, double> threshold_overrides;  // order -> D
  std::size_t max_attacks = 0;  // 0 = every rejected impostor in the test split
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool record_timing = true;  // false zeroes wall-clock columns

  void validate() const;
};

struct ReportRow {
  double epsilon = 0.0;
  std::size_t n_attack = 0;
  std::size_t n_detector = 0;
  double threshold = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  double asr = 0.0;
  double defended_asr = 0.0;
  double mean_e_original = 0.0;
  double mean_e_adversarial = 0.0;
  double mean_iterations = 0.0;
  std::size_t attacks = 0;
  double attack_seconds = 0.0;
  double detect_ms = 0.0;
  std::string error;
};

struct Report {
  std::vector<ReportRow> rows;
};

// One (epsilon, n_attack) cell with the clips it produced.
struct GameCell {
  double epsilon = 0.0;
  std::size_t n_attack = 0;
  std::vector<std::size_t> sources;  // corpus indices of the attacked clips
  std::vector<attack::AttackResult> results;
  std::string error;
};

struct GameResult {
  Report report;
  std::vector<GameCell> cells;
  DetectorProfile calibrated;  // thresholds for every evaluated order
  Split split;
};

GameResult run_game(const ExperimentConfig& config);

// Runs fn(i) for i in [0, count) over `jobs` threads.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

// CSV output; floats carry 9 significant digits.
void write_report_csv(const Report& report, std::ostream& out);
void write_cdf_csv(std::span<const CdfPoint> points, std::ostream& out);
std::string format_float(double value);

}  // namespace mehfest::eval
