#include "mehfest/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "mehfest/error.hpp"
#include "mehfest/random.hpp"

namespace mehfest::eval {

Rates fpr_fnr(std::span<const Verdict> originals, std::span<const Verdict> adversarials) {
  if (originals.empty() || adversarials.empty()) {
    throw Error(ErrorKind::InvalidArgument, "FPR/FNR need non-empty original and adversarial sets");
  }
  const auto flagged = std::count_if(originals.begin(), originals.end(),
                                     [](Verdict v) { return v != Verdict::Original; });
  const auto missed = std::count_if(adversarials.begin(), adversarials.end(),
                                    [](Verdict v) { return v == Verdict::Original; });
  return {static_cast<double>(flagged) / static_cast<double>(originals.size()),
          static_cast<double>(missed) / static_cast<double>(adversarials.size())};
}

Rates fpr_fnr(const DetectorProfile& profile, std::span<const AudioClip> originals,
              std::span<const AudioClip> adversarials) {
  auto verdicts = [&](std::span<const AudioClip> clips) {
    std::vector<Verdict> v;
    v.reserve(clips.size());
    for (const auto& c : clips) v.push_back(detect(c, profile).verdict);
    return v;
  };
  if (originals.empty() || adversarials.empty()) {
    throw Error(ErrorKind::InvalidArgument, "FPR/FNR need non-empty original and adversarial sets");
  }
  const auto o = verdicts(originals);
  const auto a = verdicts(adversarials);
  return fpr_fnr(o, a);
}

double asr(std::span<const attack::AttackResult> results) {
  if (results.empty()) throw Error(ErrorKind::InvalidArgument, "ASR needs at least one attack");
  const auto wins = std::count_if(results.begin(), results.end(),
                                  [](const attack::AttackResult& r) { return r.success; });
  return static_cast<double>(wins) / static_cast<double>(results.size());
}

std::vector<CdfPoint> cdf(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "CDF of an empty set");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.push_back({sorted[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

LatencyStats measure_detect_latency(const AudioClip& clip, const DetectorProfile& profile,
                                    std::size_t repeats) {
  if (repeats == 0) throw Error(ErrorKind::InvalidArgument, "repeats must be >= 1");
  std::vector<double> ms(repeats);
  for (auto& t : ms) {
    const auto start = std::chrono::steady_clock::now();
    const Detection d = detect(clip, profile);
    const auto stop = std::chrono::steady_clock::now();
    if (d.verdict == Verdict::Indeterminate) {
      throw Error(ErrorKind::Infeasible, "latency clip yields an indeterminate verdict");
    }
    t = std::chrono::duration<double, std::milli>(stop - start).count();
  }
  LatencyStats s;
  s.repeats = repeats;
  s.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(repeats);
  std::sort(ms.begin(), ms.end());
  s.min_ms = ms.front();
  s.median_ms = repeats % 2 == 1 ? ms[repeats / 2] : 0.5 * (ms[repeats / 2 - 1] + ms[repeats / 2]);
  return s;
}

// ---------------------------------------------------------------------------

const char* to_string(Label label) { return label == Label::Legit ? "legit" : "impostor"; }

Label parse_label(const std::string& text) {
  if (text == "legit" || text == "legitimate") return Label::Legit;
  if (text == "impostor" || text == "illegal") return Label::Impostor;
  throw Error(ErrorKind::Parse, "unknown label '" + text + "' (expected legit or impostor)");
}

SynthSpec voice_spec(const SyntheticSetup& setup, const std::vector<double>& freqs,
                     double floor_sigma) {
  SynthSpec spec;
  spec.duration_s = setup.duration_s;
  spec.n_bursts = setup.n_bursts;
  spec.burst_freqs = freqs;
  spec.burst_amplitude = setup.burst_amplitude;
  spec.gap_fraction = setup.gap_fraction;
  spec.floor_noise_sigma = floor_sigma;
  spec.freq_jitter = setup.freq_jitter;
  spec.burst_noise_sigma = setup.burst_noise_sigma;
  return spec;
}

std::vector<AudioClip> synth_voice(const SyntheticSetup& setup, const std::vector<double>& freqs,
                                   std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> level(setup.floor_sigma_min, setup.floor_sigma_max);
  std::vector<AudioClip> clips;
  clips.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double floor_sigma = level(rng);
    clips.push_back(synth_audio(voice_spec(setup, freqs, floor_sigma), setup.sample_rate,
                                mix_seed(seed, i + 1)));
  }
  return clips;
}

std::vector<AudioClip> synth_training_voice(const SyntheticSetup& setup,
                                            const std::vector<double>& freqs, std::size_t count,
                                            std::uint64_t seed) {
  if (!(setup.train_floor_sigma_min > 0.0) ||
      setup.train_floor_sigma_max < setup.train_floor_sigma_min) {
    throw Error(ErrorKind::InvalidArgument, "training floor range must satisfy 0 < min <= max");
  }
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> level(std::log(setup.train_floor_sigma_min),
                                               std::log(setup.train_floor_sigma_max));
  std::vector<AudioClip> clips;
  clips.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double floor_sigma = std::exp(level(rng));
    clips.push_back(synth_audio(voice_spec(setup, freqs, floor_sigma), setup.sample_rate,
                                mix_seed(seed, i + 1)));
  }
  return clips;
}

TrainedSystem train_synthetic_system(const SyntheticSetup& setup,
                                     const sv::GmmTrainOptions& options, std::uint64_t seed) {
  const auto enrollment = synth_training_voice(setup, setup.speaker_freqs, setup.enrollment_clips,
                                               mix_seed(seed, 100));
  std::vector<AudioClip> background;
  for (std::size_t v = 0; v < setup.background_voices.size(); ++v) {
    auto clips = synth_training_voice(setup, setup.background_voices[v],
                                      setup.clips_per_background_voice, mix_seed(seed, 200 + v));
    background.insert(background.end(), clips.begin(), clips.end());
  }
  sv::FeatureParams features;
  TrainedSystem out;
  out.model = sv::train_sv(enrollment, background, features, options);

  const sv::Scorer scorer(out.model);
  std::vector<double> legit, impostor;
  for (const auto& c : synth_voice(setup, setup.speaker_freqs, setup.dev_clips, mix_seed(seed, 300))) {
    legit.push_back(scorer(c));
  }
  for (const auto& c :
       synth_voice(setup, setup.impostor_freqs, setup.dev_clips, mix_seed(seed, 301))) {
    impostor.push_back(scorer(c));
  }
  out.eer = sv::set_threshold_eer(out.model, legit, impostor);
  return out;
}

Corpus synthetic_corpus(const SyntheticSetup& setup, std::size_t legit, std::size_t impostor,
                        std::uint64_t seed) {
  Corpus corpus;
  auto add = [&](const std::vector<AudioClip>& clips, Label label, const char* prefix) {
    for (std::size_t i = 0; i < clips.size(); ++i) {
      corpus.push_back({std::string(prefix) + std::to_string(i), clips[i], label});
    }
  };
  add(synth_voice(setup, setup.speaker_freqs, legit, mix_seed(seed, 400)), Label::Legit, "legit_");
  add(synth_voice(setup, setup.impostor_freqs, impostor, mix_seed(seed, 401)), Label::Impostor,
      "impostor_");
  return corpus;
}

Split split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

// ---------------------------------------------------------------------------

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  const std::size_t n = std::min(jobs, count);
  workers.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

void ExperimentConfig::validate() const {
  if (corpus.empty()) throw Error(ErrorKind::InvalidArgument, "empty corpus");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "train fraction must lie in (0, 1)");
  }
  if (epsilons.empty() || attack_orders.empty()) {
    throw Error(ErrorKind::InvalidArgument, "attack grid is empty");
  }
  detector.validate();
  defense.validate();
}

namespace {

std::vector<std::size_t> orders_for(const ExperimentConfig& config, std::size_t n_attack) {
  if (config.detector_orders.empty()) return {n_attack + 1};
  return config.detector_orders;
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

GameResult run_game(const ExperimentConfig& config) {
  config.validate();
  GameResult game;
  game.split = split_indices(config.corpus.size(), config.train_fraction, config.seed);
  if (game.split.train.size() < 2 || game.split.test.empty()) {
    throw Error(ErrorKind::InvalidArgument, "corpus too small for a train/test split");
  }

  std::size_t max_order = 1;
  for (std::size_t n : config.attack_orders) {
    for (std::size_t j : orders_for(config, n)) max_order = std::max(max_order, j);
  }

  DetectorProfile geometry = config.detector;
  geometry.order = max_order;
  std::vector<AudioClip> train;
  for (std::size_t i : game.split.train) train.push_back(config.corpus[i].clip);
  game.calibrated = calibrate_profile(train, geometry, config.calibration_k);
  for (const auto& [order, d] : config.threshold_overrides) {
    if (order >= 1 && order <= game.calibrated.thresholds.size()) {
      game.calibrated.thresholds[order - 1] = d;
    }
  }

  // E_1..E_max for every held-out original.
  std::vector<std::vector<double>> test_energies;
  for (std::size_t i : game.split.test) {
    std::vector<double> e;
    try {
      for (const Pick& p : measure(config.corpus[i].clip, game.calibrated).picks) e.push_back(p.energy);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::Infeasible) throw;
    }
    test_energies.push_back(std::move(e));
  }

  // Held-out impostor clips the SV rejects; an accepted clip needs no attack.
  const sv::Scorer scorer(config.sv);
  std::vector<std::size_t> sources;
  for (std::size_t i : game.split.test) {
    if (config.corpus[i].label != Label::Impostor) continue;
    if (config.sv.accepts(scorer(config.corpus[i].clip))) continue;
    sources.push_back(i);
  }
  std::sort(sources.begin(), sources.end());
  if (config.max_attacks > 0 && sources.size() > config.max_attacks) {
    sources.resize(config.max_attacks);
  }
  attack::DetectorGeometry geom{config.detector.stft, config.detector.freq_threshold_bin,
                                config.detector.spacing};

  for (std::size_t ei = 0; ei < config.epsilons.size(); ++ei) {
    for (std::size_t n_attack : config.attack_orders) {
      GameCell cell;
      cell.epsilon = config.epsilons[ei];
      cell.n_attack = n_attack;
      const std::uint64_t cell_seed = mix_seed(mix_seed(config.seed, 1000 + ei), n_attack);
      const auto started = std::chrono::steady_clock::now();
      try {
        if (sources.empty()) throw Error(ErrorKind::InvalidArgument, "no rejected impostor clips in the test split");
        attack::AttackParams params = config.attack;
        params.epsilon = cell.epsilon;
        params.learning_rate = config.lr_ratio * cell.epsilon;
        params.freeze_order = n_attack;
        params.geometry = geom;
        cell.sources = sources;
        cell.results.resize(sources.size());
        parallel_for(sources.size(), config.jobs, [&](std::size_t k) {
          attack::AttackParams p = params;
          p.seed = mix_seed(cell_seed, sources[k]);
          cell.results[k] = attack::run(config.corpus[sources[k]].clip,
                                        [&](std::span<const double> x) { return scorer(x); },
                                        config.sv.theta, p);
        });
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      const double attack_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

      for (std::size_t order : orders_for(config, n_attack)) {
        ReportRow row;
        row.epsilon = cell.epsilon;
        row.n_attack = n_attack;
        row.n_detector = order;
        row.attack_seconds = config.record_timing ? attack_seconds : 0.0;
        row.attacks = cell.results.size();
        if (!cell.error.empty()) {
          row.error = cell.error;
          game.report.rows.push_back(row);
          continue;
        }
        try {
          row.threshold = game.calibrated.thresholds.at(order - 1);
          std::vector<Verdict> orig_v, adv_v;
          std::vector<double> orig_e, adv_e;
          for (const auto& e : test_energies) {
            if (e.size() < order) {
              orig_v.push_back(Verdict::Indeterminate);
              continue;
            }
            orig_e.push_back(e[order - 1]);
            orig_v.push_back(classify(e[order - 1], row.threshold));
          }
          DetectorProfile profile = game.calibrated;
          profile.order = order;
          double detect_ms = 0.0;
          for (const auto& r : cell.results) {
            const auto t0 = std::chrono::steady_clock::now();
            const Detection d = detect(r.adversarial, profile);
            detect_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            adv_v.push_back(d.verdict);
            if (d.verdict != Verdict::Indeterminate) adv_e.push_back(d.report.picks.back().energy);
          }
          const Rates rates = fpr_fnr(orig_v, adv_v);
          row.fpr = rates.fpr;
          row.fnr = rates.fnr;
          row.asr = asr(cell.results);
          row.mean_e_original = mean_of(orig_e);
          row.mean_e_adversarial = mean_of(adv_e);
          if (config.record_timing) row.detect_ms = detect_ms / static_cast<double>(cell.results.size());
          double iters = 0.0;
          for (const auto& r : cell.results) iters += static_cast<double>(r.iterations_used);
          row.mean_iterations = iters / static_cast<double>(cell.results.size());
          if (config.defense.noise_sigma > 0.0) {
            defense::NoiseDefense guard(config.sv, config.defense, mix_seed(cell_seed, 77));
            std::size_t accepted = 0;
            for (const auto& r : cell.results) accepted += guard.accepts(r.adversarial) ? 1 : 0;
            row.defended_asr = static_cast<double>(accepted) / static_cast<double>(cell.results.size());
          } else {
            row.defended_asr = row.asr;
          }
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        game.report.rows.push_back(row);
      }
      game.cells.push_back(std::move(cell));
    }
  }
  return game;
}

// ---------------------------------------------------------------------------

std::string format_float(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

void write_report_csv(const Report& report, std::ostream& out) {
  out << "epsilon,n_attack,n_detector,threshold,fpr,fnr,asr,defended_asr,mean_e_original,"
         "mean_e_adversarial,mean_iterations,attacks,attack_seconds,detect_ms,error\n";
  for (const auto& r : report.rows) {
    out << format_float(r.epsilon) << ',' << r.n_attack << ',' << r.n_detector << ','
        << format_float(r.threshold) << ',' << format_float(r.fpr) << ',' << format_float(r.fnr)
        << ',' << format_float(r.asr) << ',' << format_float(r.defended_asr) << ','
        << format_float(r.mean_e_original) << ',' << format_float(r.mean_e_adversarial) << ','
        << format_float(r.mean_iterations) << ',' << r.attacks << ','
        << format_float(r.attack_seconds) << ',' << format_float(r.detect_ms) << ',';
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << err << '\n';
  }
}

void write_cdf_csv(std::span<const CdfPoint> points, std::ostream& out) {
  out << "value,fraction\n";
  for (const auto& p : points) out << format_float(p.value) << ',' << format_float(p.fraction) << '\n';
}

}  // namespace mehfest::eval
