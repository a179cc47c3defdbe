#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cli_support.hpp"
#include "mehfest/attack.hpp"
#include "mehfest/defense.hpp"
#include "mehfest/detector.hpp"
#include "mehfest/eval.hpp"
#include "mehfest/json_io.hpp"
#include "mehfest/random.hpp"
#include "mehfest/sv.hpp"
#include "mehfest/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mehfest;
using namespace mehfest::cli;
using eval::format_float;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  fs::path out_dir = ".";
  bool verbose = false;
};

void log(const Common& c, const std::string& msg) {
  if (c.verbose) std::cerr << msg << '\n';
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

// Clip paths from positional arguments and an optional manifest.
std::vector<fs::path> gather_paths(const std::vector<std::string>& clips, const std::string& manifest) {
  std::vector<fs::path> out(clips.begin(), clips.end());
  if (!manifest.empty()) {
    for (const auto& e : read_manifest(manifest)) out.push_back(e.path);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "no clips given (pass paths or --manifest)");
  return out;
}

// ---------------------------------------------------------------------------

struct GeometryFlags {
  std::size_t window_length = 400;
  std::size_t fft_length = 512;
  std::size_t hop = 160;
  std::size_t freq_threshold_bin = 224;
  std::size_t spacing = 4;

  void add(CLI::App* app) {
    app->add_option("--window-length", window_length, "Hann window length W");
    app->add_option("--fft-length", fft_length, "FFT length N (power of two)");
    app->add_option("--hop", hop, "Frame hop H");
    app->add_option("--freq-threshold-bin", freq_threshold_bin, "First bin of the high band");
    app->add_option("--spacing", spacing, "Minimum frame distance between picks");
  }
  StftParams stft() const { return {window_length, fft_length, hop, WindowKind::Hann}; }
  DetectorProfile profile(std::size_t order) const {
    DetectorProfile p = DetectorProfile::defaults();
    p.stft = stft();
    p.freq_threshold_bin = freq_threshold_bin;
    p.spacing = spacing;
    p.order = order;
    return p;
  }
  attack::DetectorGeometry geometry() const { return {stft(), freq_threshold_bin, spacing}; }
};

struct AttackFlags {
  double epsilon = 0.002;
  std::size_t max_iters = 200;
  double learning_rate = 0.0;
  std::size_t nes_samples = 50;
  double nes_sigma = 0.001;
  bool no_clamp = false;

  void add(CLI::App* app) {
    app->add_option("--epsilon", epsilon, "L-infinity perturbation bound");
    app->add_option("--max-iters", max_iters, "Maximum attack iterations");
    app->add_option("--learning-rate", learning_rate, "Step size (0 means epsilon / 10)");
    app->add_option("--nes-samples", nes_samples, "NES probes per iteration (even)");
    app->add_option("--nes-sigma", nes_sigma, "NES probe scale");
    app->add_flag("--no-clamp", no_clamp, "Do not clamp samples to [-1, 1]");
  }
  attack::AttackParams params() const {
    attack::AttackParams p;
    p.epsilon = epsilon;
    p.max_iters = max_iters;
    p.learning_rate = learning_rate > 0.0 ? learning_rate : epsilon / 10.0;
    p.nes_samples = nes_samples;
    p.nes_sigma = nes_sigma;
    p.clamp_to_unit = !no_clamp;
    return p;
  }
};

// ---------------------------------------------------------------------------

struct CalibrateCmd {
  std::string manifest;
  std::size_t order = 1;
  double k = 3.0;
  GeometryFlags geometry;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("calibrate", "Calibrate detector thresholds on trusted clips");
    sub->add_option("--manifest", manifest, "Manifest of trusted original clips")->required();
    sub->add_option("--order", order, "Highest order n to calibrate");
    sub->add_option("--k", k, "D = mean + k * std");
    geometry.add(sub);
  }

  int run(const Common& c) const {
    std::vector<AudioClip> clips;
    std::vector<std::string> names;
    for (const auto& e : read_manifest(manifest)) {
      clips.push_back(load_clip(e.path));
      names.push_back(e.path.filename().string());
    }
    if (clips.size() < 2) throw Error(ErrorKind::InvalidArgument, "calibration needs at least 2 clips");
    log(c, "calibrating on " + std::to_string(clips.size()) + " clips");
    CalibrationStats stats;
    const DetectorProfile profile = calibrate_profile(clips, geometry.profile(order), k, &stats);
    write_json(profile, c.out_dir / "profile.json");

    auto out = open_output(c.out_dir / "calibration_stats.csv");
    out << "order,mean,std,threshold\n";
    for (std::size_t j = 0; j < stats.mean.size(); ++j) {
      out << j + 1 << ',' << format_float(stats.mean[j]) << ',' << format_float(stats.stddev[j]) << ','
          << format_float(profile.thresholds[j]) << '\n';
      std::printf("order %zu: mean %s std %s D %s\n", j + 1, format_float(stats.mean[j]).c_str(),
                  format_float(stats.stddev[j]).c_str(), format_float(profile.thresholds[j]).c_str());
    }
    auto energies = open_output(c.out_dir / "calibration_energies.csv");
    energies << "clip";
    for (std::size_t j = 0; j < stats.values.size(); ++j) energies << ",e" << j + 1;
    energies << '\n';
    for (std::size_t i = 0; i < names.size(); ++i) {
      energies << csv_field(names[i]);
      for (const auto& v : stats.values) energies << ',' << format_float(v[i]);
      energies << '\n';
    }
    return kExitOk;
  }
};

struct DetectCmd {
  std::string profile_path;
  std::string manifest;
  std::vector<std::string> clips;
  std::size_t order = 0;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("detect", "Classify clips as original or adversarial");
    sub->add_option("--profile", profile_path, "Calibrated profile JSON")->required();
    sub->add_option("--manifest", manifest, "Manifest of clips to check");
    sub->add_option("--order", order, "Detector order (0 uses the profile's)");
    sub->add_option("clips", clips, "WAV files to check");
  }

  int run(const Common& c) const {
    DetectorProfile profile = read_json(profile_path).get<DetectorProfile>();
    if (order > 0) profile.order = order;
    profile.validate();
    if (profile.thresholds.size() < profile.order) {
      throw Error(ErrorKind::InvalidArgument, "profile has no threshold for order " + std::to_string(profile.order));
    }
    const std::vector<fs::path> paths = gather_paths(clips, manifest);

    struct Row {
      std::optional<Detection> detection;
      std::string error;
    };
    std::vector<Row> rows(paths.size());
    eval::parallel_for(paths.size(), c.jobs, [&](std::size_t i) {
      try {
        rows[i].detection = detect(load_wav(paths[i]), profile);
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    });

    auto out = open_output(c.out_dir / "detections.csv");
    const std::string header = "clip,verdict,order,energy,frame,threshold,error\n";
    out << header;
    std::cout << header;
    bool any_error = false, any_flagged = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::ostringstream line;
      line << csv_field(paths[i].string()) << ',';
      if (!rows[i].error.empty()) {
        any_error = true;
        line << "error," << profile.order << ",,," << format_float(profile.threshold()) << ','
             << csv_field(rows[i].error);
      } else {
        const Detection& d = *rows[i].detection;
        any_flagged = any_flagged || d.verdict != Verdict::Original;
        line << to_string(d.verdict) << ',' << profile.order << ',';
        if (d.verdict != Verdict::Indeterminate) {
          line << format_float(d.report.picks.back().energy) << ',' << d.report.picks.back().frame;
        } else {
          line << ',';
        }
        line << ',' << format_float(d.threshold) << ',' << csv_field(d.note);
      }
      line << '\n';
      out << line.str();
      std::cout << line.str();
    }
    if (any_error) return kExitClipErrors;
    return any_flagged ? kExitAdversarial : kExitOk;
  }
};

struct TheoryCmd {
  std::size_t window_length = 400;
  std::size_t band_bins = 33;
  std::vector<std::size_t> frames = {1, 492, 2500};
  double threshold = 0.0;
  std::size_t mc_runs = 10000;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("theory", "Predicted minimum band energy and sigma_D");
    sub->add_option("--window-length", window_length, "Hann window length W");
    sub->add_option("--band-bins", band_bins, "High-band bins M");
    sub->add_option("--frames", frames, "Frame counts F")->delimiter(',');
    sub->add_option("--threshold", threshold, "Detection threshold D for sigma_D (0 skips)");
    sub->add_option("--mc-runs", mc_runs, "Monte Carlo runs per F");
  }

  int run(const Common& c) const {
    auto out = open_output(c.out_dir / "theory.csv");
    const std::string header = "frames,energy_per_variance,sigma_d\n";
    out << header;
    std::cout << header;
    for (std::size_t f : frames) {
      theory::TheoryParams p;
      p.window_length = window_length;
      p.band_bins = band_bins;
      p.frames = f;
      p.mc_runs = mc_runs;
      p.seed = c.seed;
      p.validate();
      const double est = theory::expected_min_chi2(p);
      std::string line = std::to_string(f) + ',' +
                         format_float(theory::predicted_energy(window_length, est, 1.0)) + ',';
      if (threshold > 0.0) line += format_float(theory::sigma_d(window_length, est, threshold));
      line += '\n';
      out << line;
      std::cout << line;
    }
    return kExitOk;
  }
};

struct TrainSvCmd {
  std::string manifest;
  bool synthetic = false;
  std::size_t components = 8;
  std::size_t em_iters = 30;
  double variance_floor = 1e-6;
  std::size_t n_mels = 20;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("train-sv", "Train the GMM speaker-verification model");
    sub->add_option("--manifest", manifest,
                    "Manifest: legit clips enroll the speaker, impostor clips train the background; "
                    "split 'dev' clips set theta at the EER");
    sub->add_flag("--synthetic", synthetic, "Train on the built-in synthetic two-speaker setup");
    sub->add_option("--components", components, "GMM components");
    sub->add_option("--em-iters", em_iters, "EM iterations");
    sub->add_option("--variance-floor", variance_floor, "Variance floor");
    sub->add_option("--n-mels", n_mels, "Mel filters");
  }

  sv::GmmTrainOptions options(std::uint64_t seed) const {
    sv::GmmTrainOptions o;
    o.n_components = components;
    o.em_iters = em_iters;
    o.variance_floor = variance_floor;
    o.seed = seed;
    return o;
  }

  int run(const Common& c) const {
    if (synthetic == !manifest.empty()) {
      throw Error(ErrorKind::InvalidArgument, "pass exactly one of --manifest and --synthetic");
    }
    sv::SvModel model;
    sv::EerResult eer;
    if (synthetic) {
      if (n_mels != sv::FeatureParams{}.n_mels) {
        throw Error(ErrorKind::InvalidArgument, "--n-mels is fixed for the synthetic setup");
      }
      const auto sys = eval::train_synthetic_system(eval::SyntheticSetup{}, options(c.seed), c.seed);
      model = sys.model;
      eer = sys.eer;
    } else {
      std::vector<AudioClip> enroll, background, dev_legit, dev_impostor;
      for (const auto& e : read_manifest(manifest)) {
        const eval::Label label = eval::parse_label(e.label.empty() ? "legit" : e.label);
        if (!e.split.empty() && e.split != "train" && e.split != "dev") {
          throw Error(ErrorKind::InvalidArgument, "split must be train or dev: " + e.split);
        }
        const bool dev = e.split == "dev";
        AudioClip clip = load_clip(e.path);
        auto& bucket = label == eval::Label::Legit ? (dev ? dev_legit : enroll) : (dev ? dev_impostor : background);
        bucket.push_back(std::move(clip));
      }
      if (enroll.empty() || background.empty()) {
        throw Error(ErrorKind::InvalidArgument, "manifest needs legit and impostor training clips");
      }
      sv::FeatureParams features;
      features.n_mels = n_mels;
      log(c, "training on " + std::to_string(enroll.size()) + " enrollment and " +
                 std::to_string(background.size()) + " background clips");
      model = sv::train_sv(enroll, background, features, options(c.seed));
      // Without dev clips theta is set on the training clips themselves.
      const auto& legit = dev_legit.empty() ? enroll : dev_legit;
      const auto& impostor = dev_impostor.empty() ? background : dev_impostor;
      const sv::Scorer scorer(model);
      std::vector<double> ls, is;
      for (const auto& x : legit) ls.push_back(scorer(x));
      for (const auto& x : impostor) is.push_back(scorer(x));
      eer = sv::set_threshold_eer(model, ls, is);
    }
    write_json(model, c.out_dir / "sv_model.json");
    auto out = open_output(c.out_dir / "sv_eer.csv");
    out << "theta,eer,far,frr\n"
        << format_float(eer.theta) << ',' << format_float(eer.eer) << ',' << format_float(eer.far) << ','
        << format_float(eer.frr) << '\n';
    std::printf("theta %s eer %s\n", format_float(eer.theta).c_str(), format_float(eer.eer).c_str());
    return kExitOk;
  }
};

struct AttackCmd {
  std::string model_path;
  std::string input;
  std::string output = "adversarial.wav";
  std::size_t order = 0;
  AttackFlags attack;
  GeometryFlags geometry;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("attack", "Run the black-box attack (n-th order with --order)");
    sub->add_option("--model", model_path, "SV model JSON")->required();
    sub->add_option("--input", input, "Original WAV")->required();
    sub->add_option("--output", output, "Adversarial WAV name, written inside --out-dir");
    sub->add_option("--order", order, "Frozen low-energy frames n (0 = plain attack)");
    attack.add(sub);
    geometry.add(sub);
  }

  int run(const Common& c) const {
    const sv::SvModel model = read_json(model_path).get<sv::SvModel>();
    const AudioClip s = load_clip(input);
    attack::AttackParams p = attack.params();
    p.seed = c.seed;
    p.freeze_order = order;
    p.geometry = geometry.geometry();
    p.validate();
    const sv::Scorer scorer(model);
    const attack::AttackResult r =
        attack::run(s, [&](std::span<const double> x) { return scorer(x); }, model.theta, p);
    const fs::path wav = c.out_dir / fs::path(output).filename();
    save_wav(r.adversarial, wav);
    json meta = r;
    meta["input"] = input;
    meta["params"] = p;
    meta["perturbation_std_at_min_frame"] = attack::perturbation_std_at_min_frame(s, r.adversarial, p.geometry);
    fs::path sidecar = wav;
    sidecar.replace_extension(".json");
    write_json(meta, sidecar);
    std::printf("success %d iterations %zu queries %zu final score %s theta %s\n", r.success ? 1 : 0,
                r.iterations_used, r.queries, format_float(r.score_trace.back()).c_str(),
                format_float(model.theta).c_str());
    return kExitOk;
  }
};

struct DefendScoreCmd {
  std::string model_path;
  std::string manifest;
  std::vector<std::string> clips;
  double noise_sigma = 0.0;
  std::string policy = "fixed";

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("defend-score", "Score clips with and without the noise defense");
    sub->add_option("--model", model_path, "SV model JSON")->required();
    sub->add_option("--manifest", manifest, "Manifest of clips to score");
    sub->add_option("--defense-noise-sigma", noise_sigma, "Std of noise added before scoring");
    sub->add_option("--policy", policy, "Noise seeding: fixed or fresh")->check(CLI::IsMember({"fixed", "fresh"}));
    sub->add_option("clips", clips, "WAV files to score");
  }

  int run(const Common& c) const {
    const sv::SvModel model = read_json(model_path).get<sv::SvModel>();
    defense::NoiseDefenseParams dp;
    dp.noise_sigma = noise_sigma;
    dp.policy = policy == "fixed" ? defense::SeedPolicy::FixedSeed : defense::SeedPolicy::FreshPerCall;
    dp.validate();
    const std::vector<fs::path> paths = gather_paths(clips, manifest);
    const sv::Scorer scorer(model);
    defense::NoiseDefense guard(model, dp, c.seed);
    auto out = open_output(c.out_dir / "scores.csv");
    const std::string header = "clip,score,defended_score,accepted,defended_accepted,error\n";
    out << header;
    std::cout << header;
    bool any_error = false;
    for (const auto& path : paths) {
      std::ostringstream line;
      line << csv_field(path.string()) << ',';
      try {
        const AudioClip clip = load_wav(path);
        const double plain = scorer(clip);
        const double defended = guard.score(clip);
        line << format_float(plain) << ',' << format_float(defended) << ',' << (model.accepts(plain) ? 1 : 0)
             << ',' << (model.accepts(defended) ? 1 : 0) << ',';
      } catch (const std::exception& e) {
        any_error = true;
        line << ",,,," << csv_field(e.what());
      }
      line << '\n';
      out << line.str();
      std::cout << line.str();
    }
    return any_error ? kExitClipErrors : kExitOk;
  }
};

struct EvalGameCmd {
  std::string manifest;
  std::string model_path;
  std::size_t synthetic_legit = 0;
  std::size_t synthetic_impostor = 0;
  std::vector<double> epsilons = {0.002};
  std::vector<std::size_t> attack_orders = {0, 1};
  std::vector<std::size_t> detector_orders;
  std::vector<std::string> threshold_overrides;
  double lr_ratio = 0.1;
  double k = 3.0;
  double train_fraction = 0.8;
  std::size_t max_attacks = 0;
  double noise_sigma = 0.0;
  bool no_timing = false;
  AttackFlags attack;
  GeometryFlags geometry;

  void add(CLI::App& app) {
    CLI::App* sub = app.add_subcommand("eval-game", "Attacker-versus-detector sweep");
    sub->add_option("--manifest", manifest, "Corpus manifest with legit/impostor labels");
    sub->add_option("--model", model_path, "SV model JSON (trained on the synthetic setup when omitted)");
    sub->add_option("--synthetic-legit", synthetic_legit, "Synthetic legit clips (instead of --manifest)");
    sub->add_option("--synthetic-impostor", synthetic_impostor, "Synthetic impostor clips");
    sub->add_option("--epsilons", epsilons, "Attack epsilons")->delimiter(',');
    sub->add_option("--attack-orders", attack_orders, "Attack orders n")->delimiter(',');
    sub->add_option("--detector-orders", detector_orders, "Detector orders (default n + 1 per cell)")
        ->delimiter(',');
    sub->add_option("--threshold-override", threshold_overrides, "Fixed threshold as order=D")->delimiter(',');
    sub->add_option("--lr-ratio", lr_ratio, "Learning rate as a fraction of epsilon");
    sub->add_option("--k", k, "Calibration k");
    sub->add_option("--train-fraction", train_fraction, "Share of the corpus used for calibration");
    sub->add_option("--max-attacks", max_attacks, "Cap on attacked clips per cell (0 = all)");
    sub->add_option("--defense-noise-sigma", noise_sigma, "Noise defense std for defended ASR");
    sub->add_flag("--no-timing", no_timing, "Zero wall-clock columns for byte-identical reports");
    attack.add(sub);
    geometry.add(sub);
  }

  int run(const Common& c) const {
    eval::ExperimentConfig cfg;
    const bool synthetic = synthetic_legit + synthetic_impostor > 0;
    if (synthetic == !manifest.empty()) {
      throw Error(ErrorKind::InvalidArgument, "pass exactly one of --manifest and --synthetic-legit/--synthetic-impostor");
    }
    const eval::SyntheticSetup setup;
    if (synthetic) {
      cfg.corpus = eval::synthetic_corpus(setup, synthetic_legit, synthetic_impostor, mix_seed(c.seed, 7));
    } else {
      for (const auto& e : read_manifest(manifest)) {
        if (e.label.empty()) throw Error(ErrorKind::InvalidArgument, "eval-game manifest needs labels: " + e.path.string());
        cfg.corpus.push_back({e.path.filename().string(), load_clip(e.path), eval::parse_label(e.label)});
      }
    }
    if (!model_path.empty()) {
      cfg.sv = read_json(model_path).get<sv::SvModel>();
    } else {
      log(c, "training the synthetic SV system");
      cfg.sv = eval::train_synthetic_system(setup, {}, mix_seed(c.seed, 1)).model;
    }
    cfg.train_fraction = train_fraction;
    cfg.detector = geometry.profile(1);
    cfg.calibration_k = k;
    cfg.epsilons = epsilons;
    cfg.attack_orders = attack_orders;
    cfg.detector_orders = detector_orders;
    cfg.attack = attack.params();
    cfg.lr_ratio = attack.learning_rate > 0.0 ? attack.learning_rate / epsilons.front() : lr_ratio;
    if (attack.learning_rate > 0.0 && epsilons.size() > 1) {
      throw Error(ErrorKind::InvalidArgument, "--learning-rate needs a single epsilon; use --lr-ratio");
    }
    cfg.defense.noise_sigma = noise_sigma;
    cfg.defense.policy = defense::SeedPolicy::FixedSeed;
    for (const auto& item : threshold_overrides) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, "threshold override must be order=D");
      try {
        cfg.threshold_overrides[std::stoul(item.substr(0, eq))] = std::stod(item.substr(eq + 1));
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::InvalidArgument, "bad threshold override: " + item);
      }
    }
    cfg.max_attacks = max_attacks;
    cfg.seed = c.seed;
    cfg.jobs = c.jobs;
    cfg.record_timing = !no_timing;
    log(c, "running the game on " + std::to_string(cfg.corpus.size()) + " clips");
    const eval::GameResult g = eval::run_game(cfg);

    auto out = open_output(c.out_dir / "report.csv");
    eval::write_report_csv(g.report, out);
    eval::write_report_csv(g.report, std::cout);
    write_json(g.calibrated, c.out_dir / "profile.json");

    // CDFs of E_j for held-out originals and for every cell's adversarial clips.
    std::size_t max_order = g.calibrated.thresholds.size();
    DetectorProfile probe = g.calibrated;
    probe.order = max_order;
    auto energies = [&](const AudioClip& clip) {
      std::vector<double> e;
      try {
        for (const Pick& p : measure(clip, probe).picks) e.push_back(p.energy);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::Infeasible) throw;
      }
      return e;
    };
    auto dump = [&](const std::vector<std::vector<double>>& per_clip, std::size_t order, const fs::path& path) {
      std::vector<double> values;
      for (const auto& e : per_clip) {
        if (e.size() >= order) values.push_back(e[order - 1]);
      }
      if (values.empty()) return;
      auto f = open_output(path);
      eval::write_cdf_csv(eval::cdf(values), f);
    };
    std::vector<std::vector<double>> orig;
    for (std::size_t i : g.split.test) orig.push_back(energies(cfg.corpus[i].clip));
    for (std::size_t j = 1; j <= max_order; ++j) dump(orig, j, c.out_dir / ("cdf_original_e" + std::to_string(j) + ".csv"));
    for (std::size_t ci = 0; ci < g.cells.size(); ++ci) {
      const auto& cell = g.cells[ci];
      if (!cell.error.empty()) continue;
      std::vector<std::vector<double>> adv;
      for (const auto& r : cell.results) adv.push_back(energies(r.adversarial));
      const std::size_t ei = static_cast<std::size_t>(
          std::find(epsilons.begin(), epsilons.end(), cell.epsilon) - epsilons.begin());
      for (std::size_t j = 1; j <= max_order; ++j) {
        dump(adv, j,
             c.out_dir / ("cdf_adversarial_eps" + std::to_string(ei) + "_n" + std::to_string(cell.n_attack) + "_e" +
                          std::to_string(j) + ".csv"));
      }
    }
    for (const auto& row : g.report.rows) {
      if (!row.error.empty()) return kExitClipErrors;
    }
    return kExitOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MEH-FEST detector workbench"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config; keys are long option names, subcommand options nest");

  Common common;
  std::string out_dir = ".";
  app.add_option("--seed", common.seed, "Master seed");
  app.add_option("--jobs", common.jobs, "Worker threads (1 = serial, reproducible)")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", out_dir, "Directory for outputs and the resolved config");
  app.add_flag("-v,--verbose", common.verbose, "Progress messages on stderr");

  CalibrateCmd calibrate;
  DetectCmd detect_cmd;
  TheoryCmd theory_cmd;
  TrainSvCmd train_sv;
  AttackCmd attack_cmd;
  DefendScoreCmd defend;
  EvalGameCmd game;
  calibrate.add(app);
  detect_cmd.add(app);
  theory_cmd.add(app);
  train_sv.add(app);
  attack_cmd.add(app);
  defend.add(app);
  game.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadInput;
  }

  try {
    common.out_dir = out_dir;
    fs::create_directories(common.out_dir);
    write_json(resolved_config(app), common.out_dir / "resolved_config.json");
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "calibrate") return calibrate.run(common);
    if (name == "detect") return detect_cmd.run(common);
    if (name == "theory") return theory_cmd.run(common);
    if (name == "train-sv") return train_sv.run(common);
    if (name == "attack") return attack_cmd.run(common);
    if (name == "defend-score") return defend.run(common);
    return game.run(common);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}
