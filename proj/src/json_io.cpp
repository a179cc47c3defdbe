#include "mehfest/json_io.hpp"

#include <fstream>
#include <limits>

#include "mehfest/error.hpp"

namespace mehfest {

using nlohmann::json;

namespace {

// JSON has no infinity; thresholds use the string "inf".
json threshold_to_json(double d) {
  if (d == std::numeric_limits<double>::infinity()) return "inf";
  return d;
}

double threshold_from_json(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

template <typename T>
void maybe_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void to_json(json& j, const StftParams& p) {
  j = json{{"window_length", p.window_length},
           {"fft_length", p.fft_length},
           {"hop", p.hop},
           {"window", "hann"}};
}

void from_json(const json& j, StftParams& p) {
  maybe_get(j, "window_length", p.window_length);
  maybe_get(j, "fft_length", p.fft_length);
  maybe_get(j, "hop", p.hop);
  if (j.contains("window") && j.at("window").get<std::string>() != "hann") {
    throw Error(ErrorKind::Parse, "only the hann window is supported");
  }
  p.window = WindowKind::Hann;
}

void to_json(json& j, const DetectorProfile& p) {
  json thresholds = json::array();
  for (double d : p.thresholds) thresholds.push_back(threshold_to_json(d));
  j = json{{"stft", p.stft},
           {"sample_rate", p.sample_rate},
           {"freq_threshold_bin", p.freq_threshold_bin},
           {"order", p.order},
           {"spacing", p.spacing},
           {"thresholds", thresholds},
           {"calibration_k", p.calibration_k}};
}

void from_json(const json& j, DetectorProfile& p) {
  maybe_get(j, "stft", p.stft);
  maybe_get(j, "sample_rate", p.sample_rate);
  maybe_get(j, "freq_threshold_bin", p.freq_threshold_bin);
  maybe_get(j, "order", p.order);
  maybe_get(j, "spacing", p.spacing);
  maybe_get(j, "calibration_k", p.calibration_k);
  p.thresholds.clear();
  if (j.contains("thresholds")) {
    for (const auto& d : j.at("thresholds")) p.thresholds.push_back(threshold_from_json(d));
  }
  p.validate();
}

void to_json(json& j, const Pick& p) {
  j = json{{"order", p.order}, {"frame", p.frame}, {"energy", p.energy}};
}

namespace sv {

void to_json(json& j, const FeatureParams& p) {
  j = json{{"stft", p.stft},
           {"n_mels", p.n_mels},
           {"fmin_hz", p.fmin_hz},
           {"fmax_hz", p.fmax_hz},
           {"energy_floor", p.energy_floor}};
}

void from_json(const json& j, FeatureParams& p) {
  maybe_get(j, "stft", p.stft);
  maybe_get(j, "n_mels", p.n_mels);
  maybe_get(j, "fmin_hz", p.fmin_hz);
  maybe_get(j, "fmax_hz", p.fmax_hz);
  maybe_get(j, "energy_floor", p.energy_floor);
}

void to_json(json& j, const Gmm& g) {
  j = json{{"dim", g.dim()},
           {"weights", g.weights()},
           {"means", g.means()},
           {"variances", g.variances()}};
}

void from_json(const json& j, Gmm& g) {
  g = Gmm(j.at("weights").get<std::vector<double>>(), j.at("means").get<std::vector<double>>(),
          j.at("variances").get<std::vector<double>>(), j.at("dim").get<std::size_t>());
}

void to_json(json& j, const SvModel& m) {
  j = json{{"features", m.features},
           {"sample_rate", m.sample_rate},
           {"theta", m.theta},
           {"speaker", m.speaker},
           {"background", m.background}};
}

void from_json(const json& j, SvModel& m) {
  maybe_get(j, "features", m.features);
  maybe_get(j, "sample_rate", m.sample_rate);
  j.at("theta").get_to(m.theta);
  j.at("speaker").get_to(m.speaker);
  j.at("background").get_to(m.background);
}

}  // namespace sv

namespace attack {

void to_json(json& j, const DetectorGeometry& g) {
  j = json{{"stft", g.stft}, {"freq_threshold_bin", g.freq_threshold_bin}, {"spacing", g.spacing}};
}

void from_json(const json& j, DetectorGeometry& g) {
  maybe_get(j, "stft", g.stft);
  maybe_get(j, "freq_threshold_bin", g.freq_threshold_bin);
  maybe_get(j, "spacing", g.spacing);
}

void to_json(json& j, const AttackParams& p) {
  j = json{{"epsilon", p.epsilon},
           {"max_iters", p.max_iters},
           {"learning_rate", p.learning_rate},
           {"nes_samples", p.nes_samples},
           {"nes_sigma", p.nes_sigma},
           {"seed", p.seed},
           {"freeze_order", p.freeze_order},
           {"geometry", p.geometry},
           {"clamp_to_unit", p.clamp_to_unit}};
}

void from_json(const json& j, AttackParams& p) {
  maybe_get(j, "epsilon", p.epsilon);
  maybe_get(j, "max_iters", p.max_iters);
  maybe_get(j, "learning_rate", p.learning_rate);
  maybe_get(j, "nes_samples", p.nes_samples);
  maybe_get(j, "nes_sigma", p.nes_sigma);
  maybe_get(j, "seed", p.seed);
  maybe_get(j, "freeze_order", p.freeze_order);
  maybe_get(j, "geometry", p.geometry);
  maybe_get(j, "clamp_to_unit", p.clamp_to_unit);
}

void to_json(json& j, const AttackResult& r) {
  json frozen = json::array();
  for (const auto& f : r.frozen_frames) {
    frozen.push_back({{"frame", f.frame}, {"begin", f.begin}, {"end", f.end}});
  }
  j = json{{"success", r.success},
           {"iterations_used", r.iterations_used},
           {"queries", r.queries},
           {"score_trace", r.score_trace},
           {"frozen_frames", frozen},
           {"seconds", r.seconds}};
}

}  // namespace attack

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(std::filesystem::exists(path) ? ErrorKind::Io : ErrorKind::FileNotFound,
                "cannot read " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace mehfest
