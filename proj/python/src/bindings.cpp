#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "mehfest/attack.hpp"
#include "mehfest/defense.hpp"
#include "mehfest/detector.hpp"
#include "mehfest/error.hpp"
#include "mehfest/eval.hpp"
#include "mehfest/json_io.hpp"
#include "mehfest/theory.hpp"

namespace py = pybind11;
using namespace mehfest;
using nlohmann::json;

namespace {

using Samples = py::array_t<double, py::array::c_style | py::array::forcecast>;

AudioClip to_clip(const Samples& samples, int sample_rate) {
  if (samples.ndim() != 1) throw Error(ErrorKind::InvalidArgument, "samples must be a 1-D array");
  return AudioClip{std::vector<double>(samples.data(), samples.data() + samples.size()), sample_rate};
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

template <class T>
T parse(const std::string& text) {
  try {
    return json::parse(text).get<T>();
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, e.what());
  }
}

py::dict pick_dict(const Pick& p) {
  py::dict d;
  d["order"] = p.order;
  d["frame"] = p.frame;
  d["energy"] = p.energy;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MEH-FEST detector workbench core";

  static py::exception<Error> error(m, "MehfestError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  // Audio.
  m.def("load_wav", [](const std::string& path) {
    const AudioClip c = load_wav(path);
    return py::make_tuple(to_array(c.samples), c.sample_rate);
  }, py::arg("path"), "Returns (samples, sample_rate); PCM16 is scaled by 1/32768.");
  m.def("save_wav", [](const Samples& s, const std::string& path, int rate) { save_wav(to_clip(s, rate), path); },
        py::arg("samples"), py::arg("path"), py::arg("sample_rate") = kDefaultSampleRate);
  m.def("add_white_noise", [](const Samples& s, double sigma, std::uint64_t seed) {
    return to_array(add_white_noise(to_clip(s, kDefaultSampleRate), sigma, seed).samples);
  }, py::arg("samples"), py::arg("sigma"), py::arg("seed"));
  m.def("synth_audio", [](double duration_s, int n_bursts, double floor_noise_sigma, std::uint64_t seed) {
    SynthSpec spec;
    spec.duration_s = duration_s;
    spec.n_bursts = n_bursts;
    spec.floor_noise_sigma = floor_noise_sigma;
    return to_array(synth_audio(spec, kDefaultSampleRate, seed).samples);
  }, py::arg("duration_s") = 2.0, py::arg("n_bursts") = 3, py::arg("floor_noise_sigma") = 1e-4, py::arg("seed") = 0);

  // STFT.
  py::class_<StftParams>(m, "StftParams")
      .def(py::init<>())
      .def_readwrite("window_length", &StftParams::window_length)
      .def_readwrite("fft_length", &StftParams::fft_length)
      .def_readwrite("hop", &StftParams::hop);
  m.def("hann_window", [](std::size_t n) { return to_array(hann_window(n)); }, py::arg("length"));
  m.def("frame_count", &frame_count, py::arg("length"), py::arg("params") = StftParams{});
  m.def("stft_power", [](const Samples& s, const StftParams& p) {
    const Spectrogram spec = stft(to_clip(s, kDefaultSampleRate), p);
    py::array_t<double> out({spec.frames(), spec.bins()});
    auto r = out.mutable_unchecked<2>();
    for (std::size_t t = 0; t < spec.frames(); ++t) {
      for (std::size_t k = 0; k < spec.bins(); ++k) r(t, k) = power(spec.at(k, t));
    }
    return out;
  }, py::arg("samples"), py::arg("params") = StftParams{}, "|S[k, m]|^2 as a (frames, bins) array.");

  // Detector.
  py::enum_<Verdict>(m, "Verdict")
      .value("ORIGINAL", Verdict::Original)
      .value("ADVERSARIAL", Verdict::Adversarial)
      .value("INDETERMINATE", Verdict::Indeterminate);
  py::class_<DetectorProfile>(m, "DetectorProfile")
      .def(py::init(&DetectorProfile::defaults))
      .def_readwrite("stft", &DetectorProfile::stft)
      .def_readwrite("sample_rate", &DetectorProfile::sample_rate)
      .def_readwrite("freq_threshold_bin", &DetectorProfile::freq_threshold_bin)
      .def_readwrite("order", &DetectorProfile::order)
      .def_readwrite("spacing", &DetectorProfile::spacing)
      .def_readwrite("thresholds", &DetectorProfile::thresholds)
      .def_readwrite("calibration_k", &DetectorProfile::calibration_k)
      .def("to_json", [](const DetectorProfile& p) { return json(p).dump(2); })
      .def_static("from_json", &parse<DetectorProfile>, py::arg("text"));
  m.def("band_energy", [](const Samples& s, const DetectorProfile& p) {
    return to_array(band_energy_series(stft(to_clip(s, p.sample_rate), p.stft), p.freq_threshold_bin));
  }, py::arg("samples"), py::arg("profile") = DetectorProfile::defaults());
  m.def("pick_minima", [](const Samples& e, std::size_t order, std::size_t spacing) {
    py::list out;
    const std::vector<double> v(e.data(), e.data() + e.size());
    for (const Pick& p : pick_minima(v, order, spacing)) out.append(pick_dict(p));
    return out;
  }, py::arg("energies"), py::arg("order"), py::arg("spacing"));
  m.def("calibrate", [](const std::vector<Samples>& clips, const DetectorProfile& tmpl, double k) {
    std::vector<AudioClip> trusted;
    for (const auto& c : clips) trusted.push_back(to_clip(c, tmpl.sample_rate));
    return calibrate_profile(trusted, tmpl, k);
  }, py::arg("clips"), py::arg("profile") = DetectorProfile::defaults(), py::arg("k") = 3.0);
  m.def("detect", [](const Samples& s, const DetectorProfile& p) {
    const Detection d = detect(to_clip(s, p.sample_rate), p);
    py::dict out;
    out["verdict"] = d.verdict;
    out["threshold"] = d.threshold;
    py::list picks;
    for (const Pick& x : d.report.picks) picks.append(pick_dict(x));
    out["picks"] = picks;
    out["note"] = d.note;
    return out;
  }, py::arg("samples"), py::arg("profile"));

  // Theory.
  m.def("gamma", &theory::gamma, py::arg("window_length"), py::arg("sigma"));
  m.def("expected_min_chi2", py::overload_cast<std::size_t, std::size_t, std::size_t, std::uint64_t>(
                                 &theory::expected_min_chi2),
        py::arg("band_bins") = 33, py::arg("frames") = 492, py::arg("mc_runs") = theory::kDefaultMonteCarloRuns,
        py::arg("seed") = 0);
  m.def("predicted_energy", py::overload_cast<std::size_t, double, double>(&theory::predicted_energy),
        py::arg("window_length"), py::arg("expected_min"), py::arg("sigma"));
  m.def("sigma_d", py::overload_cast<std::size_t, double, double>(&theory::sigma_d), py::arg("window_length"),
        py::arg("expected_min"), py::arg("threshold"));

  // Speaker verification, attack and defense.
  py::class_<sv::SvModel>(m, "SvModel")
      .def_readwrite("theta", &sv::SvModel::theta)
      .def("score", [](const sv::SvModel& model, const Samples& s) { return sv::score(model, to_clip(s, model.sample_rate)); },
           py::arg("samples"))
      .def("to_json", [](const sv::SvModel& model) { return json(model).dump(); })
      .def_static("from_json", &parse<sv::SvModel>, py::arg("text"));
  m.def("train_synthetic_system", [](std::uint64_t seed, std::size_t components, std::size_t em_iters) {
    sv::GmmTrainOptions opt;
    opt.n_components = components;
    opt.em_iters = em_iters;
    const eval::TrainedSystem sys = eval::train_synthetic_system(eval::SyntheticSetup{}, opt, seed);
    return py::make_tuple(sys.model, sys.eer.eer);
  }, py::arg("seed") = 1, py::arg("components") = 8, py::arg("em_iters") = 30,
        "Returns (model, eer) for the built-in two-speaker setup.");
  m.def("synthetic_voice", [](bool impostor, std::size_t count, std::uint64_t seed) {
    const eval::SyntheticSetup setup;
    py::list out;
    for (const auto& c : eval::synth_voice(setup, impostor ? setup.impostor_freqs : setup.speaker_freqs, count, seed)) {
      out.append(to_array(c.samples));
    }
    return out;
  }, py::arg("impostor"), py::arg("count"), py::arg("seed"));
  m.def("attack", [](const Samples& s, const sv::SvModel& model, double epsilon, std::size_t max_iters,
                     std::size_t nes_samples, std::size_t freeze_order, std::uint64_t seed) {
    attack::AttackParams p;
    p.epsilon = epsilon;
    p.learning_rate = epsilon / 10.0;
    p.max_iters = max_iters;
    p.nes_samples = nes_samples;
    p.freeze_order = freeze_order;
    p.seed = seed;
    const sv::Scorer scorer(model);
    attack::AttackResult r;
    {
      py::gil_scoped_release release;
      r = attack::run(to_clip(s, model.sample_rate), [&](std::span<const double> x) { return scorer(x); },
                      model.theta, p);
    }
    py::dict out;
    out["adversarial"] = to_array(r.adversarial.samples);
    out["success"] = r.success;
    out["iterations_used"] = r.iterations_used;
    out["queries"] = r.queries;
    out["score_trace"] = to_array(r.score_trace);
    py::list frozen;
    for (const auto& f : r.frozen_frames) frozen.append(py::make_tuple(f.frame, f.begin, f.end));
    out["frozen_frames"] = frozen;
    return out;
  }, py::arg("samples"), py::arg("model"), py::arg("epsilon") = 0.002, py::arg("max_iters") = 200,
        py::arg("nes_samples") = 50, py::arg("freeze_order") = 0, py::arg("seed") = 0);
  m.def("defended_score", [](const sv::SvModel& model, const Samples& s, double sigma, std::uint64_t seed) {
    defense::NoiseDefenseParams p;
    p.noise_sigma = sigma;
    p.policy = defense::SeedPolicy::FixedSeed;
    return defense::defended_score(model, to_clip(s, model.sample_rate), p, seed);
  }, py::arg("model"), py::arg("samples"), py::arg("noise_sigma"), py::arg("seed") = 0);
}
