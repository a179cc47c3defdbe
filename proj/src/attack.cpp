#include "mehfest/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mehfest/detector.hpp"
#include "mehfest/error.hpp"
#include "mehfest/random.hpp"

namespace mehfest::attack {

void AttackParams::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorKind::InvalidArgument, "epsilon must be finite and >= 0");
  }
  if (max_iters < 1) throw Error(ErrorKind::InvalidArgument, "max_iters must be >= 1");
  if (!(learning_rate >= 0.0)) throw Error(ErrorKind::InvalidArgument, "learning_rate must be >= 0");
  if (nes_samples < 2 || nes_samples % 2 != 0) {
    throw Error(ErrorKind::InvalidArgument, "nes_samples must be even and >= 2");
  }
  if (!(nes_sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "nes_sigma must be > 0");
  if (freeze_order > 0) {
    geometry.stft.validate();
    if (geometry.spacing < 1) throw Error(ErrorKind::InvalidArgument, "spacing must be >= 1");
  }
}

AttackParams with_default_learning_rate(AttackParams params) {
  params.learning_rate = params.epsilon / 10.0;
  return params;
}

double loss(double score, double theta) noexcept { return std::max(theta - score, 0.0); }

std::vector<double> nes_gradient(const ScoreFn& score_fn, std::span<const double> point,
                                 double theta, std::size_t nes_samples, double nes_sigma,
                                 std::uint64_t seed) {
  if (nes_samples < 2 || nes_samples % 2 != 0) {
    throw Error(ErrorKind::InvalidArgument, "nes_samples must be even and >= 2");
  }
  if (!(nes_sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "nes_sigma must be > 0");
  const std::size_t dim = point.size();
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> grad(dim, 0.0), u(dim), probe(dim);
  for (std::size_t i = 0; i < nes_samples / 2; ++i) {
    for (double& x : u) x = normal(rng);
    for (std::size_t d = 0; d < dim; ++d) probe[d] = point[d] + nes_sigma * u[d];
    const double plus = loss(score_fn(probe), theta);
    for (std::size_t d = 0; d < dim; ++d) probe[d] = point[d] - nes_sigma * u[d];
    const double minus = loss(score_fn(probe), theta);
    const double diff = plus - minus;
    if (diff == 0.0) continue;
    for (std::size_t d = 0; d < dim; ++d) grad[d] += diff * u[d];
  }
  const double scale = 1.0 / (static_cast<double>(nes_samples) * nes_sigma);
  for (double& g : grad) g *= scale;
  return grad;
}

namespace {

// Clamps v into [s - eps, s + eps]. The bounds are rounded, so step inward
// until the computed |v - s| honors eps as well.
double project(double v, double s, double eps) {
  v = std::clamp(v, s - eps, s + eps);
  while (std::abs(v - s) > eps) v = std::nextafter(v, s);
  return v;
}

}  // namespace

AudioClip clip_to_ball(const AudioClip& a, const AudioClip& s, double epsilon) {
  if (a.size() != s.size()) throw Error(ErrorKind::InvalidArgument, "clip lengths differ");
  if (!(epsilon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be >= 0");
  AudioClip out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.samples[i] = project(a.samples[i], s.samples[i], epsilon);
  }
  return out;
}

std::vector<FrozenRange> frozen_ranges(const AudioClip& s, std::size_t order,
                                       const DetectorGeometry& geometry) {
  if (order == 0) return {};
  const Spectrogram spec = stft(s, geometry.stft);
  const std::vector<double> energies = band_energy_series(spec, geometry.freq_threshold_bin);
  std::vector<FrozenRange> out;
  for (const Pick& p : pick_minima(energies, order, geometry.spacing)) {
    const std::size_t begin = p.frame * geometry.stft.hop;
    out.push_back({p.frame, begin, begin + geometry.stft.fft_length});
  }
  return out;
}

namespace {

int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

AttackResult run(const AudioClip& s, const ScoreFn& score_fn, double theta,
                 const AttackParams& params) {
  params.validate();
  s.validate();
  if (s.empty()) throw Error(ErrorKind::InvalidArgument, "empty clip");
  const auto started = std::chrono::steady_clock::now();

  AttackResult result;
  result.frozen_frames = frozen_ranges(s, params.freeze_order, params.geometry);
  AudioClip a = s;

  auto check = [&]() {
    const double value = score_fn(a.samples);
    ++result.queries;
    result.score_trace.push_back(value);
    return value >= theta;
  };

  for (std::size_t it = 0; it < params.max_iters; ++it) {
    if (check()) {
      result.success = true;
      result.iterations_used = it;
      break;
    }
    const std::vector<double> grad =
        nes_gradient(score_fn, a.samples, theta, params.nes_samples, params.nes_sigma,
                     mix_seed(params.seed, it));
    result.queries += params.nes_samples;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double v = a.samples[i] - params.learning_rate * sign(grad[i]);
      v = project(v, s.samples[i], params.epsilon);
      if (params.clamp_to_unit) v = std::clamp(v, -1.0, 1.0);
      a.samples[i] = v;
    }
    for (const FrozenRange& r : result.frozen_frames) {
      std::copy(s.samples.begin() + static_cast<std::ptrdiff_t>(r.begin),
                s.samples.begin() + static_cast<std::ptrdiff_t>(r.end),
                a.samples.begin() + static_cast<std::ptrdiff_t>(r.begin));
    }
    if (it + 1 == params.max_iters) {
      result.iterations_used = params.max_iters;
      result.success = check();
    }
  }

  result.adversarial = std::move(a);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

AttackResult fakebob(const AudioClip& s, const sv::SvModel& model, const AttackParams& params) {
  if (params.freeze_order != 0) {
    throw Error(ErrorKind::InvalidArgument, "fakebob expects freeze_order 0");
  }
  const sv::Scorer scorer(model);
  return run(s, [&](std::span<const double> x) { return scorer(x); }, model.theta, params);
}

AttackResult nth_fakebob(const AudioClip& s, const sv::SvModel& model,
                         const AttackParams& params) {
  if (params.freeze_order == 0) {
    throw Error(ErrorKind::InvalidArgument, "nth_fakebob expects freeze_order >= 1");
  }
  const sv::Scorer scorer(model);
  return run(s, [&](std::span<const double> x) { return scorer(x); }, model.theta, params);
}

double perturbation_std_at_min_frame(const AudioClip& original, const AudioClip& adversarial,
                                     const DetectorGeometry& geometry) {
  if (original.size() != adversarial.size()) {
    throw Error(ErrorKind::InvalidArgument, "clip lengths differ");
  }
  const FrozenRange r = frozen_ranges(original, 1, geometry).front();
  const double n = static_cast<double>(r.end - r.begin);
  double mean = 0.0;
  for (std::size_t i = r.begin; i < r.end; ++i) mean += adversarial.samples[i] - original.samples[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = r.begin; i < r.end; ++i) {
    const double p = adversarial.samples[i] - original.samples[i] - mean;
    ss += p * p;
  }
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace mehfest::attack
