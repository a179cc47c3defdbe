#include "mehfest/sv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "mehfest/error.hpp"
#include "mehfest/random.hpp"

namespace mehfest::sv {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace

void FeatureParams::validate(int sample_rate) const {
  stft.validate();
  if (n_mels < 1) throw Error(ErrorKind::InvalidArgument, "n_mels must be >= 1");
  const double top = fmax_hz > 0.0 ? fmax_hz : sample_rate / 2.0;
  if (!(fmin_hz >= 0.0) || !(top > fmin_hz) || top > sample_rate / 2.0) {
    throw Error(ErrorKind::InvalidArgument, "mel band edges must satisfy 0 <= fmin < fmax <= fs/2");
  }
  if (!(energy_floor > 0.0)) throw Error(ErrorKind::InvalidArgument, "energy_floor must be > 0");
}

MelFilterbank::MelFilterbank(const FeatureParams& params, int sample_rate) {
  params.validate(sample_rate);
  const std::size_t bins = params.stft.bins();
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(params.stft.fft_length);
  const double top = params.fmax_hz > 0.0 ? params.fmax_hz : sample_rate / 2.0;
  const double mel_lo = hz_to_mel(params.fmin_hz);
  const double mel_hi = hz_to_mel(top);
  std::vector<double> edges(params.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(params.n_mels + 1));
  }

  first_bin_.resize(params.n_mels);
  weights_.resize(params.n_mels);
  for (std::size_t f = 0; f < params.n_mels; ++f) {
    const double left = edges[f], centre = edges[f + 1], right = edges[f + 2];
    std::vector<double> w(bins, 0.0);
    for (std::size_t k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * bin_hz;
      if (hz > left && hz <= centre) {
        w[k] = (hz - left) / (centre - left);
      } else if (hz > centre && hz < right) {
        w[k] = (right - hz) / (right - centre);
      }
    }
    auto first = std::find_if(w.begin(), w.end(), [](double x) { return x > 0.0; });
    if (first == w.end()) {
      // Narrower than one bin: fall back to the nearest bin.
      const auto k = std::min<std::size_t>(bins - 1,
                                           static_cast<std::size_t>(std::llround(centre / bin_hz)));
      w[k] = 1.0;
      first = w.begin() + static_cast<std::ptrdiff_t>(k);
    }
    auto last = std::find_if(w.rbegin(), w.rend(), [](double x) { return x > 0.0; }).base();
    first_bin_[f] = static_cast<std::size_t>(first - w.begin());
    weights_[f].assign(first, last);
  }
}

void MelFilterbank::apply(std::span<const double> power, std::span<double> out) const {
  for (std::size_t f = 0; f < first_bin_.size(); ++f) {
    const auto& w = weights_[f];
    const double* p = power.data() + first_bin_[f];
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * p[i];
    out[f] = acc;
  }
}

FeatureExtractor::FeatureExtractor(const FeatureParams& params, int sample_rate)
    : params_(params),
      sample_rate_(sample_rate),
      fft_(params.stft.fft_length),
      window_(padded_window(params.stft)),
      bank_(params, sample_rate) {}

FeatureMatrix FeatureExtractor::extract(std::span<const double> samples) const {
  const Spectrogram spec = stft(samples, sample_rate_, params_.stft, fft_, window_);
  FeatureMatrix out;
  out.rows = spec.frames();
  out.cols = bank_.filters();
  out.values.resize(out.rows * out.cols);
  std::vector<double> power(spec.bins());
  for (std::size_t m = 0; m < out.rows; ++m) {
    const auto frame = spec.frame(m);
    for (std::size_t k = 0; k < frame.size(); ++k) power[k] = mehfest::power(frame[k]);
    std::span<double> row(out.values.data() + m * out.cols, out.cols);
    bank_.apply(power, row);
    for (double& v : row) v = std::log(std::max(v, params_.energy_floor));
  }
  return out;
}

FeatureMatrix FeatureExtractor::extract(const AudioClip& clip) const {
  if (clip.sample_rate != sample_rate_) {
    throw Error(ErrorKind::InvalidArgument, "clip sample rate does not match feature pipeline");
  }
  return extract(clip.view());
}

FeatureMatrix extract_features(const AudioClip& clip, const FeatureParams& params) {
  return FeatureExtractor(params, clip.sample_rate).extract(clip);
}

// ---------------------------------------------------------------------------
// Gmm

Gmm::Gmm(std::vector<double> weights, std::vector<double> means, std::vector<double> variances,
         std::size_t dim)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      variances_(std::move(variances)),
      dim_(dim) {
  const std::size_t k = weights_.size();
  if (dim_ == 0 || k == 0 || means_.size() != k * dim_ || variances_.size() != k * dim_) {
    throw Error(ErrorKind::InvalidArgument, "inconsistent GMM dimensions");
  }
  for (double v : variances_) {
    if (!(v > 0.0)) throw Error(ErrorKind::InvalidArgument, "GMM variances must be > 0");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw Error(ErrorKind::InvalidArgument, "GMM weights must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw Error(ErrorKind::InvalidArgument, "GMM weights must sum to 1");
  }
  inv_variances_.resize(variances_.size());
  log_norms_.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    double log_det = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      inv_variances_[c * dim_ + d] = 1.0 / variances_[c * dim_ + d];
      log_det += std::log(variances_[c * dim_ + d]);
    }
    log_norms_[c] = weights_[c] > 0.0
                        ? std::log(weights_[c]) - 0.5 * (static_cast<double>(dim_) * kLog2Pi + log_det)
                        : -std::numeric_limits<double>::infinity();
  }
}

void Gmm::component_log_densities(std::span<const double> x, std::span<double> out) const {
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    if (!std::isfinite(log_norms_[c])) {
      out[c] = log_norms_[c];
      continue;
    }
    const double* mu = means_.data() + c * dim_;
    const double* iv = inv_variances_.data() + c * dim_;
    double q = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      const double diff = x[d] - mu[d];
      q += diff * diff * iv[d];
    }
    out[c] = log_norms_[c] - 0.5 * q;
  }
}

double Gmm::log_density(std::span<const double> x) const {
  if (x.size() != dim_) throw Error(ErrorKind::InvalidArgument, "feature dimension mismatch");
  double buf[64];
  std::vector<double> heap;
  std::span<double> comp;
  if (weights_.size() <= 64) {
    comp = std::span<double>(buf, weights_.size());
  } else {
    heap.resize(weights_.size());
    comp = heap;
  }
  component_log_densities(x, comp);
  return log_sum_exp(comp);
}

double Gmm::mean_log_likelihood(const FeatureMatrix& features) const {
  if (features.rows == 0) throw Error(ErrorKind::InvalidArgument, "no feature frames");
  double acc = 0.0;
  for (std::size_t r = 0; r < features.rows; ++r) acc += log_density(features.row(r));
  return acc / static_cast<double>(features.rows);
}

double em_step(Gmm& gmm, const FeatureMatrix& features, double variance_floor) {
  const std::size_t k = gmm.components();
  const std::size_t dim = gmm.dim();
  if (features.cols != dim || features.rows == 0) {
    throw Error(ErrorKind::InvalidArgument, "feature matrix does not match GMM");
  }
  const std::size_t n = features.rows;
  std::vector<double> resp(n * k);
  std::vector<double> comp(k);
  double total_ll = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    gmm.component_log_densities(features.row(r), comp);
    const double lse = log_sum_exp(comp);
    total_ll += lse;
    for (std::size_t c = 0; c < k; ++c) resp[r * k + c] = std::exp(comp[c] - lse);
  }

  std::vector<double> nk(k, 0.0), means(k * dim, 0.0), vars(k * dim, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = features.row(r);
    for (std::size_t c = 0; c < k; ++c) {
      const double g = resp[r * k + c];
      nk[c] += g;
      for (std::size_t d = 0; d < dim; ++d) means[c * dim + d] += g * x[d];
    }
  }
  constexpr double kEmpty = 1e-10;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < dim; ++d) {
      means[c * dim + d] = nk[c] > kEmpty ? means[c * dim + d] / nk[c] : gmm.means()[c * dim + d];
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto x = features.row(r);
    for (std::size_t c = 0; c < k; ++c) {
      const double g = resp[r * k + c];
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = x[d] - means[c * dim + d];
        vars[c * dim + d] += g * diff * diff;
      }
    }
  }
  std::vector<double> weights(k);
  const double total = std::accumulate(nk.begin(), nk.end(), 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    weights[c] = nk[c] / total;
    for (std::size_t d = 0; d < dim; ++d) {
      const double v = nk[c] > kEmpty ? vars[c * dim + d] / nk[c] : gmm.variances()[c * dim + d];
      vars[c * dim + d] = std::max(v, variance_floor);
    }
  }
  gmm = Gmm(std::move(weights), std::move(means), std::move(vars), dim);
  return total_ll / static_cast<double>(n);
}

Gmm initialize_gmm(const FeatureMatrix& features, const GmmTrainOptions& options) {
  const std::size_t n = features.rows;
  const std::size_t dim = features.cols;
  const std::size_t k = options.n_components;
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "n_components must be >= 1");
  if (n < k) {
    throw Error(ErrorKind::InvalidArgument, "need at least as many frames as GMM components");
  }
  if (!(options.variance_floor > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "variance_floor must be > 0");
  }

  Rng rng = make_rng(options.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<double> means(k * dim);
  for (std::size_t c = 0; c < k; ++c) {
    const auto x = features.row(order[c]);
    std::copy(x.begin(), x.end(), means.begin() + static_cast<std::ptrdiff_t>(c * dim));
  }

  std::vector<std::size_t> assign(n, 0);
  for (std::size_t it = 0; it <= options.kmeans_iters; ++it) {
    for (std::size_t r = 0; r < n; ++r) {
      const auto x = features.row(r);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double d2 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = x[d] - means[c * dim + d];
          d2 += diff * diff;
        }
        if (d2 < best) {
          best = d2;
          assign[r] = c;
        }
      }
    }
    if (it == options.kmeans_iters) break;
    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto x = features.row(r);
      ++counts[assign[r]];
      for (std::size_t d = 0; d < dim; ++d) sums[assign[r] * dim + d] += x[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        means[c * dim + d] = sums[c * dim + d] / static_cast<double>(counts[c]);
      }
    }
  }

  // Global variance seeds every component; weights follow cluster sizes with
  // add-one smoothing so no component starts at zero weight.
  std::vector<double> global_mean(dim, 0.0), global_var(dim, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t d = 0; d < dim; ++d) global_mean[d] += features.row(r)[d];
  }
  for (double& m : global_mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = features.row(r)[d] - global_mean[d];
      global_var[d] += diff * diff;
    }
  }
  std::vector<double> vars(k * dim);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < dim; ++d) {
      vars[c * dim + d] = std::max(global_var[d] / static_cast<double>(n), options.variance_floor);
    }
  }
  std::vector<double> weights(k, 0.0);
  for (std::size_t r = 0; r < n; ++r) weights[assign[r]] += 1.0;
  for (double& w : weights) w = (w + 1.0) / static_cast<double>(n + k);
  return Gmm(std::move(weights), std::move(means), std::move(vars), dim);
}

Gmm train_gmm(const FeatureMatrix& features, const GmmTrainOptions& options) {
  Gmm gmm = initialize_gmm(features, options);
  for (std::size_t it = 0; it < options.em_iters; ++it) em_step(gmm, features, options.variance_floor);
  return gmm;
}

FeatureMatrix stack(std::span<const FeatureMatrix> parts) {
  FeatureMatrix out;
  for (const auto& p : parts) {
    if (p.rows == 0) continue;
    if (out.cols == 0) out.cols = p.cols;
    if (p.cols != out.cols) throw Error(ErrorKind::InvalidArgument, "feature width mismatch");
    out.rows += p.rows;
    out.values.insert(out.values.end(), p.values.begin(), p.values.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Speaker model

SvModel train_sv(std::span<const AudioClip> enrollment, std::span<const AudioClip> background,
                 const FeatureParams& features, const GmmTrainOptions& options) {
  if (enrollment.empty() || background.empty()) {
    throw Error(ErrorKind::InvalidArgument, "need enrollment and background clips");
  }
  const int rate = enrollment.front().sample_rate;
  const FeatureExtractor extractor(features, rate);
  auto collect = [&](std::span<const AudioClip> clips) {
    std::vector<FeatureMatrix> parts;
    for (const auto& c : clips) parts.push_back(extractor.extract(c));
    return stack(parts);
  };
  SvModel model;
  model.features = features;
  model.sample_rate = rate;
  model.speaker = train_gmm(collect(enrollment), options);
  GmmTrainOptions bg = options;
  bg.seed = mix_seed(options.seed, 1);
  model.background = train_gmm(collect(background), bg);
  return model;
}

Scorer::Scorer(const SvModel& model)
    : model_(model), extractor_(model.features, model.sample_rate) {}

double Scorer::operator()(std::span<const double> samples) const {
  const FeatureMatrix f = extractor_.extract(samples);
  double acc = 0.0;
  for (std::size_t r = 0; r < f.rows; ++r) {
    acc += model_.speaker.log_density(f.row(r)) - model_.background.log_density(f.row(r));
  }
  return acc / static_cast<double>(f.rows);
}

double Scorer::operator()(const AudioClip& clip) const {
  if (clip.sample_rate != model_.sample_rate) {
    throw Error(ErrorKind::InvalidArgument, "clip sample rate does not match SV model");
  }
  return (*this)(clip.view());
}

double score(const SvModel& model, const AudioClip& clip) { return Scorer(model)(clip); }

double false_acceptance_rate(std::span<const double> impostor, double theta) {
  if (impostor.empty()) throw Error(ErrorKind::InvalidArgument, "empty impostor score list");
  const auto n = std::count_if(impostor.begin(), impostor.end(), [&](double s) { return s >= theta; });
  return static_cast<double>(n) / static_cast<double>(impostor.size());
}

double false_rejection_rate(std::span<const double> legit, double theta) {
  if (legit.empty()) throw Error(ErrorKind::InvalidArgument, "empty legit score list");
  const auto n = std::count_if(legit.begin(), legit.end(), [&](double s) { return s < theta; });
  return static_cast<double>(n) / static_cast<double>(legit.size());
}

EerResult set_threshold_eer(std::span<const double> legit, std::span<const double> impostor) {
  if (legit.empty() || impostor.empty()) {
    throw Error(ErrorKind::InvalidArgument, "EER needs non-empty legit and impostor scores");
  }
  std::vector<double> candidates(legit.begin(), legit.end());
  candidates.insert(candidates.end(), impostor.begin(), impostor.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  EerResult best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (double theta : candidates) {
    const double far = false_acceptance_rate(impostor, theta);
    const double frr = false_rejection_rate(legit, theta);
    const double gap = std::abs(far - frr);
    // Candidates ascend, so strict comparisons keep the lower theta on full ties.
    if (gap < best_gap || (gap == best_gap && far < best.far)) {
      best_gap = gap;
      best = {theta, 0.5 * (far + frr), far, frr};
    }
  }
  return best;
}

EerResult set_threshold_eer(SvModel& model, std::span<const double> legit,
                            std::span<const double> impostor) {
  const EerResult r = set_threshold_eer(legit, impostor);
  model.theta = r.theta;
  return r;
}

}  // namespace mehfest::sv
