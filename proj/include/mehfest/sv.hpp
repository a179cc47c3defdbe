#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mehfest/audio.hpp"
#include "mehfest/stft.hpp"

namespace mehfest::sv {

struct FeatureParams {
  StftParams stft{};
  std::size_t n_mels = 20;
  double fmin_hz = 0.0;
  double fmax_hz = 0.0;  // 0 means fs/2
  double energy_floor = 1e-10;

  void validate(int sample_rate) const;
  friend bool operator==(const FeatureParams&, const FeatureParams&) = default;
};

// Row-major frames x filters.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

// Triangular mel filters (HTK mel scale) over the N/2 + 1 STFT bins.
class MelFilterbank {
 public:
  MelFilterbank(const FeatureParams& params, int sample_rate);

  std::size_t filters() const noexcept { return first_bin_.size(); }
  // Applies every filter to a power spectrum of N/2 + 1 bins.
  void apply(std::span<const double> power, std::span<double> out) const;
  std::span<const double> weights(std::size_t filter) const { return weights_[filter]; }
  std::size_t first_bin(std::size_t filter) const { return first_bin_[filter]; }

 private:
  std::vector<std::size_t> first_bin_;
  std::vector<std::vector<double>> weights_;
};

// Log-mel feature pipeline with the FFT plan, window and filterbank cached.
class FeatureExtractor {
 public:
  FeatureExtractor(const FeatureParams& params, int sample_rate);

  const FeatureParams& params() const noexcept { return params_; }
  int sample_rate() const noexcept { return sample_rate_; }
  FeatureMatrix extract(std::span<const double> samples) const;
  FeatureMatrix extract(const AudioClip& clip) const;

 private:
  FeatureParams params_;
  int sample_rate_;
  RealFft fft_;
  std::vector<double> window_;
  MelFilterbank bank_;
};

FeatureMatrix extract_features(const AudioClip& clip, const FeatureParams& params);

// Diagonal-covariance Gaussian mixture.
class Gmm {
 public:
  Gmm() = default;
  Gmm(std::vector<double> weights, std::vector<double> means, std::vector<double> variances,
      std::size_t dim);

  std::size_t components() const noexcept { return weights_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<double>& means() const noexcept { return means_; }
  const std::vector<double>& variances() const noexcept { return variances_; }

  double log_density(std::span<const double> x) const;
  // Per-component log(w_k N(x; mu_k, var_k)); entries are -inf for w_k == 0.
  void component_log_densities(std::span<const double> x, std::span<double> out) const;
  double mean_log_likelihood(const FeatureMatrix& features) const;

 private:
  std::vector<double> weights_;
  std::vector<double> means_;
  std::vector<double> variances_;
  std::vector<double> inv_variances_;
  std::vector<double> log_norms_;
  std::size_t dim_ = 0;
};

struct GmmTrainOptions {
  std::size_t n_components = 8;
  std::size_t em_iters = 30;
  double variance_floor = 1e-6;
  std::uint64_t seed = 0;
  std::size_t kmeans_iters = 5;
};

// One EM step in place. Returns the mean log-likelihood of the model before
// the update.
double em_step(Gmm& gmm, const FeatureMatrix& features, double variance_floor);

// Seeded random-frame picks refined by a few k-means passes, then EM.
Gmm initialize_gmm(const FeatureMatrix& features, const GmmTrainOptions& options);
Gmm train_gmm(const FeatureMatrix& features, const GmmTrainOptions& options);

FeatureMatrix stack(std::span<const FeatureMatrix> parts);

struct SvModel {
  Gmm speaker;
  Gmm background;
  double theta = 0.0;
  FeatureParams features{};
  int sample_rate = kDefaultSampleRate;

  bool accepts(double score) const noexcept { return score >= theta; }
};

SvModel train_sv(std::span<const AudioClip> enrollment, std::span<const AudioClip> background,
                 const FeatureParams& features, const GmmTrainOptions& options);

// Mean over frames of log p(x | speaker) - log p(x | background).
double score(const SvModel& model, const AudioClip& clip);

// Scorer with cached feature pipeline; const and thread-safe.
class Scorer {
 public:
  explicit Scorer(const SvModel& model);

  const SvModel& model() const noexcept { return model_; }
  double operator()(std::span<const double> samples) const;
  double operator()(const AudioClip& clip) const;

 private:
  SvModel model_;
  FeatureExtractor extractor_;
};

struct EerResult {
  double theta = 0.0;
  double eer = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

// Accept iff score >= theta.
double false_acceptance_rate(std::span<const double> impostor, double theta);
double false_rejection_rate(std::span<const double> legit, double theta);

// Scans every observed score as a candidate threshold and keeps the one
// minimising |FAR - FRR|; ties go to the lower FAR, then the lower theta.
EerResult set_threshold_eer(std::span<const double> legit, std::span<const double> impostor);
EerResult set_threshold_eer(SvModel& model, std::span<const double> legit,
                            std::span<const double> impostor);

}  // namespace mehfest::sv
