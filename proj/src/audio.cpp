#include "mehfest/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mehfest/error.hpp"
#include "mehfest/random.hpp"

namespace mehfest {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::FileNotFound: return "file_not_found";
    case ErrorKind::Io: return "io";
    case ErrorKind::UnsupportedFormat: return "unsupported_format";
    case ErrorKind::EmptyData: return "empty_data";
    case ErrorKind::TooShort: return "too_short";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Parse: return "parse";
  }
  return "unknown";
}

void AudioClip::validate() const {
  if (sample_rate <= 0) {
    throw Error(ErrorKind::InvalidArgument, "sample_rate must be positive");
  }
  for (double s : samples) {
    if (!std::isfinite(s)) {
      throw Error(ErrorKind::InvalidArgument, "clip contains a non-finite sample");
    }
  }
}

void SynthSpec::validate(int sample_rate) const {
  if (sample_rate <= 0) throw Error(ErrorKind::InvalidArgument, "sample_rate must be positive");
  if (!(duration_s > 0.0)) throw Error(ErrorKind::InvalidArgument, "duration_s must be positive");
  if (n_bursts < 0) throw Error(ErrorKind::InvalidArgument, "n_bursts must be >= 0");
  if (!(gap_fraction >= 0.0 && gap_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "gap_fraction must lie in [0, 1)");
  }
  if (!(floor_noise_sigma >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "floor_noise_sigma must be >= 0");
  }
  if (!(burst_noise_sigma >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "burst_noise_sigma must be >= 0");
  }
  if (!(burst_amplitude >= 0.0 && burst_amplitude <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "burst_amplitude must lie in [0, 1]");
  }
  if (!(freq_jitter >= 0.0 && freq_jitter < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "freq_jitter must lie in [0, 1)");
  }
  const double nyquist = sample_rate / 2.0;
  for (double f : burst_freqs) {
    if (!(f > 0.0) || f * (1.0 + freq_jitter) >= nyquist) {
      throw Error(ErrorKind::InvalidArgument, "burst frequency must lie in (0, fs/2)");
    }
  }
}

// ---------------------------------------------------------------------------
// WAV codec

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

}  // namespace

double pcm16_to_sample(std::int16_t value) noexcept { return value / 32768.0; }

std::int16_t sample_to_pcm16(double sample) noexcept {
  const double q = std::clamp(std::round(sample * 32768.0), -32768.0, 32767.0);
  return static_cast<std::int16_t>(q);
}

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorKind::FileNotFound, "no such file: " + path.string());
    }
    throw Error(ErrorKind::Io, "cannot open " + path.string());
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();

  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw Error(ErrorKind::UnsupportedFormat, "not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_bytes = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const unsigned char* chunk = data + pos;
    const std::uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(len, size - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw Error(ErrorKind::UnsupportedFormat, "truncated fmt chunk");
      format = read_u16(data + body);
      channels = read_u16(data + body + 2);
      rate = read_u32(data + body + 4);
      bits = read_u16(data + body + 14);
      if (format == kFormatExtensible && avail >= 26) {
        format = read_u16(data + body + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      pcm = data + body;
      pcm_bytes = avail;
      have_data = true;
    }
    pos = body + len + (len & 1u);
  }

  if (!have_fmt) throw Error(ErrorKind::UnsupportedFormat, "missing fmt chunk");
  if (format != kFormatPcm || bits != 16) {
    throw Error(ErrorKind::UnsupportedFormat,
                "only 16-bit PCM is supported (format " + std::to_string(format) + ", " +
                    std::to_string(bits) + " bits)");
  }
  if (channels == 0 || rate == 0) {
    throw Error(ErrorKind::UnsupportedFormat, "invalid channel count or sample rate");
  }
  const std::size_t frame_bytes = 2u * channels;
  if (!have_data || pcm_bytes < frame_bytes) {
    throw Error(ErrorKind::EmptyData, "no audio samples in " + path.string());
  }

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  const std::size_t frames = pcm_bytes / frame_bytes;
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const auto raw = static_cast<std::int16_t>(read_u16(pcm + i * frame_bytes + 2 * c));
      acc += pcm16_to_sample(raw);
    }
    clip.samples[i] = acc / channels;
  }
  return clip;
}

void save_wav(const AudioClip& clip, const std::filesystem::path& path) {
  clip.validate();
  for (double s : clip.samples) {
    if (s < -1.0 || s > 1.0) {
      throw Error(ErrorKind::InvalidArgument, "sample outside [-1, 1]; clamp before saving");
    }
  }
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : clip.samples) put_u16(out, static_cast<std::uint16_t>(sample_to_pcm16(s)));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::Io, "cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Synthesis

namespace {

constexpr double kRampSeconds = 0.01;

struct Layout {
  std::vector<std::pair<std::size_t, std::size_t>> bursts;
  std::vector<std::pair<std::size_t, std::size_t>> gaps;
  std::size_t length = 0;
};

Layout make_layout(const SynthSpec& spec, int sample_rate) {
  spec.validate(sample_rate);
  Layout layout;
  layout.length = static_cast<std::size_t>(std::llround(spec.duration_s * sample_rate));
  const std::size_t total = layout.length;
  if (spec.n_bursts == 0) {
    layout.gaps.emplace_back(0, total);
    return layout;
  }
  const auto n = static_cast<std::size_t>(spec.n_bursts);
  const auto gap_total =
      static_cast<std::size_t>(std::ceil(spec.gap_fraction * static_cast<double>(total)));
  const std::size_t burst_len = (total - std::min(gap_total, total)) / n;
  const auto ramp = static_cast<std::size_t>(std::llround(kRampSeconds * sample_rate));
  if (burst_len < 2 * ramp + 1) {
    throw Error(ErrorKind::TooShort, "duration too short to fit the requested bursts");
  }
  const std::size_t gaps_len = total - burst_len * n;
  const std::size_t gap_base = gaps_len / (n + 1);
  const std::size_t gap_extra = gaps_len % (n + 1);

  std::size_t pos = 0;
  for (std::size_t i = 0; i <= n; ++i) {
    const std::size_t g = gap_base + (i < gap_extra ? 1 : 0);
    if (g > 0) layout.gaps.emplace_back(pos, pos + g);
    pos += g;
    if (i < n) {
      layout.bursts.emplace_back(pos, pos + burst_len);
      pos += burst_len;
    }
  }
  return layout;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> synth_gap_ranges(const SynthSpec& spec,
                                                                  int sample_rate) {
  return make_layout(spec, sample_rate).gaps;
}

AudioClip synth_audio(const SynthSpec& spec, int sample_rate, std::uint64_t seed) {
  const Layout layout = make_layout(spec, sample_rate);
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t nf = spec.burst_freqs.size();
  std::vector<double> freqs(nf), phases(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    const double jitter = spec.freq_jitter * (2.0 * unit(rng) - 1.0);
    freqs[i] = spec.burst_freqs[i] * (1.0 + jitter);
    phases[i] = 2.0 * std::numbers::pi * unit(rng);
  }

  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(layout.length, 0.0);

  const auto ramp = static_cast<std::size_t>(std::llround(kRampSeconds * sample_rate));
  const double per_tone = nf > 0 ? spec.burst_amplitude / static_cast<double>(nf) : 0.0;
  for (auto [begin, end] : layout.bursts) {
    const std::size_t len = end - begin;
    for (std::size_t i = 0; i < len; ++i) {
      double env = 1.0;
      const std::size_t edge = std::min(i, len - 1 - i);
      if (edge < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * edge / ramp);
      const double t = static_cast<double>(begin + i) / sample_rate;
      double v = 0.0;
      for (std::size_t k = 0; k < nf; ++k) {
        v += std::sin(2.0 * std::numbers::pi * freqs[k] * t + phases[k]);
      }
      clip.samples[begin + i] = env * per_tone * v;
    }
  }
  if (spec.burst_noise_sigma > 0.0) {
    Rng breath = make_rng(mix_seed(seed, 1));
    std::normal_distribution<double> noise(0.0, spec.burst_noise_sigma);
    for (auto [begin, end] : layout.bursts) {
      const std::size_t len = end - begin;
      for (std::size_t i = 0; i < len; ++i) {
        double env = 1.0;
        const std::size_t edge = std::min(i, len - 1 - i);
        if (edge < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * edge / ramp);
        clip.samples[begin + i] += env * noise(breath);
      }
    }
  }

  if (spec.floor_noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.floor_noise_sigma);
    for (double& s : clip.samples) s += noise(rng);
  }
  for (double& s : clip.samples) s = std::clamp(s, -1.0, 1.0);
  return clip;
}

AudioClip add_white_noise(const AudioClip& clip, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorKind::InvalidArgument, "noise sigma must be finite and >= 0");
  }
  AudioClip out = clip;
  if (sigma == 0.0) return out;
  Rng rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& s : out.samples) s += noise(rng);
  return out;
}

AudioClip clamp_unit(const AudioClip& clip) {
  AudioClip out = clip;
  for (double& s : out.samples) s = std::clamp(s, -1.0, 1.0);
  return out;
}

}  // namespace mehfest
