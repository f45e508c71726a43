#include "kws/dsp_frontend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "kws/fft.hpp"

namespace kws {

double MelFilterbank::hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelFilterbank::mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank::MelFilterbank(int sample_rate, std::size_t fft_size, int n_filters,
                             double low_hz, double high_hz)
    : n_filters_(n_filters), fft_size_(fft_size) {
  if (n_filters < 1) throw std::invalid_argument("MelFilterbank: n_filters must be >= 1");
  const double nyquist = sample_rate / 2.0;
  if (high_hz <= 0.0) high_hz = nyquist;

  const double mel_low = hz_to_mel(low_hz);
  const double mel_high = hz_to_mel(high_hz);
  // n_filters + 2 edge points, mel-spaced; filter m peaks at edge m+1.
  std::vector<double> edges_hz(static_cast<std::size_t>(n_filters) + 2);
  for (std::size_t i = 0; i < edges_hz.size(); ++i) {
    const double mel = mel_low + (mel_high - mel_low) * static_cast<double>(i) /
                                     static_cast<double>(n_filters + 1);
    edges_hz[i] = mel_to_hz(mel);
  }

  centers_hz_.assign(edges_hz.begin() + 1, edges_hz.end() - 1);

  const std::size_t n_bins = fft_size / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(fft_size);
  weights_.assign(static_cast<std::size_t>(n_filters), std::vector<double>(n_bins, 0.0));
  for (int m = 0; m < n_filters; ++m) {
    const double left = edges_hz[static_cast<std::size_t>(m)];
    const double center = edges_hz[static_cast<std::size_t>(m) + 1];
    const double right = edges_hz[static_cast<std::size_t>(m) + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      double w = 0.0;
      if (f > left && f <= center)
        w = (f - left) / (center - left);
      else if (f > center && f < right)
        w = (right - f) / (right - center);
      weights_[static_cast<std::size_t>(m)][k] = w;
    }
  }
}

std::vector<double> MelFilterbank::apply(std::span<const double> power) const {
  const std::size_t n_bins = fft_size_ / 2 + 1;
  if (power.size() != n_bins)
    throw std::invalid_argument("MelFilterbank::apply: unexpected bin count");
  std::vector<double> energies(static_cast<std::size_t>(n_filters_), 0.0);
  for (int m = 0; m < n_filters_; ++m) {
    const auto& row = weights_[static_cast<std::size_t>(m)];
    double acc = 0.0;
    for (std::size_t k = 0; k < n_bins; ++k) acc += row[k] * power[k];
    energies[static_cast<std::size_t>(m)] = acc;
  }
  return energies;
}

std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  return w;
}

AudioBuffer pre_emphasize(const AudioBuffer& audio, double coeff) {
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples.resize(audio.samples.size());
  if (audio.samples.empty()) return out;
  out.samples[0] = audio.samples[0];
  for (std::size_t i = 1; i < audio.samples.size(); ++i)
    out.samples[i] = audio.samples[i] - coeff * audio.samples[i - 1];
  return out;
}

FrameSequence frame_signal(const AudioBuffer& audio, double frame_len_ms, double hop_ms) {
  if (hop_ms <= 0.0) throw std::invalid_argument("frame_signal: hop must be positive");
  if (frame_len_ms < hop_ms)
    throw std::invalid_argument("frame_signal: frame length must be >= hop");
  if (audio.sample_rate <= 0) throw std::invalid_argument("frame_signal: bad sample rate");

  FrameSequence seq;
  seq.sample_rate = audio.sample_rate;
  seq.frame_len_ms = frame_len_ms;
  seq.hop_ms = hop_ms;
  seq.frame_len = static_cast<std::size_t>(std::lround(frame_len_ms * audio.sample_rate / 1000.0));
  seq.hop = static_cast<std::size_t>(std::lround(hop_ms * audio.sample_rate / 1000.0));
  if (seq.frame_len == 0 || seq.hop == 0)
    throw std::invalid_argument("frame_signal: frame or hop rounds to zero samples");

  const std::size_t n = audio.samples.size();
  if (n < seq.frame_len) return seq;  // shorter than one frame: empty, not an error

  const std::size_t n_frames = (n - seq.frame_len) / seq.hop + 1;
  seq.data.resize(n_frames * seq.frame_len);
  for (std::size_t k = 0; k < n_frames; ++k)
    std::copy_n(audio.samples.data() + k * seq.hop, seq.frame_len,
                seq.data.data() + k * seq.frame_len);
  return seq;
}

FeatureVector log_filterbank(const MelFilterbank& bank, std::span<const double> frame) {
  if (frame.size() < 2) throw std::invalid_argument("log_filterbank: frame too short");

  const std::vector<double> window = hamming_window(frame.size());
  std::vector<double> windowed(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) windowed[i] = frame[i] * window[i];

  const std::vector<double> power = power_spectrum(windowed, bank.fft_size());
  std::vector<double> energies = bank.apply(power);

  FeatureVector out;
  out.values.resize(energies.size());
  for (std::size_t i = 0; i < energies.size(); ++i)
    out.values[i] = std::log(std::max(energies[i], kLogEnergyFloor));
  return out;
}

FeatureVector log_filterbank(std::span<const double> frame, int sample_rate, int n_filters) {
  if (frame.size() < 2) throw std::invalid_argument("log_filterbank: frame too short");
  const MelFilterbank bank(sample_rate, next_pow2(frame.size()), n_filters);
  return log_filterbank(bank, frame);
}

namespace {

// Orthonormal DCT-II, coefficients 0..n_out-1 of input.
std::vector<double> dct2(std::span<const double> input, int n_out) {
  const std::size_t n = input.size();
  std::vector<double> out(static_cast<std::size_t>(n_out), 0.0);
  for (int k = 0; k < n_out; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      acc += input[j] * std::cos(std::numbers::pi * k * (2.0 * static_cast<double>(j) + 1.0) /
                                 (2.0 * static_cast<double>(n)));
    const double scale = k == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                                : std::sqrt(2.0 / static_cast<double>(n));
    out[static_cast<std::size_t>(k)] = scale * acc;
  }
  return out;
}

}  // namespace

std::vector<FeatureVector> mfcc_with_deltas(const FrameSequence& frames) {
  const std::size_t n = frames.size();
  if (n == 0) throw std::invalid_argument("mfcc_with_deltas: need at least one frame");

  const MelFilterbank bank(frames.sample_rate, next_pow2(frames.frame_len), 40);

  std::vector<std::vector<double>> statics(n);
  for (std::size_t t = 0; t < n; ++t) {
    const FeatureVector fb = log_filterbank(bank, frames.frame(t));
    statics[t] = dct2(fb.values, kNumCepstra);
  }

  // Regression deltas with window N=2: sum_n n*(c[t+n] - c[t-n]) / (2 * sum n^2),
  // indices clamped at the edges.
  constexpr int kDeltaWindow = 2;
  constexpr double kDeltaNorm = 2.0 * (1.0 + 4.0);  // 2 * sum_{n=1..2} n^2
  auto clamped = [&](std::ptrdiff_t t) -> const std::vector<double>& {
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(n) - 1;
    return statics[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(t, 0, last))];
  };

  std::vector<FeatureVector> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    FeatureVector fv;
    fv.frame_index = static_cast<int>(t);
    fv.timestamp_s = frames.timestamp_s(t);
    fv.values.resize(2 * kNumCepstra);
    for (int d = 0; d < kNumCepstra; ++d) fv.values[static_cast<std::size_t>(d)] = statics[t][static_cast<std::size_t>(d)];
    for (int d = 0; d < kNumCepstra; ++d) {
      double acc = 0.0;
      for (int w = 1; w <= kDeltaWindow; ++w) {
        const auto& ahead = clamped(static_cast<std::ptrdiff_t>(t) + w);
        const auto& behind = clamped(static_cast<std::ptrdiff_t>(t) - w);
        acc += w * (ahead[static_cast<std::size_t>(d)] - behind[static_cast<std::size_t>(d)]);
      }
      fv.values[static_cast<std::size_t>(kNumCepstra + d)] = acc / kDeltaNorm;
    }
    out[t] = std::move(fv);
  }
  return out;
}

StackedInput stack_context(std::span<const FeatureVector> features, std::size_t center,
                           int past, int future) {
  if (features.empty()) throw std::invalid_argument("stack_context: empty feature sequence");
  if (center >= features.size())
    throw std::invalid_argument("stack_context: center frame " + std::to_string(center) +
                                " out of range");

  const std::size_t dim = features[0].dim();
  StackedInput out;
  out.center_frame_index = static_cast<int>(center);
  out.values.resize(static_cast<std::size_t>(past + 1 + future) * dim);

  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(features.size()) - 1;
  std::size_t pos = 0;
  for (int i = -past; i <= future; ++i) {
    const std::ptrdiff_t idx =
        std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(center) + i, 0, last);
    const auto& src = features[static_cast<std::size_t>(idx)].values;
    std::copy(src.begin(), src.end(), out.values.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += dim;
  }
  return out;
}

void write_features_csv(const std::filesystem::path& path,
                        std::span<const FeatureVector> features) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write CSV file: " + path.string());
  const std::size_t dim = features.empty() ? 0 : features[0].dim();
  f << "frame_index,timestamp_s";
  for (std::size_t d = 0; d < dim; ++d) f << ",v" << d;
  f << "\n";
  char buf[32];
  for (const auto& fv : features) {
    f << fv.frame_index;
    std::snprintf(buf, sizeof buf, ",%.9g", fv.timestamp_s);
    f << buf;
    for (const double v : fv.values) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      f << buf;
    }
    f << "\n";
  }
}

}  // namespace kws
