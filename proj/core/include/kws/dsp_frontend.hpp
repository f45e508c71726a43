#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "kws/audio.hpp"

namespace kws {

// Contiguous fixed-length windows cut from an audio buffer. Frame k starts at
// sample k * hop and copies the input bit-exactly (no windowing here).
struct FrameSequence {
  std::vector<double> data;  // size() == frame_count * frame_len
  std::size_t frame_len = 0;
  std::size_t hop = 0;
  int sample_rate = kSampleRate;
  double frame_len_ms = 0.0;
  double hop_ms = 0.0;

  std::size_t size() const { return frame_len ? data.size() / frame_len : 0; }
  std::span<const double> frame(std::size_t k) const {
    return {data.data() + k * frame_len, frame_len};
  }
  // Frame start time.
  double timestamp_s(std::size_t k) const {
    return static_cast<double>(k * hop) / sample_rate;
  }
};

struct FeatureVector {
  std::vector<double> values;
  int frame_index = 0;
  double timestamp_s = 0.0;

  std::size_t dim() const { return values.size(); }
};

// Context-stacked DNN input: past + 1 + future feature vectors, oldest first.
struct StackedInput {
  std::vector<double> values;
  int center_frame_index = 0;
};

struct FrontendConfig {
  double frame_len_ms = 30.0;
  double hop_ms = 10.0;
  int n_mels = 40;
  double pre_emphasis = 0.97;  // 0 disables
  int context_past = 30;
  int context_future = 10;
  // Fixed affine map applied to log filterbank energies before stacking, so
  // DNN inputs land near unit scale: x' = (x + feature_offset) * feature_scale.
  double feature_offset = 10.0;
  double feature_scale = 0.1;

  int stacked_dim() const { return (context_past + 1 + context_future) * n_mels; }
};

// Triangular mel filterbank over FFT power bins, 2595*log10(1 + f/700) scale.
class MelFilterbank {
 public:
  MelFilterbank(int sample_rate, std::size_t fft_size, int n_filters,
                double low_hz = 20.0, double high_hz = -1.0 /* Nyquist */);

  // Per-filter energies of a power spectrum with fft_size/2 + 1 bins.
  std::vector<double> apply(std::span<const double> power) const;

  int n_filters() const { return n_filters_; }
  std::size_t fft_size() const { return fft_size_; }
  // Center frequency of filter m (peak of its triangle), in Hz.
  double center_hz(int m) const { return centers_hz_[static_cast<std::size_t>(m)]; }
  // weights()[m][k] is the weight of power bin k in filter m.
  const std::vector<std::vector<double>>& weights() const { return weights_; }

  static double hz_to_mel(double hz);
  static double mel_to_hz(double mel);

 private:
  int n_filters_;
  std::size_t fft_size_;
  std::vector<double> centers_hz_;
  std::vector<std::vector<double>> weights_;
};

std::vector<double> hamming_window(std::size_t n);

AudioBuffer pre_emphasize(const AudioBuffer& audio, double coeff);

// Cuts audio into frames of frame_len_ms every hop_ms. Audio shorter than one
// frame yields an empty sequence. Requires frame_len_ms >= hop_ms > 0.
FrameSequence frame_signal(const AudioBuffer& audio, double frame_len_ms, double hop_ms);

// Hamming window -> zero-padded power spectrum -> mel filterbank -> log with a
// 1e-10 energy floor. Never returns NaN or -inf.
FeatureVector log_filterbank(std::span<const double> frame, int sample_rate, int n_filters = 40);

// Same pipeline against a prebuilt filterbank (the hot path).
FeatureVector log_filterbank(const MelFilterbank& bank, std::span<const double> frame);

inline constexpr double kLogEnergyFloor = 1e-10;
inline constexpr int kNumCepstra = 13;

// 13 cepstral coefficients (orthonormal DCT-II of the log mel energies,
// coefficients 0-12) plus regression deltas over +/-2 frames, edge-replicated.
// Output dimension is 26 per frame.
std::vector<FeatureVector> mfcc_with_deltas(const FrameSequence& frames);

// Concatenates features[center - past .. center + future], clamping indices to
// the valid range (edge replication). Throws if center is out of range.
StackedInput stack_context(std::span<const FeatureVector> features, std::size_t center,
                           int past = 30, int future = 10);

// Debug dump: frame_index, timestamp_s, v0..v{dim-1} per row.
void write_features_csv(const std::filesystem::path& path, std::span<const FeatureVector> features);

}  // namespace kws
