#pragma once

#include <filesystem>
#include <vector>

#include "kws/common.hpp"

namespace kws {

// Mono audio, amplitudes in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// RIFF/WAVE, PCM 16-bit signed little-endian, mono. Rejects any other layout
// and any sample rate other than 16 kHz (there is no resampler).
AudioBuffer read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

// Snaps each sample to the nearest value representable in 16-bit PCM, so that
// in-memory audio matches what a WAV round trip would produce.
void quantize_to_pcm16(AudioBuffer& audio);

}  // namespace kws
