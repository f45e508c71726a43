#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kws {

// The whole engine is fixed at 16 kHz mono; inputs at other rates are rejected.
inline constexpr int kSampleRate = 16000;

// Detector operating mode derived from vehicle motion.
enum class DriveState { normal, sensitive };

inline const char* to_string(DriveState s) {
  return s == DriveState::sensitive ? "sensitive" : "normal";
}

// Detection sensitivity in [0, 1]; larger fires more easily.
// Maps to the detection threshold 1 - value.
struct Sensitivity {
  double value = 0.5;

  double threshold() const { return 1.0 - value; }

  void validate() const {
    if (!(value >= 0.0 && value <= 1.0))
      throw std::invalid_argument("sensitivity must be in [0,1], got " + std::to_string(value));
  }
};

// splitmix64 step; used to derive independent substream seeds from one run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace kws
