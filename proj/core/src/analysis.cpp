#include "kws/analysis.hpp"

#include <random>
#include <stdexcept>
#include <string>

namespace kws {

namespace {

void check_probability(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0))
    throw std::invalid_argument(std::string(name) + " must be in [0,1], got " +
                                std::to_string(v));
}

}  // namespace

void RecallModelParams::validate() const {
  check_probability(recall_normal, "recall_normal");
  check_probability(recall_sensitive, "recall_sensitive");
  check_probability(platform_accuracy, "platform_accuracy");
  check_probability(sensitive_fraction, "sensitive_fraction");
}

double recall_single(const RecallModelParams& p) {
  p.validate();
  return p.recall_normal;
}

double recall_fused(const RecallModelParams& p) {
  p.validate();
  const double k = p.sensitive_fraction, p3 = p.platform_accuracy;
  return p.recall_normal * ((1.0 - k) * p3 + k * (1.0 - p3)) +
         p.recall_sensitive * (k * p3 + (1.0 - k) * (1.0 - p3));
}

double recall_gain(const RecallModelParams& p) {
  p.validate();
  const double k = p.sensitive_fraction, p3 = p.platform_accuracy;
  return (p.recall_sensitive - p.recall_normal) * ((1.0 - k) * (1.0 - p3) + k * p3);
}

double monte_carlo_recall(const RecallModelParams& p, long trials, std::uint64_t seed) {
  p.validate();
  if (trials < 1) throw std::invalid_argument("monte_carlo_recall: trials must be >= 1");

  std::mt19937_64 rng(mix_seed(seed, 0x6d63));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  long detected = 0;
  for (long i = 0; i < trials; ++i) {
    const bool sensitive_state = unit(rng) < p.sensitive_fraction;
    const bool platform_correct = unit(rng) < p.platform_accuracy;
    // wrong platform output flips the selected mode
    const bool sensitive_mode = platform_correct ? sensitive_state : !sensitive_state;
    const double recall = sensitive_mode ? p.recall_sensitive : p.recall_normal;
    if (unit(rng) < recall) ++detected;
  }
  return static_cast<double>(detected) / static_cast<double>(trials);
}

}  // namespace kws
