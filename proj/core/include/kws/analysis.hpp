#pragma once

#include <cstdint>

#include "kws/common.hpp"

namespace kws {

// Closed-form recall model of the fused detector.
//   recall_normal      -- recall while the system runs at the normal-state
//                         sensitivity (p1)
//   recall_sensitive   -- recall at the sensitive-state sensitivity (p2)
//   platform_accuracy  -- probability the telemetry platform reports the
//                         vehicle state correctly (p3)
//   sensitive_fraction -- fraction of time actually spent in the sensitive
//                         state (k)
struct RecallModelParams {
  double recall_normal = 0.4733;
  double recall_sensitive = 0.6;
  double platform_accuracy = 0.9;
  double sensitive_fraction = 0.3;

  void validate() const;
  // The model is built for recall_sensitive > recall_normal; violating it is
  // allowed (the formulas still hold) but callers may want to warn.
  bool improvement_expected() const { return recall_sensitive > recall_normal; }
};

// Single-source system: recall is just the normal-state recall.
double recall_single(const RecallModelParams& p);

// Fused system: the platform picks the matching mode with probability p3 and
// the opposite mode otherwise.
//   p1*[(1-k)*p3 + k*(1-p3)] + p2*[k*p3 + (1-k)*(1-p3)]
double recall_fused(const RecallModelParams& p);

// recall_fused - recall_single in product form:
//   (p2 - p1) * [(1-k)*(1-p3) + k*p3]
double recall_gain(const RecallModelParams& p);

// Simulates `trials` utterances against the same mode-selection story and
// returns the detected fraction. Seeded, single-threaded, deterministic.
double monte_carlo_recall(const RecallModelParams& p, long trials, std::uint64_t seed);

}  // namespace kws
