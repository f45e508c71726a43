#pragma once

#include <span>
#include <vector>

#include "kws/audio.hpp"
#include "kws/dnn.hpp"
#include "kws/kws_scorer.hpp"
#include "kws/telemetry.hpp"
#include "kws/vad.hpp"

namespace kws {

// Detection sensitivities for the two vehicle states. The sensitive-state
// value must be at least the normal-state value; equality degenerates to a
// single-source system.
struct SensitivityPair {
  Sensitivity normal;     // sen_1
  Sensitivity sensitive;  // sen_2

  void validate() const {
    normal.validate();
    sensitive.validate();
    if (normal.value > sensitive.value)
      throw std::invalid_argument("SensitivityPair: sen_1 must not exceed sen_2");
  }
};

Sensitivity select_sensitivity(DriveState state, const SensitivityPair& pair);

struct AlignedFrameContext {
  double timestamp_s = 0.0;
  DriveState state = DriveState::normal;
  double telemetry_age_s = 0.0;  // +inf when no state precedes the frame
};

// Each frame takes the most recent maneuver state at or before its timestamp.
// Missing or stale telemetry (older than staleness_limit_s) falls back to the
// normal state. Both inputs must be sorted by timestamp.
std::vector<AlignedFrameContext> align_telemetry(std::span<const double> frame_timestamps,
                                                 std::span<const ManeuverState> states,
                                                 double staleness_limit_s);

struct FusionConfig {
  SensitivityPair pair{{0.495}, {0.58}};
  ManeuverThresholds thresholds;
  SmoothingConfig smoothing;
  ScoringConfig scoring;
  double staleness_limit_s = 5.0;
  int refractory_frames = kDefaultRefractoryFrames;
  int telemetry_smoothing_window = 1;
};

struct PipelineModels {
  NetworkParams dnn;
  GmmModel vad_speech;
  GmmModel vad_nonspeech;
};

struct PipelineConfig {
  FrontendConfig frontend;
  VadConfig vad;
  FusionConfig fusion;
};

// Per-frame confidence scores for one utterance: everything up to (and
// excluding) thresholding, so one track can be swept over many sensitivities.
// Scores are 0 outside VAD speech regions.
struct ScoreTrack {
  std::vector<double> timestamps;       // absolute (start_time_s + frame time)
  std::vector<double> scores;
  std::vector<std::uint8_t> in_speech;  // VAD region mask
};

ScoreTrack compute_scores(const AudioBuffer& audio, const PipelineModels& models,
                          const PipelineConfig& config, double start_time_s = 0.0);

// Threshold pass with a per-frame sensitivity chosen from the maneuver states
// (normal when the trace is empty).
std::vector<DetectionEvent> detect_on_track(const ScoreTrack& track,
                                            std::span<const ManeuverState> states,
                                            const FusionConfig& config);

// Full fused pipeline: framing, VAD gating, filterbank features, context
// stacking, DNN posteriors, smoothing, scoring, telemetry-selected
// sensitivity, refractory-suppressed events. Deterministic replay.
std::vector<DetectionEvent> run_fused(const AudioBuffer& audio, std::span<const GeoSample> trace,
                                      const PipelineModels& models, const PipelineConfig& config,
                                      double start_time_s = 0.0);

// Single-source run at a fixed sensitivity (no telemetry).
std::vector<DetectionEvent> run_single(const AudioBuffer& audio, Sensitivity sensitivity,
                                       const PipelineModels& models, const PipelineConfig& config,
                                       double start_time_s = 0.0);

}  // namespace kws
