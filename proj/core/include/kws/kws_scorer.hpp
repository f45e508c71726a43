#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "kws/common.hpp"
#include "kws/dnn.hpp"

namespace kws {

struct SmoothingConfig {
  int window_frames = 30;  // w_s
};

struct ScoringConfig {
  int window_frames = 100;  // w_max
};

struct DetectionEvent {
  int frame_index = 0;
  double timestamp_s = 0.0;
  double score = 0.0;
  Sensitivity sensitivity_used;
  DriveState maneuver_state = DriveState::normal;
};

// Trailing-window posterior average: each output frame j is the per-label mean
// of the last min(w_s, j+1) input frames. Rows still sum to 1.
std::vector<PosteriorFrame> smooth_posteriors(std::span<const PosteriorFrame> posteriors,
                                              const SmoothingConfig& config);

// Geometric mean over keyword labels (1..n-1) of each label's maximum smoothed
// posterior within the trailing window of w_max frames ending at frame_index
// (0-based). Label 0 (filler) is excluded. Requires n_labels >= 2.
double confidence_score(std::span<const PosteriorFrame> smoothed, const ScoringConfig& config,
                        std::size_t frame_index);

// Fires iff score >= 1 - sensitivity (ties detect).
bool detect(double score, Sensitivity sensitivity);

inline constexpr int kDefaultRefractoryFrames = 100;

// Incremental smoothing + scoring with per-stream ring buffers. Scores are
// bit-identical to the batch functions over the same frames.
class StreamScorer {
 public:
  StreamScorer(int n_labels, SmoothingConfig smoothing, ScoringConfig scoring);

  // Feeds the next posterior frame and returns its confidence score.
  // A gated frame still updates the windows but scores 0.
  double push(const PosteriorFrame& frame, bool speech_gate = true);

  int frames_seen() const { return frames_seen_; }

 private:
  int n_labels_;
  int w_smooth_;
  int w_max_;
  int frames_seen_ = 0;
  std::vector<double> raw_ring_;       // w_smooth x n_labels, row per frame slot
  std::vector<double> smoothed_ring_;  // w_max x (n_labels - 1), keyword labels only
};

// Threshold + refractory pass over a score sequence. After an event at frame
// j, frames j+1 .. j+refractory_frames-1 are suppressed.
std::vector<DetectionEvent> apply_detection(std::span<const double> scores,
                                            std::span<const double> timestamps,
                                            std::span<const Sensitivity> sensitivities,
                                            std::span<const DriveState> states,
                                            int refractory_frames = kDefaultRefractoryFrames);

// Streaming composition of smoothing, scoring, thresholding and refractory
// suppression. timestamps/sensitivities/states/gates are per-frame and must
// match posteriors in length (gates may be empty = all speech).
std::vector<DetectionEvent> score_stream(std::span<const PosteriorFrame> posteriors,
                                         std::span<const double> timestamps,
                                         const SmoothingConfig& smoothing,
                                         const ScoringConfig& scoring,
                                         std::span<const Sensitivity> sensitivities,
                                         std::span<const DriveState> states,
                                         std::span<const std::uint8_t> speech_gates = {},
                                         int refractory_frames = kDefaultRefractoryFrames);

// One event per line:
// {"frame_index":..,"timestamp_s":..,"score":..,"sensitivity":..,"maneuver_state":".."}
void write_events_jsonl(const std::filesystem::path& path, std::span<const DetectionEvent> events);
std::string event_to_json(const DetectionEvent& event);

}  // namespace kws
