#include "kws/kws_scorer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace kws {

std::vector<PosteriorFrame> smooth_posteriors(std::span<const PosteriorFrame> posteriors,
                                              const SmoothingConfig& config) {
  if (posteriors.empty()) throw std::invalid_argument("smooth_posteriors: empty input");
  if (config.window_frames < 1)
    throw std::invalid_argument("smooth_posteriors: window must be >= 1");

  const std::size_t n_labels = posteriors[0].probs.size();
  std::vector<PosteriorFrame> out(posteriors.size());
  for (std::size_t j = 0; j < posteriors.size(); ++j) {
    const std::size_t h = j + 1 >= static_cast<std::size_t>(config.window_frames)
                              ? j + 1 - static_cast<std::size_t>(config.window_frames)
                              : 0;
    const double count = static_cast<double>(j - h + 1);
    PosteriorFrame frame;
    frame.frame_index = posteriors[j].frame_index;
    frame.probs.assign(n_labels, 0.0);
    for (std::size_t k = h; k <= j; ++k)
      for (std::size_t i = 0; i < n_labels; ++i) frame.probs[i] += posteriors[k].probs[i];
    for (std::size_t i = 0; i < n_labels; ++i) frame.probs[i] /= count;
    out[j] = std::move(frame);
  }
  return out;
}

double confidence_score(std::span<const PosteriorFrame> smoothed, const ScoringConfig& config,
                        std::size_t frame_index) {
  if (frame_index >= smoothed.size())
    throw std::invalid_argument("confidence_score: frame index out of range");
  const std::size_t n_labels = smoothed[0].probs.size();
  if (n_labels < 2)
    throw std::invalid_argument("confidence_score: no keyword labels (n_labels < 2)");
  if (config.window_frames < 1)
    throw std::invalid_argument("confidence_score: window must be >= 1");

  const std::size_t j = frame_index;
  const std::size_t h = j + 1 >= static_cast<std::size_t>(config.window_frames)
                            ? j + 1 - static_cast<std::size_t>(config.window_frames)
                            : 0;
  double product = 1.0;
  for (std::size_t i = 1; i < n_labels; ++i) {
    double peak = smoothed[h].probs[i];
    for (std::size_t k = h + 1; k <= j; ++k) peak = std::max(peak, smoothed[k].probs[i]);
    product *= peak;
  }
  return std::pow(product, 1.0 / static_cast<double>(n_labels - 1));
}

bool detect(double score, Sensitivity sensitivity) {
  sensitivity.validate();
  return score >= sensitivity.threshold();
}

StreamScorer::StreamScorer(int n_labels, SmoothingConfig smoothing, ScoringConfig scoring)
    : n_labels_(n_labels),
      w_smooth_(smoothing.window_frames),
      w_max_(scoring.window_frames) {
  if (n_labels < 2) throw std::invalid_argument("StreamScorer: n_labels must be >= 2");
  if (w_smooth_ < 1 || w_max_ < 1)
    throw std::invalid_argument("StreamScorer: windows must be >= 1");
  raw_ring_.assign(static_cast<std::size_t>(w_smooth_) * static_cast<std::size_t>(n_labels_), 0.0);
  smoothed_ring_.assign(static_cast<std::size_t>(w_max_) * static_cast<std::size_t>(n_labels_ - 1),
                        0.0);
}

double StreamScorer::push(const PosteriorFrame& frame, bool speech_gate) {
  if (static_cast<int>(frame.probs.size()) != n_labels_)
    throw std::invalid_argument("StreamScorer: wrong posterior size");

  const int t = frames_seen_++;
  double* raw_slot =
      raw_ring_.data() + static_cast<std::size_t>(t % w_smooth_) * static_cast<std::size_t>(n_labels_);
  for (int i = 0; i < n_labels_; ++i) raw_slot[i] = frame.probs[static_cast<std::size_t>(i)];

  // Smooth: mean over the trailing window, summed oldest-first so the result
  // is bit-identical to the batch implementation.
  const int h = t + 1 >= w_smooth_ ? t + 1 - w_smooth_ : 0;
  const double count = static_cast<double>(t - h + 1);
  double* smoothed_slot = smoothed_ring_.data() + static_cast<std::size_t>(t % w_max_) *
                                                      static_cast<std::size_t>(n_labels_ - 1);
  for (int i = 1; i < n_labels_; ++i) {
    double acc = 0.0;
    for (int k = h; k <= t; ++k)
      acc += raw_ring_[static_cast<std::size_t>(k % w_smooth_) * static_cast<std::size_t>(n_labels_) +
                       static_cast<std::size_t>(i)];
    smoothed_slot[i - 1] = acc / count;
  }

  if (!speech_gate) return 0.0;

  const int hmax = t + 1 >= w_max_ ? t + 1 - w_max_ : 0;
  double product = 1.0;
  for (int i = 0; i < n_labels_ - 1; ++i) {
    double peak = smoothed_ring_[static_cast<std::size_t>(hmax % w_max_) *
                                     static_cast<std::size_t>(n_labels_ - 1) +
                                 static_cast<std::size_t>(i)];
    for (int k = hmax + 1; k <= t; ++k)
      peak = std::max(peak, smoothed_ring_[static_cast<std::size_t>(k % w_max_) *
                                               static_cast<std::size_t>(n_labels_ - 1) +
                                           static_cast<std::size_t>(i)]);
    product *= peak;
  }
  return std::pow(product, 1.0 / static_cast<double>(n_labels_ - 1));
}

std::vector<DetectionEvent> apply_detection(std::span<const double> scores,
                                            std::span<const double> timestamps,
                                            std::span<const Sensitivity> sensitivities,
                                            std::span<const DriveState> states,
                                            int refractory_frames) {
  if (scores.size() != timestamps.size() || scores.size() != sensitivities.size() ||
      scores.size() != states.size())
    throw std::invalid_argument("apply_detection: per-frame input lengths differ");
  if (refractory_frames < 0)
    throw std::invalid_argument("apply_detection: negative refractory period");

  std::vector<DetectionEvent> events;
  long last_event = std::numeric_limits<long>::min();
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (static_cast<long>(j) - last_event < refractory_frames) continue;
    if (!detect(scores[j], sensitivities[j])) continue;
    events.push_back({static_cast<int>(j), timestamps[j], scores[j], sensitivities[j], states[j]});
    last_event = static_cast<long>(j);
  }
  return events;
}

std::vector<DetectionEvent> score_stream(std::span<const PosteriorFrame> posteriors,
                                         std::span<const double> timestamps,
                                         const SmoothingConfig& smoothing,
                                         const ScoringConfig& scoring,
                                         std::span<const Sensitivity> sensitivities,
                                         std::span<const DriveState> states,
                                         std::span<const std::uint8_t> speech_gates,
                                         int refractory_frames) {
  if (posteriors.empty()) return {};
  if (timestamps.size() != posteriors.size() || sensitivities.size() != posteriors.size() ||
      states.size() != posteriors.size() ||
      (!speech_gates.empty() && speech_gates.size() != posteriors.size()))
    throw std::invalid_argument("score_stream: per-frame input lengths differ");

  StreamScorer scorer(static_cast<int>(posteriors[0].probs.size()), smoothing, scoring);
  std::vector<double> scores(posteriors.size());
  for (std::size_t j = 0; j < posteriors.size(); ++j)
    scores[j] = scorer.push(posteriors[j], speech_gates.empty() || speech_gates[j] != 0);
  return apply_detection(scores, timestamps, sensitivities, states, refractory_frames);
}

std::string event_to_json(const DetectionEvent& event) {
  char buf[192];
  std::snprintf(buf, sizeof buf,
                "{\"frame_index\":%d,\"timestamp_s\":%.9g,\"score\":%.9g,"
                "\"sensitivity\":%.9g,\"maneuver_state\":\"%s\"}",
                event.frame_index, event.timestamp_s, event.score,
                event.sensitivity_used.value, to_string(event.maneuver_state));
  return buf;
}

void write_events_jsonl(const std::filesystem::path& path,
                        std::span<const DetectionEvent> events) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write events file: " + path.string());
  for (const auto& e : events) f << event_to_json(e) << "\n";
}

}  // namespace kws
