#include "kws/fusion.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "kws/fft.hpp"

namespace kws {

Sensitivity select_sensitivity(DriveState state, const SensitivityPair& pair) {
  return state == DriveState::sensitive ? pair.sensitive : pair.normal;
}

std::vector<AlignedFrameContext> align_telemetry(std::span<const double> frame_timestamps,
                                                 std::span<const ManeuverState> states,
                                                 double staleness_limit_s) {
  if (staleness_limit_s <= 0.0)
    throw std::invalid_argument("align_telemetry: staleness limit must be positive");

  std::vector<AlignedFrameContext> out;
  out.reserve(frame_timestamps.size());
  std::size_t cursor = 0;
  for (const double ts : frame_timestamps) {
    while (cursor < states.size() && states[cursor].timestamp_s <= ts) ++cursor;
    AlignedFrameContext ctx;
    ctx.timestamp_s = ts;
    if (cursor == 0) {
      // no telemetry at or before this frame: fail safe to normal
      ctx.state = DriveState::normal;
      ctx.telemetry_age_s = std::numeric_limits<double>::infinity();
    } else {
      const ManeuverState& latest = states[cursor - 1];
      ctx.telemetry_age_s = ts - latest.timestamp_s;
      ctx.state = ctx.telemetry_age_s > staleness_limit_s ? DriveState::normal : latest.state;
    }
    out.push_back(ctx);
  }
  return out;
}

ScoreTrack compute_scores(const AudioBuffer& audio, const PipelineModels& models,
                          const PipelineConfig& config, double start_time_s) {
  if (audio.sample_rate != kSampleRate)
    throw std::invalid_argument("compute_scores: sample rate must be " +
                                std::to_string(kSampleRate));
  models.dnn.validate();

  const FrontendConfig& fe = config.frontend;
  const AudioBuffer emphasized =
      fe.pre_emphasis != 0.0 ? pre_emphasize(audio, fe.pre_emphasis) : audio;
  const FrameSequence frames = frame_signal(emphasized, fe.frame_len_ms, fe.hop_ms);
  const std::size_t n_frames = frames.size();

  ScoreTrack track;
  if (n_frames == 0) return track;

  // VAD: 26-dim MFCC+deltas -> class posterior -> majority-vote regions
  const std::vector<FeatureVector> vad_features = mfcc_with_deltas(frames);
  std::vector<double> speech_probs(n_frames);
  for (std::size_t j = 0; j < n_frames; ++j)
    speech_probs[j] = speech_posterior(models.vad_speech, models.vad_nonspeech,
                                       vad_features[j].values, config.vad.prior_speech);
  const std::vector<SpeechRegion> regions = detect_speech_regions(speech_probs, config.vad);
  track.in_speech = region_mask(regions, n_frames);

  // KWS features: log filterbank energies, affine-rescaled, context-stacked
  const MelFilterbank bank(frames.sample_rate, next_pow2(frames.frame_len), fe.n_mels);
  std::vector<FeatureVector> features(n_frames);
  for (std::size_t j = 0; j < n_frames; ++j) {
    FeatureVector fv = log_filterbank(bank, frames.frame(j));
    for (double& v : fv.values) v = (v + fe.feature_offset) * fe.feature_scale;
    fv.frame_index = static_cast<int>(j);
    fv.timestamp_s = frames.timestamp_s(j);
    features[j] = std::move(fv);
  }

  StreamScorer scorer(models.dnn.topology.n_labels, config.fusion.smoothing,
                      config.fusion.scoring);
  track.timestamps.resize(n_frames);
  track.scores.resize(n_frames);
  for (std::size_t j = 0; j < n_frames; ++j) {
    const StackedInput stacked =
        stack_context(features, j, fe.context_past, fe.context_future);
    const PosteriorFrame posterior = forward(models.dnn, stacked.values, static_cast<int>(j));
    track.timestamps[j] = start_time_s + frames.timestamp_s(j);
    track.scores[j] = scorer.push(posterior, track.in_speech[j] != 0);
  }
  return track;
}

std::vector<DetectionEvent> detect_on_track(const ScoreTrack& track,
                                            std::span<const ManeuverState> states,
                                            const FusionConfig& config) {
  config.pair.validate();
  const std::size_t n = track.scores.size();

  std::vector<DriveState> frame_states(n, DriveState::normal);
  if (!states.empty()) {
    const std::vector<AlignedFrameContext> aligned =
        align_telemetry(track.timestamps, states, config.staleness_limit_s);
    for (std::size_t j = 0; j < n; ++j) frame_states[j] = aligned[j].state;
  }

  std::vector<Sensitivity> sensitivities(n);
  for (std::size_t j = 0; j < n; ++j)
    sensitivities[j] = select_sensitivity(frame_states[j], config.pair);

  return apply_detection(track.scores, track.timestamps, sensitivities, frame_states,
                         config.refractory_frames);
}

std::vector<DetectionEvent> run_fused(const AudioBuffer& audio, std::span<const GeoSample> trace,
                                      const PipelineModels& models, const PipelineConfig& config,
                                      double start_time_s) {
  const ScoreTrack track = compute_scores(audio, models, config, start_time_s);

  std::vector<ManeuverState> states;
  if (trace.size() >= 2) {
    const std::vector<VehicleState> vehicle = derive_states(trace);
    if (vehicle.size() >= 2)
      states = classify_maneuver(vehicle, config.fusion.thresholds,
                                 config.fusion.telemetry_smoothing_window);
  }
  return detect_on_track(track, states, config.fusion);
}

std::vector<DetectionEvent> run_single(const AudioBuffer& audio, Sensitivity sensitivity,
                                       const PipelineModels& models, const PipelineConfig& config,
                                       double start_time_s) {
  PipelineConfig single = config;
  single.fusion.pair = {sensitivity, sensitivity};
  return run_fused(audio, {}, models, single, start_time_s);
}

}  // namespace kws
