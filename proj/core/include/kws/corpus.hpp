#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kws/audio.hpp"
#include "kws/dsp_frontend.hpp"

namespace kws {

enum class UtteranceLabel { negative = 0, positive = 1 };

// A voiced stretch inside an utterance. dnn_label 0 marks filler-class sound
// (still speech for the VAD); 1..n are keyword sub-words in order.
struct Segment {
  int dnn_label = 0;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct Utterance {
  std::string id;
  AudioBuffer audio;
  UtteranceLabel label = UtteranceLabel::negative;
  std::string variant;  // keyword | keyword_tail_cut | keyword_head_cut | altered_first | filler
  double snr_db = 0.0;
  double trace_timestamp_s = 0.0;  // where this utterance sits on the drive trace
  std::vector<Segment> segments;
};

struct TestCorpus {
  std::vector<Utterance> utterances;
};

// Synthetic keyword corpus. The keyword is an ordered pair of distinct
// multi-tone chords (two sub-words); negatives are confusable variants
// (partial second sub-word, altered first sub-word) plus unrelated filler
// chords. Per-utterance tempo and pitch perturbations are seeded, and white
// Gaussian noise is mixed at a per-utterance SNR drawn from [snr_low, snr_high].
struct CorpusSpec {
  int n_positive = 50;
  int n_negative = 50;
  double snr_low_db = 5.0;
  double snr_high_db = 10.0;
  std::uint64_t seed = 0;

  // false renders negatives as unrelated filler only (training corpora)
  bool confusable_negatives = true;

  // Drive-trace pairing: utterances are timestamped so that roughly
  // maneuver_fraction of them land inside [window_start, window_end].
  double maneuver_fraction = 0.3;
  double trace_window_start_s = 40.0;
  double trace_window_end_s = 52.0;
  double trace_total_s = 92.0;

  // Tempo-perturbation bands for positives. Shorter sub-words dilute the
  // smoothed posterior peaks, which spreads confidence scores: the "high"
  // band stays near full score, "mid" lands near the detection thresholds,
  // "low" stays below all of them.
  double stretch_high_lo = 0.95, stretch_high_hi = 1.10;
  double stretch_mid_lo = 0.60, stretch_mid_hi = 0.68;
  double stretch_low_lo = 0.25, stretch_low_hi = 0.33;
  // Kept fraction of the second sub-word in confusable negatives.
  double confusable_keep_lo = 0.20, confusable_keep_hi = 0.30;
};

TestCorpus synthesize_corpus(const CorpusSpec& spec);

// Adds seeded white Gaussian noise scaled for the requested SNR (measured over
// the full utterance) and clips to [-1, 1]. Throws on silent input.
AudioBuffer add_noise(const AudioBuffer& signal, double snr_db, std::uint64_t seed,
                      double* clip_fraction = nullptr);

// Per-frame DNN labels for the standard framing: a frame takes the label of
// the segment containing its center, 0 outside all segments.
std::vector<int> frame_labels(const Utterance& utterance, double frame_len_ms, double hop_ms);

// Per-frame voicing mask (inside any segment), for VAD training.
std::vector<std::uint8_t> frame_voiced_mask(const Utterance& utterance, double frame_len_ms,
                                            double hop_ms);

// Writes WAVs under dir/wav/ plus dir/manifest.json and returns the manifest
// path. The manifest maps utterance id -> wav path, label, variant, snr_db,
// timestamp_s and segment list.
std::filesystem::path write_corpus(const std::filesystem::path& dir, const TestCorpus& corpus);
TestCorpus load_corpus(const std::filesystem::path& manifest_path);

}  // namespace kws
