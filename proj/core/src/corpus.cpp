#include "kws/corpus.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace kws {

namespace {

struct Chord {
  double freqs[3];
  double amps[3];
};

// Keyword sub-words and distractors. Tone sets are disjoint across chords so a
// small network can tell them apart while partial overlaps stay confusable.
constexpr Chord kSubwordA{{520.0, 910.0, 1430.0}, {1.0, 0.8, 0.6}};
constexpr Chord kSubwordB{{2150.0, 3050.0, 3870.0}, {1.0, 0.85, 0.7}};
constexpr Chord kAlteredA{{700.0, 1180.0, 1750.0}, {1.0, 0.8, 0.6}};
constexpr Chord kFillerPool[] = {
    {{350.0, 1250.0, 2600.0}, {1.0, 0.7, 0.5}},
    {{980.0, 1620.0, 2310.0}, {0.9, 1.0, 0.6}},
    {{1750.0, 2450.0, 3350.0}, {1.0, 0.8, 0.8}},
    {{640.0, 2050.0, 3600.0}, {0.8, 1.0, 0.7}},
};

constexpr double kSubwordBaseDur = 0.30;  // seconds
constexpr double kChordPeak = 0.22;
constexpr double kEdgeRamp = 0.03;  // raised-cosine attack/release

void render_chord(std::vector<double>& out, std::size_t start, std::size_t length,
                  const Chord& chord, double pitch_factor) {
  if (length == 0) return;
  double amp_sum = chord.amps[0] + chord.amps[1] + chord.amps[2];
  const std::size_t ramp = std::min(length / 4, static_cast<std::size_t>(kEdgeRamp * kSampleRate));
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    double s = 0.0;
    for (int k = 0; k < 3; ++k)
      s += chord.amps[k] / amp_sum * std::sin(2.0 * std::numbers::pi * chord.freqs[k] * pitch_factor * t);
    double env = 1.0;
    if (ramp > 0) {
      if (i < ramp)
        env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(ramp));
      else if (i + ramp >= length)
        env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(length - 1 - i) /
                                   static_cast<double>(ramp));
    }
    out[start + i] += kChordPeak * env * s;
  }
}

struct Rendered {
  AudioBuffer audio;
  std::vector<Segment> segments;
};

// Lays out chords with leading/trailing pads; every chord becomes a segment.
struct UtterancePlan {
  struct Item {
    const Chord* chord;
    double duration_s;
    int dnn_label;
  };
  double lead_s = 0.3;
  double gap_s = 0.08;
  double tail_s = 0.4;
  double pitch_factor = 1.0;
  std::vector<Item> items;
};

Rendered render_plan(const UtterancePlan& plan) {
  double total = plan.lead_s + plan.tail_s;
  for (std::size_t i = 0; i < plan.items.size(); ++i) {
    total += plan.items[i].duration_s;
    if (i + 1 < plan.items.size()) total += plan.gap_s;
  }
  Rendered r;
  r.audio.sample_rate = kSampleRate;
  r.audio.samples.assign(static_cast<std::size_t>(std::ceil(total * kSampleRate)), 0.0);

  double cursor = plan.lead_s;
  for (std::size_t i = 0; i < plan.items.size(); ++i) {
    const auto& item = plan.items[i];
    const auto start = static_cast<std::size_t>(std::lround(cursor * kSampleRate));
    const auto length = static_cast<std::size_t>(std::lround(item.duration_s * kSampleRate));
    render_chord(r.audio.samples, start, length, *item.chord, plan.pitch_factor);
    r.segments.push_back({item.dnn_label, cursor, cursor + item.duration_s});
    cursor += item.duration_s + (i + 1 < plan.items.size() ? plan.gap_s : 0.0);
  }
  return r;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

// Bresenham-style spread: marks roughly `fraction` of indices, evenly.
bool is_inside_window(int index, double fraction) {
  return std::floor((index + 1) * fraction) > std::floor(index * fraction);
}

}  // namespace

AudioBuffer add_noise(const AudioBuffer& signal, double snr_db, std::uint64_t seed,
                      double* clip_fraction) {
  double power = 0.0;
  for (const double x : signal.samples) power += x * x;
  power /= static_cast<double>(std::max<std::size_t>(signal.samples.size(), 1));
  if (power <= 0.0)
    throw std::invalid_argument("add_noise: silent signal, SNR undefined");

  const double noise_power = power / std::pow(10.0, snr_db / 10.0);

  std::mt19937_64 rng(mix_seed(seed, 0x6e6f697365));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> noise(signal.samples.size());
  double raw_power = 0.0;
  for (double& x : noise) {
    x = gauss(rng);
    raw_power += x * x;
  }
  raw_power /= static_cast<double>(noise.size());
  const double gain = std::sqrt(noise_power / raw_power);

  AudioBuffer out;
  out.sample_rate = signal.sample_rate;
  out.samples.resize(signal.samples.size());
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < noise.size(); ++i) {
    double v = signal.samples[i] + gain * noise[i];
    if (v > 1.0 || v < -1.0) {
      v = std::clamp(v, -1.0, 1.0);
      ++clipped;
    }
    out.samples[i] = v;
  }
  if (clip_fraction)
    *clip_fraction = static_cast<double>(clipped) / static_cast<double>(noise.size());
  return out;
}

TestCorpus synthesize_corpus(const CorpusSpec& spec) {
  if (spec.n_positive < 0 || spec.n_negative < 0)
    throw std::invalid_argument("synthesize_corpus: negative counts");
  if (spec.snr_low_db > spec.snr_high_db)
    throw std::invalid_argument("synthesize_corpus: snr_low > snr_high");

  TestCorpus corpus;
  corpus.utterances.reserve(static_cast<std::size_t>(spec.n_positive + spec.n_negative));

  const double window_span = spec.trace_window_end_s - spec.trace_window_start_s;
  const double inside_usable = std::max(1.0, window_span - 3.0);
  const double before_len = std::max(1.0, spec.trace_window_start_s - 10.0);
  const double after_len = std::max(1.0, spec.trace_total_s - spec.trace_window_end_s - 10.0);

  int inside_slot = 0, outside_slot = 0;
  auto assign_timestamp = [&](int index) {
    if (is_inside_window(index, spec.maneuver_fraction)) {
      const double ts =
          spec.trace_window_start_s + 0.8 + std::fmod(inside_slot * 2.618, inside_usable);
      ++inside_slot;
      return ts;
    }
    const int zone = outside_slot % 2;
    const int k = outside_slot / 2;
    ++outside_slot;
    if (zone == 0) return 4.0 + std::fmod(k * 2.618, before_len);
    return spec.trace_window_end_s + 4.0 + std::fmod(k * 2.618, after_len);
  };

  char idbuf[32];
  for (int i = 0; i < spec.n_positive; ++i) {
    std::mt19937_64 rng(mix_seed(spec.seed, 0x506f5300ULL + static_cast<std::uint64_t>(i)));

    double stretch;
    switch (i % 5) {
      case 3: stretch = uniform(rng, spec.stretch_mid_lo, spec.stretch_mid_hi); break;
      case 4: stretch = uniform(rng, spec.stretch_low_lo, spec.stretch_low_hi); break;
      default: stretch = uniform(rng, spec.stretch_high_lo, spec.stretch_high_hi); break;
    }

    UtterancePlan plan;
    plan.lead_s = uniform(rng, 0.25, 0.45);
    plan.gap_s = uniform(rng, 0.06, 0.12);
    plan.tail_s = uniform(rng, 0.30, 0.50);
    plan.pitch_factor = uniform(rng, 0.97, 1.03);
    plan.items.push_back({&kSubwordA, kSubwordBaseDur * stretch, 1});
    plan.items.push_back({&kSubwordB, kSubwordBaseDur * stretch, 2});

    Rendered r = render_plan(plan);
    Utterance utt;
    std::snprintf(idbuf, sizeof idbuf, "pos_%04d", i);
    utt.id = idbuf;
    utt.label = UtteranceLabel::positive;
    utt.variant = "keyword";
    utt.snr_db = uniform(rng, spec.snr_low_db, spec.snr_high_db);
    utt.audio = add_noise(r.audio, utt.snr_db, rng());
    quantize_to_pcm16(utt.audio);
    utt.segments = std::move(r.segments);
    utt.trace_timestamp_s = assign_timestamp(i);
    corpus.utterances.push_back(std::move(utt));
  }

  for (int i = 0; i < spec.n_negative; ++i) {
    std::mt19937_64 rng(mix_seed(spec.seed, 0x4e656700ULL + static_cast<std::uint64_t>(i)));

    UtterancePlan plan;
    plan.lead_s = uniform(rng, 0.25, 0.45);
    plan.gap_s = uniform(rng, 0.06, 0.12);
    plan.tail_s = uniform(rng, 0.30, 0.50);
    plan.pitch_factor = uniform(rng, 0.97, 1.03);

    std::string variant;
    const int kind = spec.confusable_negatives ? i % 5 : 0;
    switch (kind) {
      case 2: {  // different first sub-word, intact second
        variant = "altered_first";
        const double stretch = uniform(rng, 0.95, 1.10);
        plan.items.push_back({&kAlteredA, kSubwordBaseDur * stretch, 0});
        plan.items.push_back({&kSubwordB, kSubwordBaseDur * stretch, 0});
        break;
      }
      case 3:    // second sub-word cut short
      case 4: {  // leading part of the second sub-word missing
        variant = kind == 3 ? "keyword_tail_cut" : "keyword_head_cut";
        const double stretch = uniform(rng, 0.95, 1.10);
        const double keep = uniform(rng, spec.confusable_keep_lo, spec.confusable_keep_hi);
        plan.items.push_back({&kSubwordA, kSubwordBaseDur * stretch, 0});
        plan.items.push_back({&kSubwordB, kSubwordBaseDur * stretch * keep, 0});
        break;
      }
      default: {  // unrelated filler chords
        variant = "filler";
        const int n_chords = 1 + static_cast<int>(rng() % 2);
        for (int c = 0; c < n_chords; ++c) {
          const auto pick = rng() % (sizeof kFillerPool / sizeof kFillerPool[0]);
          plan.items.push_back({&kFillerPool[pick], uniform(rng, 0.20, 0.40), 0});
        }
        break;
      }
    }

    Rendered r = render_plan(plan);
    Utterance utt;
    std::snprintf(idbuf, sizeof idbuf, "neg_%04d", i);
    utt.id = idbuf;
    utt.label = UtteranceLabel::negative;
    utt.variant = variant;
    utt.snr_db = uniform(rng, spec.snr_low_db, spec.snr_high_db);
    utt.audio = add_noise(r.audio, utt.snr_db, rng());
    quantize_to_pcm16(utt.audio);
    utt.segments = std::move(r.segments);
    utt.trace_timestamp_s = assign_timestamp(i);
    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

std::vector<int> frame_labels(const Utterance& utterance, double frame_len_ms, double hop_ms) {
  const double frame_len = frame_len_ms / 1000.0;
  const double hop = hop_ms / 1000.0;
  const double total = utterance.audio.duration_s();
  std::vector<int> labels;
  if (total < frame_len) return labels;
  const auto n_frames = static_cast<std::size_t>(std::floor((total - frame_len) / hop)) + 1;
  labels.assign(n_frames, 0);
  for (std::size_t j = 0; j < n_frames; ++j) {
    const double center = j * hop + frame_len / 2.0;
    for (const auto& seg : utterance.segments)
      if (center >= seg.start_s && center < seg.end_s) {
        labels[j] = seg.dnn_label;
        break;
      }
  }
  return labels;
}

std::vector<std::uint8_t> frame_voiced_mask(const Utterance& utterance, double frame_len_ms,
                                            double hop_ms) {
  const double frame_len = frame_len_ms / 1000.0;
  const double hop = hop_ms / 1000.0;
  const double total = utterance.audio.duration_s();
  std::vector<std::uint8_t> mask;
  if (total < frame_len) return mask;
  const auto n_frames = static_cast<std::size_t>(std::floor((total - frame_len) / hop)) + 1;
  mask.assign(n_frames, 0);
  for (std::size_t j = 0; j < n_frames; ++j) {
    const double center = j * hop + frame_len / 2.0;
    for (const auto& seg : utterance.segments)
      if (center >= seg.start_s && center < seg.end_s) {
        mask[j] = 1;
        break;
      }
  }
  return mask;
}

std::filesystem::path write_corpus(const std::filesystem::path& dir, const TestCorpus& corpus) {
  std::filesystem::create_directories(dir / "wav");
  nlohmann::json manifest;
  manifest["sample_rate"] = kSampleRate;
  auto& utts = manifest["utterances"] = nlohmann::json::array();
  for (const auto& utt : corpus.utterances) {
    const std::string wav_rel = "wav/" + utt.id + ".wav";
    write_wav(dir / wav_rel, utt.audio);
    nlohmann::json j;
    j["id"] = utt.id;
    j["wav"] = wav_rel;
    j["label"] = utt.label == UtteranceLabel::positive ? "positive" : "negative";
    j["variant"] = utt.variant;
    j["snr_db"] = utt.snr_db;
    j["timestamp_s"] = utt.trace_timestamp_s;
    auto& segs = j["segments"] = nlohmann::json::array();
    for (const auto& seg : utt.segments)
      segs.push_back({{"label", seg.dnn_label}, {"start_s", seg.start_s}, {"end_s", seg.end_s}});
    utts.push_back(std::move(j));
  }
  const std::filesystem::path manifest_path = dir / "manifest.json";
  std::ofstream f(manifest_path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write manifest: " + manifest_path.string());
  f << manifest.dump(2) << "\n";
  return manifest_path;
}

TestCorpus load_corpus(const std::filesystem::path& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw std::runtime_error("cannot open manifest: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    f >> manifest;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("manifest parse error at byte " + std::to_string(e.byte) + ": " +
                             e.what());
  }
  const std::filesystem::path base = manifest_path.parent_path();

  TestCorpus corpus;
  for (const auto& j : manifest.at("utterances")) {
    Utterance utt;
    utt.id = j.at("id").get<std::string>();
    utt.audio = read_wav(base / j.at("wav").get<std::string>());
    utt.label = j.at("label").get<std::string>() == "positive" ? UtteranceLabel::positive
                                                               : UtteranceLabel::negative;
    utt.variant = j.value("variant", "");
    utt.snr_db = j.value("snr_db", 0.0);
    utt.trace_timestamp_s = j.value("timestamp_s", 0.0);
    if (j.contains("segments"))
      for (const auto& js : j.at("segments"))
        utt.segments.push_back({js.at("label").get<int>(), js.at("start_s").get<double>(),
                                js.at("end_s").get<double>()});
    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

}  // namespace kws
