#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "kws/eval_harness.hpp"

using kws::AudioBuffer;
using kws::CorpusSpec;
using kws::DetectionEvent;
using kws::DriveState;
using kws::ManeuverState;
using kws::Metrics;
using kws::ScoreTrack;
using kws::SensitivityPair;
using kws::TestCorpus;
using kws::Utterance;
using kws::UtteranceLabel;

namespace {

double mean_power(const std::vector<double>& v) {
  double p = 0.0;
  for (const double x : v) p += x * x;
  return p / static_cast<double>(v.size());
}

AudioBuffer tone(double seconds, double freq, double amp) {
  AudioBuffer a;
  a.samples.resize(static_cast<std::size_t>(seconds * kws::kSampleRate));
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    a.samples[i] = amp * std::sin(2.0 * 3.14159265358979 * freq * static_cast<double>(i) / kws::kSampleRate);
  return a;
}

// Fabricated corpus + score tracks for exercising the sweep logic without a
// trained model: each utterance has one frame whose score is chosen directly.
struct FakeEval {
  TestCorpus corpus;
  std::vector<ScoreTrack> tracks;

  void add(UtteranceLabel label, double score, double timestamp = 0.0) {
    Utterance utt;
    utt.id = "u" + std::to_string(corpus.utterances.size());
    utt.label = label;
    utt.trace_timestamp_s = timestamp;
    corpus.utterances.push_back(std::move(utt));
    ScoreTrack track;
    track.timestamps = {timestamp};
    track.scores = {score};
    track.in_speech = {1};
    tracks.push_back(std::move(track));
  }
};

}  // namespace

TEST_SUITE("eval_harness") {

TEST_CASE("default corpus renders 50 positives and 50 negatives, reproducibly") {
  CorpusSpec spec;
  spec.seed = 11;
  const TestCorpus a = kws::synthesize_corpus(spec);
  const TestCorpus b = kws::synthesize_corpus(spec);
  REQUIRE(a.utterances.size() == 100);

  int positives = 0, negatives = 0;
  for (const auto& utt : a.utterances)
    (utt.label == UtteranceLabel::positive ? positives : negatives)++;
  CHECK(positives == 50);
  CHECK(negatives == 50);

  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    CHECK(a.utterances[i].audio.samples == b.utterances[i].audio.samples);
    CHECK(a.utterances[i].snr_db == b.utterances[i].snr_db);
    CHECK(a.utterances[i].trace_timestamp_s == b.utterances[i].trace_timestamp_s);
  }
}

TEST_CASE("different seeds change samples but not structure") {
  CorpusSpec spec;
  spec.n_positive = 6;
  spec.n_negative = 6;
  spec.seed = 1;
  const TestCorpus a = kws::synthesize_corpus(spec);
  spec.seed = 2;
  const TestCorpus b = kws::synthesize_corpus(spec);
  REQUIRE(a.utterances.size() == b.utterances.size());
  bool any_difference = false;
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    CHECK(a.utterances[i].label == b.utterances[i].label);
    CHECK(a.utterances[i].variant == b.utterances[i].variant);
    if (a.utterances[i].audio.samples != b.utterances[i].audio.samples) any_difference = true;
  }
  CHECK(any_difference);
}

TEST_CASE("n_positive = 0 leaves only negatives") {
  CorpusSpec spec;
  spec.n_positive = 0;
  spec.n_negative = 8;
  const TestCorpus corpus = kws::synthesize_corpus(spec);
  REQUIRE(corpus.utterances.size() == 8);
  for (const auto& utt : corpus.utterances) CHECK(utt.label == UtteranceLabel::negative);
}

TEST_CASE("roughly the maneuver fraction of utterances lands inside the window") {
  CorpusSpec spec;
  spec.seed = 3;
  const TestCorpus corpus = kws::synthesize_corpus(spec);
  int inside = 0;
  for (const auto& utt : corpus.utterances)
    if (utt.trace_timestamp_s > spec.trace_window_start_s &&
        utt.trace_timestamp_s < spec.trace_window_end_s)
      ++inside;
  CHECK(inside == 30);  // 30% of 100, by construction
}

TEST_CASE("add_noise hits the target SNR within 0.1 dB") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> snr_dist(5.0, 10.0);
  const AudioBuffer clean = tone(0.8, 700.0, 0.2);
  for (int trial = 0; trial < 100; ++trial) {
    const double target = snr_dist(rng);
    const AudioBuffer noisy = kws::add_noise(clean, target, rng());
    std::vector<double> noise(noisy.samples.size());
    for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = noisy.samples[i] - clean.samples[i];
    const double measured = 10.0 * std::log10(mean_power(clean.samples) / mean_power(noise));
    CHECK(std::abs(measured - target) < 0.1);
  }
}

TEST_CASE("very high SNR leaves the signal nearly untouched") {
  const AudioBuffer clean = tone(0.3, 500.0, 0.3);
  const AudioBuffer noisy = kws::add_noise(clean, 60.0, 9);
  double max_dev = 0.0;
  for (std::size_t i = 0; i < clean.samples.size(); ++i)
    max_dev = std::max(max_dev, std::abs(noisy.samples[i] - clean.samples[i]));
  CHECK(max_dev < 1e-3);
}

TEST_CASE("noise is seed-deterministic and silence is rejected") {
  const AudioBuffer clean = tone(0.2, 900.0, 0.25);
  const AudioBuffer a = kws::add_noise(clean, 6.0, 123);
  const AudioBuffer b = kws::add_noise(clean, 6.0, 123);
  CHECK(a.samples == b.samples);

  AudioBuffer silent;
  silent.samples.assign(1000, 0.0);
  CHECK_THROWS_AS(kws::add_noise(silent, 6.0, 1), std::invalid_argument);
}

TEST_CASE("metrics follow the stated conventions") {
  SUBCASE("45 tp, 5 fp, 5 fn") {
    const Metrics m = Metrics::from_counts(45, 5, 5, 45);
    CHECK(m.precision == doctest::Approx(0.9));
    CHECK(m.recall == doctest::Approx(0.9));
  }
  SUBCASE("no events at all: precision vacuously 1, recall 0") {
    const Metrics m = Metrics::from_counts(0, 0, 50, 50);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 0.0);
  }
  SUBCASE("identities hold on integer counts") {
    const Metrics m = Metrics::from_counts(17, 3, 11, 23);
    CHECK(m.precision * static_cast<double>(m.tp + m.fp) == doctest::Approx(17.0).epsilon(1e-12));
    CHECK(m.recall * static_cast<double>(m.tp + m.fn) == doctest::Approx(17.0).epsilon(1e-12));
  }
}

TEST_CASE("evaluate counts utterance-level activations") {
  FakeEval fake;
  for (int i = 0; i < 9; ++i) fake.add(UtteranceLabel::positive, 0.9);
  fake.add(UtteranceLabel::positive, 0.1);  // missed positive
  for (int i = 0; i < 9; ++i) fake.add(UtteranceLabel::negative, 0.1);
  fake.add(UtteranceLabel::negative, 0.9);  // false accept

  std::size_t index = 0;
  const kws::UtteranceRunner runner = [&](const Utterance&) {
    const ScoreTrack& track = fake.tracks[index++];
    kws::FusionConfig cfg;
    cfg.pair = {{0.5}, {0.5}};
    return kws::detect_on_track(track, {}, cfg);
  };
  const Metrics m = kws::evaluate(runner, fake.corpus);
  CHECK(m.tp == 9);
  CHECK(m.fn == 1);
  CHECK(m.fp == 1);
  CHECK(m.tn == 9);
}

TEST_CASE("summarize mean and mse") {
  SUBCASE("constant values") {
    const std::vector<double> v = {0.9, 0.9, 0.9};
    const auto s = kws::summarize(v);
    CHECK(s.mean == doctest::Approx(0.9));
    CHECK(s.mse == doctest::Approx(0.0));
  }
  SUBCASE("two values: population variance") {
    const std::vector<double> v = {0.8, 1.0};
    const auto s = kws::summarize(v);
    CHECK(s.mean == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(s.mse == doctest::Approx(0.01).epsilon(1e-12));
  }
  SUBCASE("sample variance option") {
    const std::vector<double> v = {0.8, 1.0};
    const auto s = kws::summarize(v, true);
    CHECK(s.mse == doctest::Approx(0.02).epsilon(1e-12));
  }
  SUBCASE("single value has mse 0") {
    const std::vector<double> v = {0.7};
    CHECK(kws::summarize(v).mse == 0.0);
  }
}

TEST_CASE("single sweep recall never decreases with sensitivity") {
  FakeEval fake;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 30; ++i) fake.add(UtteranceLabel::positive, unit(rng));
  for (int i = 0; i < 30; ++i) fake.add(UtteranceLabel::negative, unit(rng));

  const auto grid = kws::default_single_grid();
  REQUIRE(grid.size() == 6);
  const auto summary = kws::sweep_single_tracks(grid, fake.corpus, fake.tracks);
  REQUIRE(summary.rows.size() == 6);
  for (std::size_t i = 1; i < summary.rows.size(); ++i) {
    CHECK(summary.rows[i].metrics.recall >= summary.rows[i - 1].metrics.recall);
    CHECK(summary.rows[i].metrics.fp >= summary.rows[i - 1].metrics.fp);
  }
}

TEST_CASE("double sweep rejects unordered pairs and numbers rows 1..15") {
  FakeEval fake;
  fake.add(UtteranceLabel::positive, 0.9);
  fake.add(UtteranceLabel::negative, 0.1);

  const auto pairs = kws::default_pair_grid();
  REQUIRE(pairs.size() == 15);
  kws::FusionConfig fusion;
  const auto summary = kws::sweep_double_tracks(pairs, fake.corpus, fake.tracks, {}, fusion);
  REQUIRE(summary.rows.size() == 15);
  for (int i = 0; i < 15; ++i) CHECK(summary.rows[static_cast<std::size_t>(i)].config_id == i + 1);

  const std::vector<SensitivityPair> bad = {{{0.55}, {0.55}}};
  CHECK_THROWS_AS(kws::sweep_double_tracks(bad, fake.corpus, fake.tracks, {}, fusion),
                  std::invalid_argument);
}

TEST_CASE("all-normal telemetry collapses the double sweep onto sen_1") {
  FakeEval fake;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 25; ++i)
    fake.add(i % 2 ? UtteranceLabel::positive : UtteranceLabel::negative, unit(rng), unit(rng) * 50.0);

  const std::vector<ManeuverState> normal_states = {{0.0, DriveState::normal, 0.0, 0.0},
                                                    {100.0, DriveState::normal, 0.0, 0.0}};
  kws::FusionConfig fusion;
  fusion.staleness_limit_s = 1000.0;

  const std::vector<SensitivityPair> pairs = {{{0.50}, {0.58}}};
  const auto fused = kws::sweep_double_tracks(pairs, fake.corpus, fake.tracks, normal_states, fusion);
  const std::vector<double> single_grid = {0.50};
  const auto single = kws::sweep_single_tracks(single_grid, fake.corpus, fake.tracks);
  CHECK(fused.rows[0].metrics.tp == single.rows[0].metrics.tp);
  CHECK(fused.rows[0].metrics.fp == single.rows[0].metrics.fp);
  CHECK(fused.rows[0].metrics.fn == single.rows[0].metrics.fn);
  CHECK(fused.rows[0].metrics.tn == single.rows[0].metrics.tn);
}

TEST_CASE("corpus writes and loads through the manifest") {
  CorpusSpec spec;
  spec.n_positive = 3;
  spec.n_negative = 3;
  spec.seed = 17;
  const TestCorpus corpus = kws::synthesize_corpus(spec);

  const auto dir = std::filesystem::temp_directory_path() / "kws_corpus_test";
  std::filesystem::remove_all(dir);
  const auto manifest = kws::write_corpus(dir, corpus);
  const TestCorpus loaded = kws::load_corpus(manifest);

  REQUIRE(loaded.utterances.size() == corpus.utterances.size());
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    CHECK(loaded.utterances[i].id == corpus.utterances[i].id);
    CHECK(loaded.utterances[i].label == corpus.utterances[i].label);
    CHECK(loaded.utterances[i].variant == corpus.utterances[i].variant);
    CHECK(loaded.utterances[i].trace_timestamp_s == corpus.utterances[i].trace_timestamp_s);
    CHECK(loaded.utterances[i].segments.size() == corpus.utterances[i].segments.size());
    // samples are quantized at synthesis time, so the WAV round trip is exact
    CHECK(loaded.utterances[i].audio.samples == corpus.utterances[i].audio.samples);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("frame labels track the sub-word segments") {
  CorpusSpec spec;
  spec.n_positive = 1;
  spec.n_negative = 1;
  spec.seed = 23;
  spec.confusable_negatives = false;
  const TestCorpus corpus = kws::synthesize_corpus(spec);

  const auto& pos = corpus.utterances[0];
  REQUIRE(pos.segments.size() == 2);
  const auto labels = kws::frame_labels(pos, 30.0, 10.0);
  CHECK(std::count(labels.begin(), labels.end(), 1) > 0);
  CHECK(std::count(labels.begin(), labels.end(), 2) > 0);
  // ordering: every label-1 frame precedes every label-2 frame
  int last_one = -1, first_two = 1 << 20;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] == 1) last_one = static_cast<int>(j);
    if (labels[j] == 2) first_two = std::min(first_two, static_cast<int>(j));
  }
  CHECK(last_one < first_two);

  const auto& neg = corpus.utterances[1];
  const auto neg_labels = kws::frame_labels(neg, 30.0, 10.0);
  for (const int l : neg_labels) CHECK(l == 0);
  // filler is still voiced for the VAD
  const auto voiced = kws::frame_voiced_mask(neg, 30.0, 10.0);
  CHECK(std::count(voiced.begin(), voiced.end(), 1) > 0);
}

}  // TEST_SUITE
