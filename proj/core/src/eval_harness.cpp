#include "kws/eval_harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <stdexcept>
#include <thread>

namespace kws {

Metrics Metrics::from_counts(long tp, long fp, long fn, long tn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  m.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  return m;
}

Metrics evaluate(const UtteranceRunner& runner, const TestCorpus& corpus) {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& utt : corpus.utterances) {
    const bool activated = !runner(utt).empty();
    const bool positive = utt.label == UtteranceLabel::positive;
    if (positive && activated) ++tp;
    else if (positive) ++fn;
    else if (activated) ++fp;
    else ++tn;
  }
  return Metrics::from_counts(tp, fp, fn, tn);
}

SummaryStats summarize(std::span<const double> values, bool sample_variance) {
  if (values.empty()) throw std::invalid_argument("summarize: no values");
  SummaryStats s;
  for (const double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() == 1) return s;  // mse 0
  double acc = 0.0;
  for (const double v : values) acc += (v - s.mean) * (v - s.mean);
  const double denom =
      sample_variance ? static_cast<double>(values.size() - 1) : static_cast<double>(values.size());
  s.mse = acc / denom;
  return s;
}

std::vector<ScoreTrack> score_corpus(const TestCorpus& corpus, const PipelineModels& models,
                                     const PipelineConfig& config, int n_threads) {
  const std::size_t n = corpus.utterances.size();
  std::vector<ScoreTrack> tracks(n);
  if (n == 0) return tracks;

  unsigned workers = n_threads > 0 ? static_cast<unsigned>(n_threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(n));

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      tracks[i] = compute_scores(corpus.utterances[i].audio, models, config,
                                 corpus.utterances[i].trace_timestamp_s);
  };

  if (workers <= 1) {
    work(0, n);
    return tracks;
  }
  std::vector<std::future<void>> futures;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    if (begin >= n) break;
    futures.push_back(std::async(std::launch::async, work, begin, std::min(n, begin + chunk)));
  }
  for (auto& f : futures) f.get();
  return tracks;
}

namespace {

Metrics metrics_for_tracks(const TestCorpus& corpus, std::span<const ScoreTrack> tracks,
                           std::span<const ManeuverState> states, const FusionConfig& fusion) {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const bool activated = !detect_on_track(tracks[i], states, fusion).empty();
    const bool positive = corpus.utterances[i].label == UtteranceLabel::positive;
    if (positive && activated) ++tp;
    else if (positive) ++fn;
    else if (activated) ++fp;
    else ++tn;
  }
  return Metrics::from_counts(tp, fp, fn, tn);
}

void finish_summary(SweepSummary& summary) {
  std::vector<double> precisions, recalls;
  for (const auto& row : summary.rows) {
    precisions.push_back(row.metrics.precision);
    recalls.push_back(row.metrics.recall);
  }
  const SummaryStats p = summarize(precisions);
  const SummaryStats r = summarize(recalls);
  summary.mean_precision = p.mean;
  summary.mse_precision = p.mse;
  summary.mean_recall = r.mean;
  summary.mse_recall = r.mse;
}

}  // namespace

SweepSummary sweep_single_tracks(std::span<const double> sensitivities, const TestCorpus& corpus,
                                 std::span<const ScoreTrack> tracks) {
  if (sensitivities.empty()) throw std::invalid_argument("sweep_single: empty grid");
  SweepSummary summary;
  int id = 1;
  for (const double sen : sensitivities) {
    FusionConfig fusion;
    fusion.pair = {{sen}, {sen}};
    SweepRow row;
    row.config_id = id++;
    row.sen_1 = sen;
    row.sen_2 = sen;
    row.metrics = metrics_for_tracks(corpus, tracks, {}, fusion);
    summary.rows.push_back(row);
  }
  finish_summary(summary);
  return summary;
}

SweepSummary sweep_double_tracks(std::span<const SensitivityPair> pairs, const TestCorpus& corpus,
                                 std::span<const ScoreTrack> tracks,
                                 std::span<const ManeuverState> states,
                                 const FusionConfig& fusion_base) {
  if (pairs.empty()) throw std::invalid_argument("sweep_double: empty grid");
  for (const auto& pair : pairs)
    if (!(pair.normal.value < pair.sensitive.value))
      throw std::invalid_argument("sweep_double: pair requires sen_1 < sen_2");

  SweepSummary summary;
  int id = 1;
  for (const auto& pair : pairs) {
    FusionConfig fusion = fusion_base;
    fusion.pair = pair;
    SweepRow row;
    row.config_id = id++;
    row.sen_1 = pair.normal.value;
    row.sen_2 = pair.sensitive.value;
    row.metrics = metrics_for_tracks(corpus, tracks, states, fusion);
    summary.rows.push_back(row);
  }
  finish_summary(summary);
  return summary;
}

SweepSummary sweep_single(std::span<const double> sensitivities, const TestCorpus& corpus,
                          const PipelineModels& models, const PipelineConfig& config,
                          int n_threads) {
  const std::vector<ScoreTrack> tracks = score_corpus(corpus, models, config, n_threads);
  return sweep_single_tracks(sensitivities, corpus, tracks);
}

SweepSummary sweep_double(std::span<const SensitivityPair> pairs, const TestCorpus& corpus,
                          std::span<const GeoSample> trace, const PipelineModels& models,
                          const PipelineConfig& config, int n_threads) {
  std::vector<ManeuverState> states;
  if (trace.size() >= 2) {
    const std::vector<VehicleState> vehicle = derive_states(trace);
    if (vehicle.size() >= 2)
      states = classify_maneuver(vehicle, config.fusion.thresholds,
                                 config.fusion.telemetry_smoothing_window);
  }
  const std::vector<ScoreTrack> tracks = score_corpus(corpus, models, config, n_threads);
  return sweep_double_tracks(pairs, corpus, tracks, states, config.fusion);
}

std::vector<double> default_single_grid() { return {0.495, 0.50, 0.52, 0.55, 0.57, 0.58}; }

std::vector<SensitivityPair> default_pair_grid() {
  const std::vector<double> grid = default_single_grid();
  std::vector<SensitivityPair> pairs;
  for (std::size_t a = 0; a < grid.size(); ++a)
    for (std::size_t b = a + 1; b < grid.size(); ++b)
      pairs.push_back({{grid[a]}, {grid[b]}});
  return pairs;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepSummary& summary) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write sweep results: " + path.string());
  f << "config_id,sen_1,sen_2,tp,fp,fn,tn,precision,recall\n";
  char buf[192];
  for (const auto& row : summary.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%ld,%ld,%ld,%ld,%.9g,%.9g\n", row.config_id,
                  row.sen_1, row.sen_2, row.metrics.tp, row.metrics.fp, row.metrics.fn,
                  row.metrics.tn, row.metrics.precision, row.metrics.recall);
    f << buf;
  }
}

void write_summary_csv(const std::filesystem::path& path, const SweepSummary& summary) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write summary: " + path.string());
  f << "mean_precision,mean_recall,mse_precision,mse_recall\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g\n", summary.mean_precision,
                summary.mean_recall, summary.mse_precision, summary.mse_recall);
  f << buf;
}

}  // namespace kws
