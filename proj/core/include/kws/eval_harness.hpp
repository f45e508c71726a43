#pragma once

#include <functional>
#include <span>
#include <vector>

#include "kws/corpus.hpp"
#include "kws/fusion.hpp"

namespace kws {

struct Metrics {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 1.0;  // 1.0 when tp+fp == 0 (vacuous)
  double recall = 1.0;     // 1.0 when tp+fn == 0

  static Metrics from_counts(long tp, long fp, long fn, long tn);
};

using UtteranceRunner = std::function<std::vector<DetectionEvent>(const Utterance&)>;

// One utterance activates when it produces at least one event; an activated
// positive is a tp, an activated negative a fp.
Metrics evaluate(const UtteranceRunner& runner, const TestCorpus& corpus);

struct SweepRow {
  int config_id = 0;
  double sen_1 = 0.0;
  double sen_2 = 0.0;  // equals sen_1 for single-source rows
  Metrics metrics;
};

struct SweepSummary {
  std::vector<SweepRow> rows;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mse_precision = 0.0;
  double mse_recall = 0.0;
};

struct SummaryStats {
  double mean = 0.0;
  double mse = 0.0;
};

// mean and mean square error around the mean (population variance by default,
// sample variance when sample_variance is set).
SummaryStats summarize(std::span<const double> values, bool sample_variance = false);

// Score tracks are computed once per utterance and reused across the whole
// sensitivity grid. n_threads 0 = hardware concurrency.
std::vector<ScoreTrack> score_corpus(const TestCorpus& corpus, const PipelineModels& models,
                                     const PipelineConfig& config, int n_threads = 0);

SweepSummary sweep_single(std::span<const double> sensitivities, const TestCorpus& corpus,
                          const PipelineModels& models, const PipelineConfig& config,
                          int n_threads = 0);

// Rejects pairs with sen_1 >= sen_2. The trace is shared by all utterances;
// each one is aligned at its manifest timestamp.
SweepSummary sweep_double(std::span<const SensitivityPair> pairs, const TestCorpus& corpus,
                          std::span<const GeoSample> trace, const PipelineModels& models,
                          const PipelineConfig& config, int n_threads = 0);

// Same sweeps against precomputed tracks (used internally and by callers that
// evaluate several grids on one corpus).
SweepSummary sweep_single_tracks(std::span<const double> sensitivities,
                                 const TestCorpus& corpus, std::span<const ScoreTrack> tracks);
SweepSummary sweep_double_tracks(std::span<const SensitivityPair> pairs,
                                 const TestCorpus& corpus, std::span<const ScoreTrack> tracks,
                                 std::span<const ManeuverState> states,
                                 const FusionConfig& fusion);

// Sensitivity grids used throughout the evaluation (the acceptable range is
// 0.495-0.58; pairs are all ordered combinations of the single grid).
std::vector<double> default_single_grid();
std::vector<SensitivityPair> default_pair_grid();

// results CSV: config_id,sen_1,sen_2,tp,fp,fn,tn,precision,recall
void write_sweep_csv(const std::filesystem::path& path, const SweepSummary& summary);
// summary CSV: mean_precision,mean_recall,mse_precision,mse_recall
void write_summary_csv(const std::filesystem::path& path, const SweepSummary& summary);

}  // namespace kws
