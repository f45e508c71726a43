#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kws/dsp_frontend.hpp"

namespace kws {

inline constexpr double kVarianceFloor = 1e-6;

struct GmmComponent {
  double weight = 0.0;
  std::vector<double> means;
  std::vector<double> variances;  // diagonal covariance
};

struct GmmModel {
  std::vector<GmmComponent> components;

  std::size_t dim() const { return components.empty() ? 0 : components[0].means.size(); }
  // Weights sum to 1 within 1e-9, variances floored, shapes consistent.
  void validate() const;
};

// log sum_c w_c N(x; mu_c, diag sigma2_c), via log-sum-exp.
double gmm_log_likelihood(const GmmModel& model, std::span<const double> x);

// Bayes posterior P(speech | x) from two class-conditional GMMs.
double speech_posterior(const GmmModel& speech_model, const GmmModel& nonspeech_model,
                        std::span<const double> x, double prior_speech = 0.5);

struct GmmFitResult {
  GmmModel model;
  // Total data log-likelihood recorded at the start of each EM iteration.
  std::vector<double> log_likelihoods;
};

// Seeded k-means++ initialization followed by EM with a variance floor.
// Deterministic per seed. Throws if data.size() < n_components.
GmmFitResult fit_gmm_em(std::span<const FeatureVector> data, int n_components = 30,
                        int max_iters = 50, std::uint64_t seed = 0);

struct VadConfig {
  double posterior_threshold = 0.5;
  int window_frames = 10;
  double majority_fraction = 0.6;
  int hangover_frames = 5;
  double prior_speech = 0.5;
};

struct SpeechRegion {
  int start_frame = 0;
  int end_frame = 0;  // inclusive
};

// Majority-vote state machine over a trailing window of posteriors. A frame is
// voted speech when at least majority_fraction of its trailing window exceeds
// posterior_threshold; the speech state survives up to hangover_frames
// consecutive non-speech votes. Emitted regions end at the last speech-voted
// frame and never overlap.
std::vector<SpeechRegion> detect_speech_regions(std::span<const double> posteriors,
                                                const VadConfig& config);

// Flattens regions into a per-frame speech mask of length n_frames.
std::vector<std::uint8_t> region_mask(std::span<const SpeechRegion> regions, std::size_t n_frames);

// JSON schema: {"dim": d, "components": [{"weight": w, "means": [...], "variances": [...]}]}
std::string gmm_to_json(const GmmModel& model);
GmmModel gmm_from_json(const std::string& text);
void save_gmm(const std::filesystem::path& path, const GmmModel& model);
GmmModel load_gmm(const std::filesystem::path& path);

// One {"start_frame": a, "end_frame": b} object per line.
void write_regions_jsonl(const std::filesystem::path& path, std::span<const SpeechRegion> regions);

}  // namespace kws
