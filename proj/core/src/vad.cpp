#include "kws/vad.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "kws/common.hpp"

namespace kws {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

double log_gaussian_diag(const GmmComponent& c, std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double diff = x[d] - c.means[d];
    acc += std::log(c.variances[d]) + diff * diff / c.variances[d];
  }
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + acc);
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (const double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

}  // namespace

void GmmModel::validate() const {
  if (components.empty()) throw std::invalid_argument("GmmModel: no components");
  const std::size_t d = dim();
  double weight_sum = 0.0;
  for (const auto& c : components) {
    if (c.means.size() != d || c.variances.size() != d)
      throw std::invalid_argument("GmmModel: inconsistent component dimensions");
    for (const double v : c.variances)
      if (!(v >= kVarianceFloor))
        throw std::invalid_argument("GmmModel: variance below floor");
    weight_sum += c.weight;
  }
  if (std::abs(weight_sum - 1.0) > 1e-9)
    throw std::invalid_argument("GmmModel: weights sum to " + std::to_string(weight_sum));
}

double gmm_log_likelihood(const GmmModel& model, std::span<const double> x) {
  if (model.dim() != x.size())
    throw std::invalid_argument("gmm_log_likelihood: dimension mismatch (" +
                                std::to_string(model.dim()) + " vs " +
                                std::to_string(x.size()) + ")");
  std::vector<double> terms;
  terms.reserve(model.components.size());
  for (const auto& c : model.components) {
    if (c.weight <= 0.0) continue;
    terms.push_back(std::log(c.weight) + log_gaussian_diag(c, x));
  }
  if (terms.empty()) return -std::numeric_limits<double>::infinity();
  return log_sum_exp(terms);
}

double speech_posterior(const GmmModel& speech_model, const GmmModel& nonspeech_model,
                        std::span<const double> x, double prior_speech) {
  if (prior_speech <= 0.0) return 0.0;
  if (prior_speech >= 1.0) return 1.0;
  const double a = std::log(prior_speech) + gmm_log_likelihood(speech_model, x);
  const double b = std::log(1.0 - prior_speech) + gmm_log_likelihood(nonspeech_model, x);
  // sigmoid(a - b), stable on both sides
  const double diff = a - b;
  if (diff >= 0.0) return 1.0 / (1.0 + std::exp(-diff));
  const double e = std::exp(diff);
  return e / (1.0 + e);
}

namespace {

// Seeded k-means++ center selection over the data points.
std::vector<std::size_t> kmeanspp_centers(std::span<const FeatureVector> data, int k,
                                          std::mt19937_64& rng) {
  const std::size_t n = data.size();
  std::vector<std::size_t> centers;
  centers.reserve(static_cast<std::size_t>(k));
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  centers.push_back(first(rng));

  std::vector<double> min_dist2(n, std::numeric_limits<double>::max());
  auto update_dist = [&](std::size_t center_idx) {
    const auto& c = data[center_idx].values;
    for (std::size_t i = 0; i < n; ++i) {
      double d2 = 0.0;
      const auto& x = data[i].values;
      for (std::size_t d = 0; d < x.size(); ++d) {
        const double diff = x[d] - c[d];
        d2 += diff * diff;
      }
      min_dist2[i] = std::min(min_dist2[i], d2);
    }
  };
  update_dist(centers[0]);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (centers.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (const double d2 : min_dist2) total += d2;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = unit(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_dist2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      // all remaining distances zero (duplicate points): spread uniformly
      pick = first(rng);
    }
    centers.push_back(pick);
    update_dist(pick);
  }
  return centers;
}

}  // namespace

GmmFitResult fit_gmm_em(std::span<const FeatureVector> data, int n_components, int max_iters,
                        std::uint64_t seed) {
  if (n_components < 1) throw std::invalid_argument("fit_gmm_em: n_components must be >= 1");
  if (data.size() < static_cast<std::size_t>(n_components))
    throw std::invalid_argument("fit_gmm_em: " + std::to_string(data.size()) +
                                " points for " + std::to_string(n_components) + " components");
  const std::size_t n = data.size();
  const std::size_t dim = data[0].dim();
  for (const auto& fv : data)
    if (fv.dim() != dim) throw std::invalid_argument("fit_gmm_em: ragged feature dimensions");

  // Global per-dimension variance, used as the initial spread of every component.
  std::vector<double> global_mean(dim, 0.0), global_var(dim, 0.0);
  for (const auto& fv : data)
    for (std::size_t d = 0; d < dim; ++d) global_mean[d] += fv.values[d];
  for (std::size_t d = 0; d < dim; ++d) global_mean[d] /= static_cast<double>(n);
  for (const auto& fv : data)
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = fv.values[d] - global_mean[d];
      global_var[d] += diff * diff;
    }
  for (std::size_t d = 0; d < dim; ++d)
    global_var[d] = std::max(global_var[d] / static_cast<double>(n), kVarianceFloor);

  std::mt19937_64 rng(mix_seed(seed, 0x6d6d67));
  const std::vector<std::size_t> centers = kmeanspp_centers(data, n_components, rng);

  GmmModel model;
  model.components.resize(static_cast<std::size_t>(n_components));
  for (int c = 0; c < n_components; ++c) {
    auto& comp = model.components[static_cast<std::size_t>(c)];
    comp.weight = 1.0 / n_components;
    comp.means = data[centers[static_cast<std::size_t>(c)]].values;
    comp.variances = global_var;
  }

  GmmFitResult result;
  std::vector<double> log_terms(static_cast<std::size_t>(n_components));
  std::vector<std::vector<double>> resp(n, std::vector<double>(static_cast<std::size_t>(n_components)));

  for (int iter = 0; iter < max_iters; ++iter) {
    // E-step; also accumulates the total log-likelihood under current params.
    double total_ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = std::span<const double>(data[i].values);
      for (int c = 0; c < n_components; ++c) {
        const auto& comp = model.components[static_cast<std::size_t>(c)];
        log_terms[static_cast<std::size_t>(c)] =
            (comp.weight > 0.0 ? std::log(comp.weight) : -std::numeric_limits<double>::infinity()) +
            log_gaussian_diag(comp, x);
      }
      const double lse = log_sum_exp(log_terms);
      total_ll += lse;
      for (int c = 0; c < n_components; ++c)
        resp[i][static_cast<std::size_t>(c)] = std::exp(log_terms[static_cast<std::size_t>(c)] - lse);
    }

    if (!result.log_likelihoods.empty()) {
      const double prev = result.log_likelihoods.back();
      if (total_ll < prev - 1e-8 * std::max(1.0, std::abs(prev)))
        throw std::runtime_error("fit_gmm_em: log-likelihood decreased at iteration " +
                                 std::to_string(iter));
    }
    result.log_likelihoods.push_back(total_ll);

    // M-step
    bool converged = result.log_likelihoods.size() >= 2 &&
                     std::abs(total_ll - result.log_likelihoods[result.log_likelihoods.size() - 2]) <
                         1e-10 * std::max(1.0, std::abs(total_ll));
    if (converged) break;

    for (int c = 0; c < n_components; ++c) {
      auto& comp = model.components[static_cast<std::size_t>(c)];
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp[i][static_cast<std::size_t>(c)];
      if (nk < 1e-10) continue;  // starved component: keep previous parameters

      std::vector<double> mean(dim, 0.0), var(dim, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i][static_cast<std::size_t>(c)];
        for (std::size_t d = 0; d < dim; ++d) mean[d] += r * data[i].values[d];
      }
      for (std::size_t d = 0; d < dim; ++d) mean[d] /= nk;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i][static_cast<std::size_t>(c)];
        for (std::size_t d = 0; d < dim; ++d) {
          const double diff = data[i].values[d] - mean[d];
          var[d] += r * diff * diff;
        }
      }
      for (std::size_t d = 0; d < dim; ++d) var[d] = std::max(var[d] / nk, kVarianceFloor);

      comp.weight = nk / static_cast<double>(n);
      comp.means = std::move(mean);
      comp.variances = std::move(var);
    }

    // Renormalize weights against starved-component drift.
    double wsum = 0.0;
    for (const auto& comp : model.components) wsum += comp.weight;
    for (auto& comp : model.components) comp.weight /= wsum;
  }

  result.model = std::move(model);
  result.model.validate();
  return result;
}

std::vector<SpeechRegion> detect_speech_regions(std::span<const double> posteriors,
                                                const VadConfig& config) {
  if (config.window_frames < 1)
    throw std::invalid_argument("detect_speech_regions: window_frames must be >= 1");
  if (!(config.majority_fraction > 0.0 && config.majority_fraction <= 1.0))
    throw std::invalid_argument("detect_speech_regions: majority_fraction must be in (0,1]");

  const std::size_t n = posteriors.size();
  std::vector<SpeechRegion> regions;
  if (n == 0) return regions;

  bool in_speech = false;
  int region_start = 0;
  int last_voted = -1;
  int miss_streak = 0;

  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t start = j + 1 >= static_cast<std::size_t>(config.window_frames)
                                  ? j + 1 - static_cast<std::size_t>(config.window_frames)
                                  : 0;
    const std::size_t window = j - start + 1;
    std::size_t count = 0;
    for (std::size_t k = start; k <= j; ++k)
      if (posteriors[k] > config.posterior_threshold) ++count;
    const bool voted = static_cast<double>(count) >=
                       config.majority_fraction * static_cast<double>(window) - 1e-12;

    if (voted) {
      if (!in_speech) {
        in_speech = true;
        region_start = static_cast<int>(j);
      }
      last_voted = static_cast<int>(j);
      miss_streak = 0;
    } else if (in_speech) {
      ++miss_streak;
      if (miss_streak > config.hangover_frames) {
        regions.push_back({region_start, last_voted});
        in_speech = false;
        miss_streak = 0;
      }
    }
  }
  if (in_speech) regions.push_back({region_start, last_voted});
  return regions;
}

std::vector<std::uint8_t> region_mask(std::span<const SpeechRegion> regions, std::size_t n_frames) {
  std::vector<std::uint8_t> mask(n_frames, 0);
  for (const auto& r : regions)
    for (int j = r.start_frame; j <= r.end_frame && j < static_cast<int>(n_frames); ++j)
      if (j >= 0) mask[static_cast<std::size_t>(j)] = 1;
  return mask;
}

std::string gmm_to_json(const GmmModel& model) {
  nlohmann::json j;
  j["dim"] = model.dim();
  auto& comps = j["components"] = nlohmann::json::array();
  for (const auto& c : model.components) {
    nlohmann::json jc;
    jc["weight"] = c.weight;
    jc["means"] = c.means;
    jc["variances"] = c.variances;
    comps.push_back(std::move(jc));
  }
  return j.dump();
}

GmmModel gmm_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  GmmModel model;
  const auto dim = j.at("dim").get<std::size_t>();
  for (const auto& jc : j.at("components")) {
    GmmComponent c;
    c.weight = jc.at("weight").get<double>();
    c.means = jc.at("means").get<std::vector<double>>();
    c.variances = jc.at("variances").get<std::vector<double>>();
    if (c.means.size() != dim || c.variances.size() != dim)
      throw std::runtime_error("gmm_from_json: component dimension does not match declared dim");
    model.components.push_back(std::move(c));
  }
  model.validate();
  return model;
}

void save_gmm(const std::filesystem::path& path, const GmmModel& model) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write GMM file: " + path.string());
  f << gmm_to_json(model) << "\n";
}

GmmModel load_gmm(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open GMM file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return gmm_from_json(text);
}

void write_regions_jsonl(const std::filesystem::path& path,
                         std::span<const SpeechRegion> regions) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write regions file: " + path.string());
  for (const auto& r : regions)
    f << "{\"start_frame\":" << r.start_frame << ",\"end_frame\":" << r.end_frame << "}\n";
}

}  // namespace kws
