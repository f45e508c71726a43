#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kws/dsp_frontend.hpp"

namespace kws {

struct Topology {
  int input_dim = 0;
  int hidden_layers = 3;
  int hidden_nodes = 128;
  int n_labels = 3;  // label 0 is filler

  void validate() const;
  int layer_count() const { return hidden_layers + 1; }
};

struct DenseLayer {
  int rows = 0;  // outputs
  int cols = 0;  // inputs
  std::vector<double> weights;  // row-major, rows x cols
  std::vector<double> bias;     // rows
};

struct NetworkParams {
  Topology topology;
  std::vector<DenseLayer> layers;

  void validate() const;  // shape consistency and finiteness
};

// Per-frame label posterior; entries sum to 1.
struct PosteriorFrame {
  std::vector<double> probs;
  int frame_index = 0;
};

struct TrainingSet {
  std::vector<StackedInput> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
};

struct TrainResult {
  NetworkParams params;
  // epoch_losses[0] is the mean cross-entropy at initialization;
  // epoch_losses[e] for e >= 1 is the full-set loss after epoch e.
  std::vector<double> epoch_losses;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// ReLU hidden layers, numerically stable softmax output.
PosteriorFrame forward(const NetworkParams& params, std::span<const double> x,
                       int frame_index = 0);

// He-style scaled uniform initialization, biases zero. Deterministic per seed.
NetworkParams initialize_params(const Topology& topology, std::uint64_t seed);

// Mini-batch SGD minimizing mean cross-entropy, seeded shuffling.
// Throws TrainingDiverged if the loss goes non-finite.
TrainResult train_sgd(const Topology& topology, const TrainingSet& data, int epochs,
                      double learning_rate, int batch_size, std::uint64_t seed);

// Gradient of the per-example cross-entropy -log p_label(x), flattened in
// layer order (weights row-major, then bias, per layer).
std::vector<double> backprop_gradient(const NetworkParams& params, std::span<const double> x,
                                      int label);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
};

// Central finite differences over every parameter vs backprop_gradient.
GradientCheckResult gradient_check(const NetworkParams& params, std::span<const double> x,
                                   int label, double epsilon = 1e-5);

// JSON weight file with 17-significant-digit floats (bit-exact round trip):
// {"topology": {...}, "layers": [{"rows", "cols", "weights", "bias"}]}.
std::string params_to_json(const NetworkParams& params);
NetworkParams params_from_json(const std::string& text);
void save_params(const std::filesystem::path& path, const NetworkParams& params);
NetworkParams load_params(const std::filesystem::path& path);

double frame_accuracy(const NetworkParams& params, const TrainingSet& data);

}  // namespace kws
