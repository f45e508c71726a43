#include "kws/dnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "kws/common.hpp"

namespace kws {

void Topology::validate() const {
  if (input_dim < 1 || hidden_layers < 1 || hidden_nodes < 1)
    throw std::invalid_argument("Topology: all counts must be >= 1");
  if (n_labels < 2) throw std::invalid_argument("Topology: need at least 2 labels");
}

void NetworkParams::validate() const {
  topology.validate();
  if (static_cast<int>(layers.size()) != topology.layer_count())
    throw std::invalid_argument("NetworkParams: wrong layer count");
  for (int l = 0; l < topology.layer_count(); ++l) {
    const auto& layer = layers[static_cast<std::size_t>(l)];
    const int expect_in = l == 0 ? topology.input_dim : topology.hidden_nodes;
    const int expect_out = l == topology.layer_count() - 1 ? topology.n_labels : topology.hidden_nodes;
    if (layer.cols != expect_in || layer.rows != expect_out)
      throw std::invalid_argument("NetworkParams: layer " + std::to_string(l) + " has shape " +
                                  std::to_string(layer.rows) + "x" + std::to_string(layer.cols));
    if (layer.weights.size() != static_cast<std::size_t>(layer.rows) * static_cast<std::size_t>(layer.cols) ||
        layer.bias.size() != static_cast<std::size_t>(layer.rows))
      throw std::invalid_argument("NetworkParams: layer " + std::to_string(l) + " storage mismatch");
    for (const double w : layer.weights)
      if (!std::isfinite(w)) throw std::runtime_error("NetworkParams: non-finite weight in layer " + std::to_string(l));
    for (const double b : layer.bias)
      if (!std::isfinite(b)) throw std::runtime_error("NetworkParams: non-finite bias in layer " + std::to_string(l));
  }
}

namespace {

void affine(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(layer.rows));
  const double* w = layer.weights.data();
  for (int r = 0; r < layer.rows; ++r) {
    double acc = layer.bias[static_cast<std::size_t>(r)];
    const double* row = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(layer.cols);
    for (int c = 0; c < layer.cols; ++c) acc += row[c] * in[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = acc;
  }
}

void relu_inplace(std::vector<double>& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

void softmax_inplace(std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

// Forward pass keeping every activation; activations[0] is the input copy.
void forward_trace(const NetworkParams& params, std::span<const double> x,
                   std::vector<std::vector<double>>& activations) {
  const int n_layers = params.topology.layer_count();
  activations.resize(static_cast<std::size_t>(n_layers) + 1);
  activations[0].assign(x.begin(), x.end());
  for (int l = 0; l < n_layers; ++l) {
    affine(params.layers[static_cast<std::size_t>(l)], activations[static_cast<std::size_t>(l)],
           activations[static_cast<std::size_t>(l) + 1]);
    if (l < n_layers - 1)
      relu_inplace(activations[static_cast<std::size_t>(l) + 1]);
    else
      softmax_inplace(activations[static_cast<std::size_t>(l) + 1]);
  }
}

}  // namespace

PosteriorFrame forward(const NetworkParams& params, std::span<const double> x, int frame_index) {
  if (static_cast<int>(x.size()) != params.topology.input_dim)
    throw std::invalid_argument("forward: input dim " + std::to_string(x.size()) + " != " +
                                std::to_string(params.topology.input_dim));
  std::vector<std::vector<double>> acts;
  forward_trace(params, x, acts);
  PosteriorFrame out;
  out.frame_index = frame_index;
  out.probs = std::move(acts.back());
  for (const double p : out.probs)
    if (!std::isfinite(p))
      throw std::runtime_error("forward: non-finite posterior (corrupt parameters?)");
  return out;
}

NetworkParams initialize_params(const Topology& topology, std::uint64_t seed) {
  topology.validate();
  NetworkParams params;
  params.topology = topology;
  std::mt19937_64 rng(mix_seed(seed, 0x696e6974));
  for (int l = 0; l < topology.layer_count(); ++l) {
    DenseLayer layer;
    layer.cols = l == 0 ? topology.input_dim : topology.hidden_nodes;
    layer.rows = l == topology.layer_count() - 1 ? topology.n_labels : topology.hidden_nodes;
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    layer.weights.resize(static_cast<std::size_t>(layer.rows) * static_cast<std::size_t>(layer.cols));
    for (double& w : layer.weights) w = dist(rng);
    layer.bias.assign(static_cast<std::size_t>(layer.rows), 0.0);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

namespace {

struct Gradients {
  std::vector<DenseLayer> layers;  // same shapes, gradient values

  void zero_like(const NetworkParams& params) {
    layers.resize(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      layers[l].rows = params.layers[l].rows;
      layers[l].cols = params.layers[l].cols;
      layers[l].weights.assign(params.layers[l].weights.size(), 0.0);
      layers[l].bias.assign(params.layers[l].bias.size(), 0.0);
    }
  }
};

// Accumulates the gradient for one example into grads; returns its loss.
double accumulate_example(const NetworkParams& params, std::span<const double> x, int label,
                          Gradients& grads, std::vector<std::vector<double>>& acts,
                          std::vector<double>& delta, std::vector<double>& delta_prev) {
  forward_trace(params, x, acts);
  const int n_layers = params.topology.layer_count();
  const auto& probs = acts[static_cast<std::size_t>(n_layers)];
  const double loss = -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));

  delta = probs;
  delta[static_cast<std::size_t>(label)] -= 1.0;

  for (int l = n_layers - 1; l >= 0; --l) {
    const auto& layer = params.layers[static_cast<std::size_t>(l)];
    auto& g = grads.layers[static_cast<std::size_t>(l)];
    const auto& input = acts[static_cast<std::size_t>(l)];
    for (int r = 0; r < layer.rows; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      g.bias[static_cast<std::size_t>(r)] += d;
      double* grow = g.weights.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(layer.cols);
      for (int c = 0; c < layer.cols; ++c) grow[c] += d * input[static_cast<std::size_t>(c)];
    }
    if (l > 0) {
      delta_prev.assign(static_cast<std::size_t>(layer.cols), 0.0);
      for (int r = 0; r < layer.rows; ++r) {
        const double d = delta[static_cast<std::size_t>(r)];
        const double* row = layer.weights.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(layer.cols);
        for (int c = 0; c < layer.cols; ++c) delta_prev[static_cast<std::size_t>(c)] += d * row[c];
      }
      // ReLU mask: post-activation > 0 iff pre-activation > 0
      for (int c = 0; c < layer.cols; ++c)
        if (input[static_cast<std::size_t>(c)] <= 0.0) delta_prev[static_cast<std::size_t>(c)] = 0.0;
      delta.swap(delta_prev);
    }
  }
  return loss;
}

double full_set_loss(const NetworkParams& params, const TrainingSet& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const PosteriorFrame p = forward(params, data.inputs[i].values);
    total += -std::log(std::max(p.probs[static_cast<std::size_t>(data.labels[i])], 1e-300));
  }
  return total / static_cast<double>(data.size());
}

}  // namespace

TrainResult train_sgd(const Topology& topology, const TrainingSet& data, int epochs,
                      double learning_rate, int batch_size, std::uint64_t seed) {
  topology.validate();
  if (data.size() == 0) throw std::invalid_argument("train_sgd: empty training set");
  if (data.inputs.size() != data.labels.size())
    throw std::invalid_argument("train_sgd: inputs/labels size mismatch");
  if (learning_rate < 0.0) throw std::invalid_argument("train_sgd: negative learning rate");
  if (batch_size < 1) throw std::invalid_argument("train_sgd: batch_size must be >= 1");
  for (const int label : data.labels)
    if (label < 0 || label >= topology.n_labels)
      throw std::invalid_argument("train_sgd: label out of range");

  TrainResult result;
  result.params = initialize_params(topology, seed);
  result.epoch_losses.push_back(full_set_loss(result.params, data));

  std::mt19937_64 rng(mix_seed(seed, 0x73676400));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  Gradients grads;
  grads.zero_like(result.params);
  std::vector<std::vector<double>> acts;
  std::vector<double> delta, delta_prev;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
      grads.zero_like(result.params);
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        batch_loss += accumulate_example(result.params, data.inputs[idx].values,
                                         data.labels[idx], grads, acts, delta, delta_prev);
      }
      const double scale = learning_rate / static_cast<double>(end - start);
      if (!std::isfinite(batch_loss))
        throw TrainingDiverged(epoch, "train_sgd: loss diverged at epoch " + std::to_string(epoch));
      for (std::size_t l = 0; l < result.params.layers.size(); ++l) {
        auto& layer = result.params.layers[l];
        const auto& g = grads.layers[l];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] -= scale * g.weights[i];
        for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= scale * g.bias[i];
      }
    }
    const double epoch_loss = full_set_loss(result.params, data);
    if (!std::isfinite(epoch_loss))
      throw TrainingDiverged(epoch, "train_sgd: loss diverged at epoch " + std::to_string(epoch));
    result.epoch_losses.push_back(epoch_loss);
  }
  return result;
}

std::vector<double> backprop_gradient(const NetworkParams& params, std::span<const double> x,
                                      int label) {
  Gradients grads;
  grads.zero_like(params);
  std::vector<std::vector<double>> acts;
  std::vector<double> delta, delta_prev;
  accumulate_example(params, x, label, grads, acts, delta, delta_prev);

  std::vector<double> flat;
  for (const auto& g : grads.layers) {
    flat.insert(flat.end(), g.weights.begin(), g.weights.end());
    flat.insert(flat.end(), g.bias.begin(), g.bias.end());
  }
  return flat;
}

GradientCheckResult gradient_check(const NetworkParams& params, std::span<const double> x,
                                   int label, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2))
    throw std::invalid_argument("gradient_check: epsilon must be in (0, 1e-2]");

  const std::vector<double> analytic = backprop_gradient(params, x, label);

  NetworkParams probe = params;
  auto loss_at = [&](void) {
    const PosteriorFrame p = forward(probe, x);
    return -std::log(std::max(p.probs[static_cast<std::size_t>(label)], 1e-300));
  };

  GradientCheckResult result;
  std::size_t flat_idx = 0;
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    auto perturb = [&](std::vector<double>& vec) {
      for (double& value : vec) {
        const double saved = value;
        value = saved + epsilon;
        const double up = loss_at();
        value = saved - epsilon;
        const double down = loss_at();
        value = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = analytic[flat_idx++];
        const double abs_err = std::abs(a - numeric);
        const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-8});
        result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
        result.max_relative_error = std::max(result.max_relative_error, rel_err);
      }
    };
    perturb(probe.layers[l].weights);
    perturb(probe.layers[l].bias);
  }
  return result;
}

namespace {

void dump_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void dump_array(std::string& out, const std::vector<double>& v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    dump_double(out, v[i]);
  }
  out += ']';
}

}  // namespace

std::string params_to_json(const NetworkParams& params) {
  std::string out;
  out.reserve(params.layers.empty() ? 256 : params.layers[0].weights.size() * 24);
  out += "{\"topology\":{\"input_dim\":" + std::to_string(params.topology.input_dim) +
         ",\"hidden_layers\":" + std::to_string(params.topology.hidden_layers) +
         ",\"hidden_nodes\":" + std::to_string(params.topology.hidden_nodes) +
         ",\"n_labels\":" + std::to_string(params.topology.n_labels) + "},\"layers\":[";
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    if (l) out += ',';
    out += "{\"rows\":" + std::to_string(layer.rows) + ",\"cols\":" + std::to_string(layer.cols) +
           ",\"weights\":";
    dump_array(out, layer.weights);
    out += ",\"bias\":";
    dump_array(out, layer.bias);
    out += '}';
  }
  out += "]}";
  return out;
}

NetworkParams params_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("weight file parse error at byte " + std::to_string(e.byte) + ": " +
                             e.what());
  }
  NetworkParams params;
  const auto& jt = j.at("topology");
  params.topology.input_dim = jt.at("input_dim").get<int>();
  params.topology.hidden_layers = jt.at("hidden_layers").get<int>();
  params.topology.hidden_nodes = jt.at("hidden_nodes").get<int>();
  params.topology.n_labels = jt.at("n_labels").get<int>();
  int index = 0;
  for (const auto& jl : j.at("layers")) {
    DenseLayer layer;
    layer.rows = jl.at("rows").get<int>();
    layer.cols = jl.at("cols").get<int>();
    layer.weights = jl.at("weights").get<std::vector<double>>();
    layer.bias = jl.at("bias").get<std::vector<double>>();
    if (layer.weights.size() != static_cast<std::size_t>(layer.rows) * static_cast<std::size_t>(layer.cols) ||
        layer.bias.size() != static_cast<std::size_t>(layer.rows))
      throw std::runtime_error("weight file: declared size does not match data in layer " +
                               std::to_string(index));
    params.layers.push_back(std::move(layer));
    ++index;
  }
  params.validate();
  return params;
}

void save_params(const std::filesystem::path& path, const NetworkParams& params) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write weight file: " + path.string());
  f << params_to_json(params) << "\n";
}

NetworkParams load_params(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open weight file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return params_from_json(text);
}

double frame_accuracy(const NetworkParams& params, const TrainingSet& data) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const PosteriorFrame p = forward(params, data.inputs[i].values);
    const auto arg = std::distance(p.probs.begin(), std::max_element(p.probs.begin(), p.probs.end()));
    if (static_cast<int>(arg) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace kws
