#include <doctest.h>

#include <cmath>
#include <random>

#include "kws/dnn.hpp"

using kws::NetworkParams;
using kws::PosteriorFrame;
using kws::StackedInput;
using kws::Topology;
using kws::TrainingSet;

namespace {

Topology tiny_topology(int input_dim, int hidden, int nodes, int labels) {
  Topology t;
  t.input_dim = input_dim;
  t.hidden_layers = hidden;
  t.hidden_nodes = nodes;
  t.n_labels = labels;
  return t;
}

StackedInput input_of(std::initializer_list<double> values) {
  StackedInput x;
  x.values = values;
  return x;
}

NetworkParams random_params(const Topology& t, std::uint64_t seed) {
  return kws::initialize_params(t, seed);
}

// Linearly separable 2-label set: label = sign of the first coordinate.
TrainingSet separable_toy_set() {
  TrainingSet set;
  std::mt19937_64 rng(314);
  std::uniform_real_distribution<double> unit(0.2, 1.0);
  std::uniform_real_distribution<double> other(-0.5, 0.5);
  for (int i = 0; i < 20; ++i) {
    const double sign = i % 2 == 0 ? 1.0 : -1.0;
    set.inputs.push_back(input_of({sign * unit(rng), other(rng), other(rng), other(rng)}));
    set.labels.push_back(sign > 0 ? 1 : 0);
  }
  return set;
}

}  // namespace

TEST_SUITE("dnn") {

TEST_CASE("zero parameters give the uniform posterior") {
  const Topology t = tiny_topology(4, 1, 3, 5);
  NetworkParams params = random_params(t, 1);
  for (auto& layer : params.layers) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  const PosteriorFrame p = kws::forward(params, std::vector<double>{0.5, -0.5, 1.0, 2.0});
  for (const double prob : p.probs) CHECK(prob == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("softmax is invariant to constant shifts of the output bias") {
  const Topology t = tiny_topology(6, 2, 8, 4);
  NetworkParams params = random_params(t, 2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> x(6);
  for (auto& v : x) v = dist(rng);

  const PosteriorFrame base = kws::forward(params, x);
  for (const double c : {0.1, -3.0, 42.0}) {
    NetworkParams shifted = params;
    for (double& b : shifted.layers.back().bias) b += c;
    const PosteriorFrame p = kws::forward(shifted, x);
    for (std::size_t i = 0; i < p.probs.size(); ++i)
      CHECK(p.probs[i] == doctest::Approx(base.probs[i]).epsilon(1e-12));
  }
}

TEST_CASE("hand-worked 2x2 forward pass") {
  Topology t = tiny_topology(2, 1, 2, 2);
  NetworkParams params;
  params.topology = t;
  params.layers.resize(2);
  params.layers[0] = {2, 2, {0.5, -0.25, -1.0, 0.75}, {0.1, -0.2}};
  params.layers[1] = {2, 2, {1.0, -1.0, 0.5, 2.0}, {0.0, 0.25}};

  // x = [1, 2]; pre-hidden = [0.5 - 0.5 + 0.1, -1 + 1.5 - 0.2] = [0.1, 0.3]
  // (both positive, ReLU passes); logits = [0.1 - 0.3, 0.05 + 0.6 + 0.25]
  //                                       = [-0.2, 0.9]
  const PosteriorFrame p = kws::forward(params, std::vector<double>{1.0, 2.0});
  const double e0 = std::exp(-0.2), e1 = std::exp(0.9);
  CHECK(p.probs[0] == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
  CHECK(p.probs[1] == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-12));
}

TEST_CASE("posteriors normalize over randomized parameters and inputs") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const Topology t = tiny_topology(3 + static_cast<int>(rng() % 5), 1 + static_cast<int>(rng() % 2),
                                     2 + static_cast<int>(rng() % 6), 2 + static_cast<int>(rng() % 4));
    const NetworkParams params = random_params(t, rng());
    std::vector<double> x(static_cast<std::size_t>(t.input_dim));
    for (auto& v : x) v = dist(rng);
    const PosteriorFrame p = kws::forward(params, x);
    double sum = 0.0;
    for (const double prob : p.probs) {
      CHECK(prob >= 0.0);
      CHECK(prob <= 1.0);
      sum += prob;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("dimension mismatch throws") {
  const NetworkParams params = random_params(tiny_topology(4, 1, 3, 2), 5);
  CHECK_THROWS_AS(kws::forward(params, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("backprop matches central finite differences") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const Topology t = tiny_topology(10, 1, 5, 3);
  const NetworkParams params = random_params(t, 99);
  std::vector<double> x(10);
  for (auto& v : x) v = dist(rng);

  const auto result = kws::gradient_check(params, x, 1, 1e-5);
  CHECK(result.max_relative_error < 1e-4);
}

TEST_CASE("gradient check is near zero at a uniform-output point") {
  // zero weights -> uniform posterior; with the label gradient balanced by
  // symmetric structure the finite differences agree absolutely
  const Topology t = tiny_topology(4, 1, 3, 2);
  NetworkParams params = random_params(t, 1);
  for (auto& layer : params.layers) {
    std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  const std::vector<double> x = {0.0, 0.0, 0.0, 0.0};
  const auto result = kws::gradient_check(params, x, 0, 1e-5);
  CHECK(result.max_absolute_error < 1e-8);
}

TEST_CASE("gradient check is deterministic") {
  const Topology t = tiny_topology(6, 2, 4, 3);
  const NetworkParams params = random_params(t, 7);
  const std::vector<double> x = {0.1, -0.2, 0.3, 0.4, -0.5, 0.6};
  const auto a = kws::gradient_check(params, x, 2, 1e-5);
  const auto b = kws::gradient_check(params, x, 2, 1e-5);
  CHECK(a.max_relative_error == b.max_relative_error);
  CHECK(a.max_absolute_error == b.max_absolute_error);
}

TEST_CASE("training reaches accuracy 1.0 on the separable toy set") {
  const TrainingSet set = separable_toy_set();
  const Topology t = tiny_topology(4, 1, 8, 2);
  const auto result = kws::train_sgd(t, set, 200, 0.5, 4, 11);
  CHECK(kws::frame_accuracy(result.params, set) == 1.0);
  CHECK(result.epoch_losses.size() == 201);
  CHECK(result.epoch_losses.back() < result.epoch_losses.front());
}

TEST_CASE("training loss is non-increasing at a small learning rate") {
  const TrainingSet set = separable_toy_set();
  const Topology t = tiny_topology(4, 1, 8, 2);
  const auto result = kws::train_sgd(t, set, 60, 1e-3, 20, 13);
  for (std::size_t e = 1; e < result.epoch_losses.size(); ++e)
    CHECK(result.epoch_losses[e] <= result.epoch_losses[e - 1] + 1e-12);
}

TEST_CASE("zero learning rate keeps the initialization") {
  const TrainingSet set = separable_toy_set();
  const Topology t = tiny_topology(4, 2, 6, 2);
  const auto result = kws::train_sgd(t, set, 5, 0.0, 4, 21);
  const NetworkParams init = kws::initialize_params(t, 21);
  for (std::size_t l = 0; l < init.layers.size(); ++l) {
    CHECK(result.params.layers[l].weights == init.layers[l].weights);
    CHECK(result.params.layers[l].bias == init.layers[l].bias);
  }
}

TEST_CASE("same seed trains bit-identical parameters") {
  const TrainingSet set = separable_toy_set();
  const Topology t = tiny_topology(4, 1, 8, 2);
  const auto a = kws::train_sgd(t, set, 20, 0.1, 4, 31);
  const auto b = kws::train_sgd(t, set, 20, 0.1, 4, 31);
  for (std::size_t l = 0; l < a.params.layers.size(); ++l) {
    CHECK(a.params.layers[l].weights == b.params.layers[l].weights);
    CHECK(a.params.layers[l].bias == b.params.layers[l].bias);
  }
}

TEST_CASE("weight file round trip is bit exact") {
  const Topology t = tiny_topology(7, 2, 5, 3);
  const NetworkParams params = random_params(t, 8);
  const NetworkParams back = kws::params_from_json(kws::params_to_json(params));
  REQUIRE(back.layers.size() == params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    CHECK(back.layers[l].weights == params.layers[l].weights);
    CHECK(back.layers[l].bias == params.layers[l].bias);
  }
}

TEST_CASE("truncated weight file reports a parse error, not a crash") {
  const NetworkParams params = random_params(tiny_topology(4, 1, 3, 2), 9);
  const std::string text = kws::params_to_json(params);
  const std::string truncated = text.substr(0, text.size() / 2);
  CHECK_THROWS_WITH_AS(kws::params_from_json(truncated),
                       doctest::Contains("parse error at byte"), std::runtime_error);
}

TEST_CASE("mismatched matrix size names the layer") {
  const NetworkParams params = random_params(tiny_topology(4, 2, 3, 2), 10);
  std::string text = kws::params_to_json(params);
  // corrupt the declared rows of the second layer
  const auto pos = text.find("\"rows\":3", text.find("\"rows\":3") + 1);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 8, "\"rows\":9");
  CHECK_THROWS_WITH_AS(kws::params_from_json(text), doctest::Contains("layer 1"),
                       std::runtime_error);
}

}  // TEST_SUITE
