#pragma once

#include "kws/corpus.hpp"
#include "kws/fusion.hpp"

namespace kws {

struct TrainerOptions {
  int hidden_layers = 3;
  int hidden_nodes = 128;
  int epochs = 30;
  double learning_rate = 0.05;
  int batch_size = 32;
  int frame_stride = 1;  // keep every n-th frame of each utterance
  int gmm_components = 30;
  int gmm_iters = 40;
  std::uint64_t seed = 0;
};

// Stacked DNN inputs + labels from the corpus' segment annotations.
// n_labels is 1 + the largest segment label in the corpus.
TrainingSet build_training_set(const TestCorpus& corpus, const FrontendConfig& frontend,
                               int frame_stride = 1);

struct VadTrainingData {
  std::vector<FeatureVector> speech;     // frames inside voiced segments
  std::vector<FeatureVector> nonspeech;  // noise-only frames
};

VadTrainingData build_vad_training_data(const TestCorpus& corpus, const FrontendConfig& frontend);

struct TrainReport {
  double final_loss = 0.0;
  double frame_accuracy = 0.0;
  std::vector<double> epoch_losses;
};

// Trains the VAD GMM pair and the KWS DNN from one corpus.
PipelineModels train_pipeline_models(const TestCorpus& corpus, const FrontendConfig& frontend,
                                     const TrainerOptions& options, TrainReport* report = nullptr);

}  // namespace kws
