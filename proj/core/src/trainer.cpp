#include "kws/trainer.hpp"

#include <algorithm>
#include <stdexcept>

#include "kws/fft.hpp"

namespace kws {

namespace {

FrameSequence frames_of(const Utterance& utt, const FrontendConfig& fe) {
  const AudioBuffer emphasized =
      fe.pre_emphasis != 0.0 ? pre_emphasize(utt.audio, fe.pre_emphasis) : utt.audio;
  return frame_signal(emphasized, fe.frame_len_ms, fe.hop_ms);
}

}  // namespace

TrainingSet build_training_set(const TestCorpus& corpus, const FrontendConfig& frontend,
                               int frame_stride) {
  if (frame_stride < 1) throw std::invalid_argument("build_training_set: stride must be >= 1");

  TrainingSet set;
  for (const auto& utt : corpus.utterances) {
    const FrameSequence frames = frames_of(utt, frontend);
    const std::size_t n_frames = frames.size();
    if (n_frames == 0) continue;

    const MelFilterbank bank(frames.sample_rate, next_pow2(frames.frame_len), frontend.n_mels);
    std::vector<FeatureVector> features(n_frames);
    for (std::size_t j = 0; j < n_frames; ++j) {
      FeatureVector fv = log_filterbank(bank, frames.frame(j));
      for (double& v : fv.values) v = (v + frontend.feature_offset) * frontend.feature_scale;
      fv.frame_index = static_cast<int>(j);
      features[j] = std::move(fv);
    }

    const std::vector<int> labels = frame_labels(utt, frontend.frame_len_ms, frontend.hop_ms);
    for (std::size_t j = 0; j < n_frames; j += static_cast<std::size_t>(frame_stride)) {
      set.inputs.push_back(
          stack_context(features, j, frontend.context_past, frontend.context_future));
      set.labels.push_back(labels[j]);
    }
  }
  return set;
}

VadTrainingData build_vad_training_data(const TestCorpus& corpus, const FrontendConfig& frontend) {
  VadTrainingData data;
  for (const auto& utt : corpus.utterances) {
    const FrameSequence frames = frames_of(utt, frontend);
    if (frames.size() == 0) continue;
    const std::vector<FeatureVector> features = mfcc_with_deltas(frames);
    const std::vector<std::uint8_t> voiced =
        frame_voiced_mask(utt, frontend.frame_len_ms, frontend.hop_ms);
    for (std::size_t j = 0; j < features.size(); ++j) {
      if (voiced[j])
        data.speech.push_back(features[j]);
      else
        data.nonspeech.push_back(features[j]);
    }
  }
  return data;
}

PipelineModels train_pipeline_models(const TestCorpus& corpus, const FrontendConfig& frontend,
                                     const TrainerOptions& options, TrainReport* report) {
  const VadTrainingData vad_data = build_vad_training_data(corpus, frontend);
  if (vad_data.speech.size() < static_cast<std::size_t>(options.gmm_components) ||
      vad_data.nonspeech.size() < static_cast<std::size_t>(options.gmm_components))
    throw std::invalid_argument("train_pipeline_models: not enough frames for the VAD GMMs");

  PipelineModels models;
  models.vad_speech = fit_gmm_em(vad_data.speech, options.gmm_components, options.gmm_iters,
                                 mix_seed(options.seed, 1))
                          .model;
  models.vad_nonspeech = fit_gmm_em(vad_data.nonspeech, options.gmm_components, options.gmm_iters,
                                    mix_seed(options.seed, 2))
                             .model;

  const TrainingSet set = build_training_set(corpus, frontend, options.frame_stride);
  if (set.size() == 0) throw std::invalid_argument("train_pipeline_models: empty training set");
  int n_labels = 2;
  for (const int label : set.labels) n_labels = std::max(n_labels, label + 1);

  Topology topology;
  topology.input_dim = frontend.stacked_dim();
  topology.hidden_layers = options.hidden_layers;
  topology.hidden_nodes = options.hidden_nodes;
  topology.n_labels = n_labels;

  TrainResult result = train_sgd(topology, set, options.epochs, options.learning_rate,
                                 options.batch_size, mix_seed(options.seed, 3));
  if (report) {
    report->final_loss = result.epoch_losses.back();
    report->epoch_losses = result.epoch_losses;
    report->frame_accuracy = frame_accuracy(result.params, set);
  }
  models.dnn = std::move(result.params);
  return models;
}

}  // namespace kws
