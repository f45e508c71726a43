#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "kws/analysis.hpp"
#include "kws/eval_harness.hpp"
#include "kws/fusion.hpp"
#include "kws/trainer.hpp"

namespace {

namespace fs = std::filesystem;

void log_line(const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); }

// The run-configuration JSON schema accepted by --config. CLI flags win over
// file values, file values win over defaults.
struct RunSettings {
  double sen_1 = 0.495;
  double sen_2 = 0.58;
  double s_thd = 0.5;
  double d_thd = 10.0;
  int w_s = 30;
  int w_max = 100;
  double staleness_limit_s = 5.0;
  int refractory_frames = 100;
};

void add_run_options(CLI::App* cmd, RunSettings& rs, std::string& config_path) {
  cmd->add_option("--config", config_path, "run configuration JSON (flags take precedence)");
  cmd->add_option("--sen-1", rs.sen_1, "normal-state sensitivity");
  cmd->add_option("--sen-2", rs.sen_2, "sensitive-state sensitivity");
  cmd->add_option("--s-thd", rs.s_thd, "speed-change threshold, m/s");
  cmd->add_option("--d-thd", rs.d_thd, "bearing-change threshold, degrees");
  cmd->add_option("--w-s", rs.w_s, "posterior smoothing window, frames");
  cmd->add_option("--w-max", rs.w_max, "score sliding window, frames");
  cmd->add_option("--staleness-limit-s", rs.staleness_limit_s, "telemetry staleness limit");
  cmd->add_option("--refractory-frames", rs.refractory_frames, "frames suppressed after an event");
}

void apply_config_file(CLI::App* cmd, RunSettings& rs, const std::string& config_path) {
  if (config_path.empty()) return;
  std::ifstream f(config_path);
  if (!f) throw std::runtime_error("cannot open config file: " + config_path);
  nlohmann::json j;
  f >> j;
  auto take = [&](const char* key, const char* flag, auto& out) {
    if (j.contains(key) && cmd->count(flag) == 0) out = j.at(key).get<std::decay_t<decltype(out)>>();
  };
  take("sen_1", "--sen-1", rs.sen_1);
  take("sen_2", "--sen-2", rs.sen_2);
  take("s_thd", "--s-thd", rs.s_thd);
  take("d_thd", "--d-thd", rs.d_thd);
  take("w_s", "--w-s", rs.w_s);
  take("w_max", "--w-max", rs.w_max);
  take("staleness_limit_s", "--staleness-limit-s", rs.staleness_limit_s);
  take("refractory_frames", "--refractory-frames", rs.refractory_frames);
}

kws::PipelineConfig pipeline_config_from(const RunSettings& rs) {
  kws::PipelineConfig config;
  config.fusion.pair = {{rs.sen_1}, {rs.sen_2}};
  config.fusion.thresholds = {rs.s_thd, rs.d_thd};
  config.fusion.smoothing.window_frames = rs.w_s;
  config.fusion.scoring.window_frames = rs.w_max;
  config.fusion.staleness_limit_s = rs.staleness_limit_s;
  config.fusion.refractory_frames = rs.refractory_frames;
  return config;
}

struct ModelPaths {
  std::string dnn;
  std::string vad_speech;
  std::string vad_nonspeech;
};

void add_model_options(CLI::App* cmd, ModelPaths& paths) {
  cmd->add_option("--dnn", paths.dnn, "DNN weight file")->required();
  cmd->add_option("--vad-speech", paths.vad_speech, "speech GMM file")->required();
  cmd->add_option("--vad-nonspeech", paths.vad_nonspeech, "non-speech GMM file")->required();
}

kws::PipelineModels load_models(const ModelPaths& paths) {
  kws::PipelineModels models;
  models.dnn = kws::load_params(paths.dnn);
  models.vad_speech = kws::load_gmm(paths.vad_speech);
  models.vad_nonspeech = kws::load_gmm(paths.vad_nonspeech);
  return models;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = text.find(',', pos);
    if (next == std::string::npos) next = text.size();
    const std::string token = text.substr(pos, next - pos);
    if (!token.empty()) grid.push_back(std::stod(token));
    pos = next + 1;
  }
  return grid;
}

std::vector<kws::SensitivityPair> parse_pairs(const std::string& text) {
  std::vector<kws::SensitivityPair> pairs;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = text.find(',', pos);
    if (next == std::string::npos) next = text.size();
    const std::string token = text.substr(pos, next - pos);
    if (!token.empty()) {
      const std::size_t colon = token.find(':');
      if (colon == std::string::npos)
        throw std::runtime_error("pair must look like sen1:sen2, got " + token);
      pairs.push_back({{std::stod(token.substr(0, colon))}, {std::stod(token.substr(colon + 1))}});
    }
    pos = next + 1;
  }
  return pairs;
}

nlohmann::json default_config_json() {
  const RunSettings rs;
  const kws::FrontendConfig fe;
  const kws::VadConfig vad;
  const kws::CorpusSpec corpus;
  const kws::TrainerOptions trainer;
  nlohmann::json j;
  j["run"] = {{"sen_1", rs.sen_1},
              {"sen_2", rs.sen_2},
              {"s_thd", rs.s_thd},
              {"d_thd", rs.d_thd},
              {"w_s", rs.w_s},
              {"w_max", rs.w_max},
              {"staleness_limit_s", rs.staleness_limit_s},
              {"refractory_frames", rs.refractory_frames}};
  j["frontend"] = {{"sample_rate", kws::kSampleRate},
                   {"frame_len_ms", fe.frame_len_ms},
                   {"hop_ms", fe.hop_ms},
                   {"n_mels", fe.n_mels},
                   {"pre_emphasis", fe.pre_emphasis},
                   {"context_past", fe.context_past},
                   {"context_future", fe.context_future},
                   {"feature_offset", fe.feature_offset},
                   {"feature_scale", fe.feature_scale}};
  j["vad"] = {{"posterior_threshold", vad.posterior_threshold},
              {"window_frames", vad.window_frames},
              {"majority_fraction", vad.majority_fraction},
              {"hangover_frames", vad.hangover_frames},
              {"prior_speech", vad.prior_speech}};
  j["corpus"] = {{"n_positive", corpus.n_positive},
                 {"n_negative", corpus.n_negative},
                 {"snr_low_db", corpus.snr_low_db},
                 {"snr_high_db", corpus.snr_high_db},
                 {"maneuver_fraction", corpus.maneuver_fraction}};
  j["trainer"] = {{"hidden_layers", trainer.hidden_layers},
                  {"hidden_nodes", trainer.hidden_nodes},
                  {"epochs", trainer.epochs},
                  {"learning_rate", trainer.learning_rate},
                  {"batch_size", trainer.batch_size},
                  {"frame_stride", trainer.frame_stride},
                  {"gmm_components", trainer.gmm_components},
                  {"gmm_iters", trainer.gmm_iters}};
  return j;
}

int cmd_make_corpus(const fs::path& out_dir, kws::CorpusSpec spec) {
  const kws::TestCorpus corpus = kws::synthesize_corpus(spec);
  const fs::path manifest = kws::write_corpus(out_dir, corpus);
  log_line("wrote " + std::to_string(corpus.utterances.size()) + " utterances under " +
           out_dir.string());
  std::printf("%s\n", manifest.string().c_str());
  return 0;
}

int cmd_train(const fs::path& manifest, const fs::path& out_dir, const kws::TrainerOptions& opts) {
  const kws::TestCorpus corpus = kws::load_corpus(manifest);
  log_line("training on " + std::to_string(corpus.utterances.size()) + " utterances");
  kws::TrainReport report;
  const kws::FrontendConfig frontend;
  const kws::PipelineModels models = kws::train_pipeline_models(corpus, frontend, opts, &report);

  fs::create_directories(out_dir);
  kws::save_params(out_dir / "dnn.json", models.dnn);
  kws::save_gmm(out_dir / "vad_speech.json", models.vad_speech);
  kws::save_gmm(out_dir / "vad_nonspeech.json", models.vad_nonspeech);
  log_line("models written to " + out_dir.string());
  std::printf("final_loss,frame_accuracy\n%.9g,%.9g\n", report.final_loss, report.frame_accuracy);
  return 0;
}

int cmd_detect(const std::string& audio_path, const std::string& trace_path,
               const ModelPaths& model_paths, const RunSettings& rs, const std::string& out_path,
               double start_time_s, const std::string& dump_features_path) {
  const kws::AudioBuffer audio = kws::read_wav(audio_path);
  const kws::PipelineModels models = load_models(model_paths);
  kws::PipelineConfig config = pipeline_config_from(rs);

  std::vector<kws::GeoSample> trace;
  if (!trace_path.empty()) {
    trace = kws::read_trace_csv(trace_path);
    log_line("fused mode: " + std::to_string(trace.size()) + " telemetry samples");
  } else {
    log_line("single-source mode at sensitivity " + std::to_string(rs.sen_1));
    config.fusion.pair = {{rs.sen_1}, {rs.sen_1}};
  }

  if (!dump_features_path.empty()) {
    const kws::AudioBuffer emphasized = config.frontend.pre_emphasis != 0.0
                                            ? kws::pre_emphasize(audio, config.frontend.pre_emphasis)
                                            : audio;
    const kws::FrameSequence frames =
        kws::frame_signal(emphasized, config.frontend.frame_len_ms, config.frontend.hop_ms);
    std::vector<kws::FeatureVector> features;
    for (std::size_t j = 0; j < frames.size(); ++j) {
      kws::FeatureVector fv = kws::log_filterbank(frames.frame(j), frames.sample_rate,
                                                  config.frontend.n_mels);
      fv.frame_index = static_cast<int>(j);
      fv.timestamp_s = frames.timestamp_s(j);
      features.push_back(std::move(fv));
    }
    kws::write_features_csv(dump_features_path, features);
    log_line("features dumped to " + dump_features_path);
  }

  const auto events = kws::run_fused(audio, trace, models, config, start_time_s);
  if (out_path.empty() || out_path == "-") {
    for (const auto& e : events) std::printf("%s\n", kws::event_to_json(e).c_str());
  } else {
    kws::write_events_jsonl(out_path, events);
  }
  log_line(std::to_string(events.size()) + " detection(s)");
  return events.empty() ? 1 : 0;
}

int cmd_simulate_drive(const std::string& kind_name, const kws::TrajectoryParams& params,
                       std::uint64_t seed, const fs::path& out_trace, const fs::path& out_truth) {
  const kws::TrajectoryKind kind = kws::trajectory_kind_from_string(kind_name);
  const kws::Trajectory traj = kws::generate_trajectory(kind, params, seed);
  kws::write_trace_csv(out_trace, traj.samples);
  if (!out_truth.empty()) kws::write_truth_csv(out_truth, traj);
  log_line("trace with " + std::to_string(traj.samples.size()) + " samples, maneuver (" +
           std::to_string(traj.window_start_s) + ", " + std::to_string(traj.window_end_s) + "]");
  return 0;
}

int cmd_sweep(const std::string& mode, const fs::path& manifest, const std::string& trace_path,
              const ModelPaths& model_paths, const RunSettings& rs, const fs::path& out_dir,
              const std::string& sens_text, const std::string& pairs_text, int threads) {
  const kws::TestCorpus corpus = kws::load_corpus(manifest);
  const kws::PipelineModels models = load_models(model_paths);
  const kws::PipelineConfig config = pipeline_config_from(rs);
  fs::create_directories(out_dir);

  kws::SweepSummary summary;
  if (mode == "single") {
    const std::vector<double> grid =
        sens_text.empty() ? kws::default_single_grid() : parse_grid(sens_text);
    if (grid.empty()) throw std::runtime_error("sweep: empty sensitivity grid");
    summary = kws::sweep_single(grid, corpus, models, config, threads);
  } else if (mode == "double") {
    if (trace_path.empty()) throw std::runtime_error("sweep: double mode needs --trace");
    const auto trace = kws::read_trace_csv(trace_path);
    const std::vector<kws::SensitivityPair> pairs =
        pairs_text.empty() ? kws::default_pair_grid() : parse_pairs(pairs_text);
    if (pairs.empty()) throw std::runtime_error("sweep: empty pair grid");
    summary = kws::sweep_double(pairs, corpus, trace, models, config, threads);
  } else {
    throw std::runtime_error("sweep: mode must be single or double");
  }

  kws::write_sweep_csv(out_dir / "results.csv", summary);
  kws::write_summary_csv(out_dir / "summary.csv", summary);
  log_line("mean precision " + std::to_string(summary.mean_precision) + ", mean recall " +
           std::to_string(summary.mean_recall));
  std::printf("%s\n", (out_dir / "results.csv").string().c_str());
  return 0;
}

int cmd_recall_model(const kws::RecallModelParams& params, long trials, std::uint64_t seed) {
  if (!params.improvement_expected())
    log_line("warning: recall_sensitive <= recall_normal, the fused gain will not be positive");
  const double single = kws::recall_single(params);
  const double fused = kws::recall_fused(params);
  const double gain = kws::recall_gain(params);
  std::printf("single,fused,gain,mc_estimate\n");
  if (trials > 0) {
    const double mc = kws::monte_carlo_recall(params, trials, seed);
    std::printf("%.9g,%.9g,%.9g,%.9g\n", single, fused, gain, mc);
  } else {
    std::printf("%.9g,%.9g,%.9g,\n", single, fused, gain);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming keyword spotting with telemetry-adaptive sensitivity"};
  app.require_subcommand(1);

  // make-corpus
  auto* make_corpus = app.add_subcommand("make-corpus", "synthesize a labeled test corpus");
  std::string mc_out;
  kws::CorpusSpec spec;
  std::string negatives_mode = "confusable";
  make_corpus->add_option("--out-dir", mc_out, "output directory")->required();
  make_corpus->add_option("--n-positive", spec.n_positive, "positive count");
  make_corpus->add_option("--n-negative", spec.n_negative, "negative count");
  make_corpus->add_option("--snr-low", spec.snr_low_db, "lowest SNR, dB");
  make_corpus->add_option("--snr-high", spec.snr_high_db, "highest SNR, dB");
  make_corpus->add_option("--seed", spec.seed, "corpus seed");
  make_corpus->add_option("--negatives", negatives_mode, "confusable | filler-only");
  make_corpus->add_option("--maneuver-fraction", spec.maneuver_fraction,
                          "fraction of utterances timestamped inside the maneuver window");

  // train
  auto* train = app.add_subcommand("train", "fit the VAD GMMs and the KWS DNN from a corpus");
  std::string tr_manifest, tr_out;
  kws::TrainerOptions topts;
  train->add_option("--manifest", tr_manifest, "corpus manifest.json")->required();
  train->add_option("--out-dir", tr_out, "model output directory")->required();
  train->add_option("--hidden-layers", topts.hidden_layers, "hidden layer count");
  train->add_option("--hidden-nodes", topts.hidden_nodes, "nodes per hidden layer");
  train->add_option("--epochs", topts.epochs, "training epochs");
  train->add_option("--learning-rate", topts.learning_rate, "SGD learning rate");
  train->add_option("--batch-size", topts.batch_size, "mini-batch size");
  train->add_option("--frame-stride", topts.frame_stride, "keep every n-th frame");
  train->add_option("--gmm-components", topts.gmm_components, "VAD GMM components");
  train->add_option("--gmm-iters", topts.gmm_iters, "VAD EM iterations");
  train->add_option("--seed", topts.seed, "training seed");

  // detect
  auto* detect = app.add_subcommand("detect", "run detection over a WAV, optionally fused");
  std::string det_audio, det_trace, det_out = "-", det_config, det_dump;
  double det_start = 0.0;
  ModelPaths det_models;
  RunSettings det_rs;
  detect->add_option("--audio", det_audio, "input WAV (PCM16 mono 16 kHz)")->required();
  detect->add_option("--trace", det_trace, "GPS trace CSV; omit for single-source mode");
  add_model_options(detect, det_models);
  detect->add_option("--out", det_out, "events JSONL ('-' = stdout)");
  detect->add_option("--start-time", det_start, "audio start time on the trace clock, s");
  detect->add_option("--dump-features", det_dump, "write per-frame filterbank features CSV");
  add_run_options(detect, det_rs, det_config);

  // simulate-drive
  auto* sim = app.add_subcommand("simulate-drive", "synthesize a GPS trace with labels");
  std::string sim_kind, sim_trace, sim_truth;
  kws::TrajectoryParams sim_params;
  std::uint64_t sim_seed = 0;
  sim->add_option("--kind", sim_kind, "straight | turn | u_turn | roundabout")->required();
  sim->add_option("--out-trace", sim_trace, "trace CSV path")->required();
  sim->add_option("--out-truth", sim_truth, "ground-truth CSV path");
  sim->add_option("--cruise-speed", sim_params.cruise_speed_mps, "cruise speed, m/s");
  sim->add_option("--min-speed", sim_params.min_speed_mps, "minimum speed inside the maneuver");
  sim->add_option("--turn-angle", sim_params.turn_angle_deg, "total heading change, degrees");
  sim->add_option("--duration", sim_params.maneuver_duration_s, "maneuver duration, s");
  sim->add_option("--approach", sim_params.approach_s, "straight approach, s");
  sim->add_option("--exit", sim_params.exit_s, "straight exit, s");
  sim->add_option("--heading", sim_params.initial_heading_deg, "initial heading, degrees");
  sim->add_option("--sample-period", sim_params.sample_period_s, "GPS sample period, s");
  sim->add_option("--noise-sigma", sim_params.noise_sigma_m, "position noise sigma, m");
  sim->add_option("--origin-lat", sim_params.origin_lat_deg, "origin latitude");
  sim->add_option("--origin-lng", sim_params.origin_lng_deg, "origin longitude");
  sim->add_option("--seed", sim_seed, "noise seed");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "precision/recall over a sensitivity grid");
  std::string sw_mode, sw_manifest, sw_trace, sw_out = "sweep_out", sw_sens, sw_pairs, sw_config;
  int sw_threads = 0;
  ModelPaths sw_models;
  RunSettings sw_rs;
  sweep->add_option("--mode", sw_mode, "single | double")->required();
  sweep->add_option("--manifest", sw_manifest, "corpus manifest.json")->required();
  sweep->add_option("--trace", sw_trace, "GPS trace CSV (double mode)");
  add_model_options(sweep, sw_models);
  sweep->add_option("--out-dir", sw_out, "directory for results.csv and summary.csv");
  sweep->add_option("--sens", sw_sens, "comma-separated sensitivities (single mode)");
  sweep->add_option("--pairs", sw_pairs, "comma-separated sen1:sen2 pairs (double mode)");
  sweep->add_option("--threads", sw_threads, "worker threads (0 = auto)");
  add_run_options(sweep, sw_rs, sw_config);

  // recall-model
  auto* recall = app.add_subcommand("recall-model", "closed-form recall model and Monte Carlo");
  kws::RecallModelParams rparams;
  long r_trials = 1000000;
  std::uint64_t r_seed = 0;
  recall->add_option("--recall-normal", rparams.recall_normal, "recall in the normal state (p1)");
  recall->add_option("--recall-sensitive", rparams.recall_sensitive,
                     "recall in the sensitive state (p2)");
  recall->add_option("--platform-accuracy", rparams.platform_accuracy,
                     "probability the platform reports the state correctly (p3)");
  recall->add_option("--sensitive-fraction", rparams.sensitive_fraction,
                     "fraction of time in the sensitive state (k)");
  recall->add_option("--trials", r_trials, "Monte Carlo trials (0 = skip)");
  recall->add_option("--seed", r_seed, "Monte Carlo seed");

  // config
  auto* config_cmd = app.add_subcommand("config", "configuration helpers");
  auto* config_dump = config_cmd->add_subcommand("dump", "print all defaults as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*make_corpus) {
      if (negatives_mode == "filler-only")
        spec.confusable_negatives = false;
      else if (negatives_mode != "confusable")
        throw std::runtime_error("--negatives must be confusable or filler-only");
      return cmd_make_corpus(mc_out, spec);
    }
    if (*train) return cmd_train(tr_manifest, tr_out, topts);
    if (*detect) {
      apply_config_file(detect, det_rs, det_config);
      return cmd_detect(det_audio, det_trace, det_models, det_rs, det_out, det_start, det_dump);
    }
    if (*sim) return cmd_simulate_drive(sim_kind, sim_params, sim_seed, sim_trace, sim_truth);
    if (*sweep) {
      apply_config_file(sweep, sw_rs, sw_config);
      return cmd_sweep(sw_mode, sw_manifest, sw_trace, sw_models, sw_rs, sw_out, sw_sens, sw_pairs,
                       sw_threads);
    }
    if (*recall) return cmd_recall_model(rparams, r_trials, r_seed);
    if (*config_cmd) {
      if (*config_dump || config_cmd->get_subcommands().empty()) {
        std::printf("%s\n", default_config_json().dump(2).c_str());
        return 0;
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
