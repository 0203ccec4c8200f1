// Copyright 2026 PronScore contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pronscore/checkpoint.hpp"
#include "pronscore/corpus.hpp"
#include "pronscore/crossval.hpp"
#include "pronscore/errors.hpp"
#include "pronscore/gop.hpp"
#include "pronscore/head.hpp"
#include "pronscore/io.hpp"
#include "pronscore/metrics.hpp"
#include "pronscore/rng.hpp"
#include "pronscore/synth.hpp"
#include "pronscore/trainer.hpp"
#include "pronscore/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pronscore;

namespace {

// ---------------------------------------------------------------------------
// Config-file helpers. Every config object is checked for unknown keys so
// typos fail loudly instead of silently using defaults.
// ---------------------------------------------------------------------------

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open config file: " + path);
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) {
    throw ValidationError(path + ": config must be a JSON object");
  }
  return doc;
}

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ValidationError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback,
         const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": key '" + key + "' has the wrong type");
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw ValidationError("cannot open file for writing: " + path);
  }
  out << content;
  out.flush();
  if (!out.good()) {
    throw ValidationError("error while writing file: " + path);
  }
}

// Resolved-config record for reproducibility; every command writes one.
void write_run_json(const std::string& out_dir, const std::string& command,
                    const json& resolved) {
  json run;
  run["command"] = command;
  run["resolved"] = resolved;
  write_text_file((fs::path(out_dir) / "run.json").string(),
                  run.dump(2) + "\n");
}

std::string prepare_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) {
    throw ValidationError("--out-dir is required");
  }
  fs::create_directories(out_dir);
  return out_dir;
}

// ---------------------------------------------------------------------------
// Shared config parsing for train/crossval.
// ---------------------------------------------------------------------------

struct ModelSettings {
  HeadConfig head;
  TrainConfig train;
  LossSpec loss;          // excluded_phones filled in later from eligibility
  long min_minority = 50;
  CostSpec cost;
  int n_folds = 6;
  std::string init_hidden_path;
};

ModelSettings parse_model_settings(const json& cfg, const std::string& where,
                                   bool allow_crossval_keys,
                                   bool allow_train_keys) {
  std::set<std::string> top_keys = {"head", "train", "loss"};
  if (allow_crossval_keys) {
    top_keys.insert("cost");
    top_keys.insert("crossval");
  }
  if (allow_train_keys) {
    top_keys.insert("init_hidden");
  }
  check_keys(cfg, top_keys, where);

  ModelSettings s;
  if (cfg.contains("head")) {
    const json& head = cfg.at("head");
    check_keys(head,
               {"input_dim", "use_hidden", "hidden_dim", "use_batchnorm",
                "dropout_rate"},
               where + ": head");
    s.head.input_dim = get_or<int>(head, "input_dim", 0, where);
    s.head.use_hidden = get_or<bool>(head, "use_hidden", false, where);
    s.head.hidden_dim = get_or<int>(head, "hidden_dim", 0, where);
    s.head.use_batchnorm = get_or<bool>(head, "use_batchnorm", false, where);
    s.head.dropout_rate = get_or<double>(head, "dropout_rate", 0.4, where);
  }
  if (cfg.contains("train")) {
    const json& train = cfg.at("train");
    check_keys(train,
               {"batch_size", "epochs", "lr_initial", "lr_decay_factor",
                "lr_decay_every", "adam_beta1", "adam_beta2", "adam_epsilon",
                "stage", "stage1_epochs", "checkpoint_every", "seed"},
               where + ": train");
    s.train.batch_size = get_or<int>(train, "batch_size", 32, where);
    s.train.epochs = get_or<int>(train, "epochs", 600, where);
    s.train.lr_initial = get_or<double>(train, "lr_initial", 0.01, where);
    s.train.lr_decay_factor =
        get_or<double>(train, "lr_decay_factor", 0.9, where);
    s.train.lr_decay_every = get_or<int>(train, "lr_decay_every", 10, where);
    s.train.adam_beta1 = get_or<double>(train, "adam_beta1", 0.9, where);
    s.train.adam_beta2 = get_or<double>(train, "adam_beta2", 0.999, where);
    s.train.adam_epsilon = get_or<double>(train, "adam_epsilon", 1e-8, where);
    const std::string stage =
        get_or<std::string>(train, "stage", "layO", where);
    if (stage == "layO") {
      s.train.stage = TrainStage::kOutputOnly;
    } else if (stage == "layO+1") {
      s.train.stage = TrainStage::kOutputPlusHidden;
    } else {
      throw ValidationError(where + ": train.stage must be 'layO' or "
                            "'layO+1', got '" + stage + "'");
    }
    s.train.stage1_epochs = get_or<int>(train, "stage1_epochs", 100, where);
    s.train.checkpoint_every =
        get_or<int>(train, "checkpoint_every", 50, where);
    s.train.seed = get_or<std::uint64_t>(train, "seed", 0, where);
  }
  if (cfg.contains("loss")) {
    const json& loss = cfg.at("loss");
    check_keys(loss, {"weighting", "min_minority", "prob_clamp"},
               where + ": loss");
    const std::string weighting =
        get_or<std::string>(loss, "weighting", "flat", where);
    if (weighting == "flat") {
      s.loss.weighting = LossSpec::Weighting::kFlat;
    } else if (weighting == "balanced") {
      s.loss.weighting = LossSpec::Weighting::kBalanced;
    } else {
      throw ValidationError(where + ": loss.weighting must be 'flat' or "
                            "'balanced', got '" + weighting + "'");
    }
    s.min_minority = get_or<long>(loss, "min_minority", 50, where);
    s.loss.prob_clamp = get_or<double>(loss, "prob_clamp", 1e-7, where);
  }
  if (allow_crossval_keys && cfg.contains("cost")) {
    const json& cost = cfg.at("cost");
    check_keys(cost, {"fpr_weight", "fnr_weight"}, where + ": cost");
    s.cost.fpr_weight = get_or<double>(cost, "fpr_weight", 0.5, where);
    s.cost.fnr_weight = get_or<double>(cost, "fnr_weight", 1.0, where);
    if (s.cost.fpr_weight <= 0.0 || s.cost.fnr_weight <= 0.0) {
      throw ValidationError(where + ": cost weights must be positive");
    }
  }
  if (allow_crossval_keys && cfg.contains("crossval")) {
    const json& cv = cfg.at("crossval");
    check_keys(cv, {"n_folds"}, where + ": crossval");
    s.n_folds = get_or<int>(cv, "n_folds", 6, where);
  }
  if (allow_train_keys && cfg.contains("init_hidden")) {
    s.init_hidden_path = get_or<std::string>(cfg, "init_hidden", "", where);
  }
  if (s.min_minority < 0) {
    throw ValidationError(where + ": loss.min_minority must be >= 0");
  }
  return s;
}

json model_settings_to_json(const ModelSettings& s,
                            const std::set<int>& excluded,
                            const PhoneSet& phones) {
  json excluded_symbols = json::array();
  for (int p : excluded) excluded_symbols.push_back(phones.symbol(p));
  json out;
  out["head"] = {{"input_dim", s.head.input_dim},
                 {"use_hidden", s.head.use_hidden},
                 {"hidden_dim", s.head.hidden_dim},
                 {"use_batchnorm", s.head.use_batchnorm},
                 {"dropout_rate", s.head.dropout_rate},
                 {"n_phones", s.head.n_phones}};
  out["train"] = {
      {"batch_size", s.train.batch_size},
      {"epochs", s.train.epochs},
      {"lr_initial", s.train.lr_initial},
      {"lr_decay_factor", s.train.lr_decay_factor},
      {"lr_decay_every", s.train.lr_decay_every},
      {"adam_beta1", s.train.adam_beta1},
      {"adam_beta2", s.train.adam_beta2},
      {"adam_epsilon", s.train.adam_epsilon},
      {"stage",
       s.train.stage == TrainStage::kOutputOnly ? "layO" : "layO+1"},
      {"stage1_epochs", s.train.stage1_epochs},
      {"checkpoint_every", s.train.checkpoint_every},
      {"seed", s.train.seed}};
  out["loss"] = {{"weighting", s.loss.weighting == LossSpec::Weighting::kFlat
                                   ? "flat"
                                   : "balanced"},
                 {"min_minority", s.min_minority},
                 {"prob_clamp", s.loss.prob_clamp},
                 {"excluded_phones", excluded_symbols}};
  return out;
}

// The default speaker scope: the manifest's dev list when one is declared
// (matching the usual protocol), otherwise every speaker.
std::string resolve_speakers(const std::string& flag,
                             const LoadedCorpus& corpus,
                             const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (fallback == "dev" && corpus.dev_speakers.empty()) return "all";
  return fallback;
}

std::string stage_name(TrainStage stage) {
  return stage == TrainStage::kOutputOnly ? "layO" : "layO+1";
}

// Eval-mode scoring of the selected utterances with a fixed head.
std::vector<InstanceScore> score_with_head(
    const LoadedCorpus& corpus, const std::vector<std::size_t>& utts,
    const HeadConfig& config, const HeadParams& params) {
  std::vector<InstanceScore> scores;
  for (std::size_t idx : utts) {
    const auto& utt = corpus.utterances[idx];
    const ForwardTrace trace =
        forward(config, params, utt.frames.values, RunMode::kEval, 0);
    const auto utt_scores =
        aggregate_scores(trace.probs, utt, AggregateMethod::kMeanProb);
    scores.insert(scores.end(), utt_scores.begin(), utt_scores.end());
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

int cmd_validate(const std::string& manifest_path) {
  const CorpusLoadResult result = load_corpus_checked(manifest_path);
  if (result.corpus) {
    const auto& corpus = *result.corpus;
    std::size_t n_segments = 0;
    for (const auto& utt : corpus.utterances) {
      n_segments += utt.alignment.segments.size();
    }
    std::cout << "corpus valid: " << corpus.utterances.size()
              << " utterances, " << corpus.phones.size() << " phones, "
              << n_segments << " labeled segments\n";
    return 0;
  }
  for (const auto& problem : result.problems) {
    std::cout << problem << "\n";
  }
  std::cout << result.problems.size() << " problem(s) found\n";
  return 1;
}

SynthSpec parse_synth_spec(const json& cfg, const std::string& where) {
  check_keys(cfg,
             {"n_speakers", "utterances_per_speaker", "segments_per_utterance",
              "n_phones", "min_segment_frames", "max_segment_frames", "dim",
              "senones_per_phone", "separation", "incorrect_prior",
              "target_logit_boost", "max_silence_frames", "n_dev_speakers",
              "kind", "seed"},
             where);
  SynthSpec spec;
  spec.n_speakers = get_or<int>(cfg, "n_speakers", spec.n_speakers, where);
  spec.utterances_per_speaker = get_or<int>(
      cfg, "utterances_per_speaker", spec.utterances_per_speaker, where);
  spec.segments_per_utterance = get_or<int>(
      cfg, "segments_per_utterance", spec.segments_per_utterance, where);
  spec.n_phones = get_or<int>(cfg, "n_phones", spec.n_phones, where);
  spec.min_segment_frames = get_or<int>(cfg, "min_segment_frames",
                                        spec.min_segment_frames, where);
  spec.max_segment_frames = get_or<int>(cfg, "max_segment_frames",
                                        spec.max_segment_frames, where);
  spec.dim = get_or<int>(cfg, "dim", spec.dim, where);
  spec.senones_per_phone =
      get_or<int>(cfg, "senones_per_phone", spec.senones_per_phone, where);
  spec.separation = get_or<double>(cfg, "separation", spec.separation, where);
  if (cfg.contains("incorrect_prior")) {
    const json& prior = cfg.at("incorrect_prior");
    spec.incorrect_prior.clear();
    if (prior.is_number()) {
      spec.incorrect_prior.push_back(prior.get<double>());
    } else if (prior.is_array()) {
      for (const auto& v : prior) {
        if (!v.is_number()) {
          throw ValidationError(where + ": incorrect_prior entries must be "
                                "numbers");
        }
        spec.incorrect_prior.push_back(v.get<double>());
      }
    } else {
      throw ValidationError(where + ": incorrect_prior must be a number or "
                            "an array");
    }
  }
  spec.target_logit_boost =
      get_or<double>(cfg, "target_logit_boost", spec.target_logit_boost,
                     where);
  spec.max_silence_frames = get_or<int>(cfg, "max_silence_frames",
                                        spec.max_silence_frames, where);
  spec.n_dev_speakers =
      get_or<int>(cfg, "n_dev_speakers", spec.n_dev_speakers, where);
  const std::string kind =
      get_or<std::string>(cfg, "kind", "activations", where);
  if (kind == "activations") {
    spec.kind = FrameKind::kActivations;
  } else if (kind == "posteriors") {
    spec.kind = FrameKind::kPosteriors;
  } else {
    throw ValidationError(where + ": kind must be 'activations' or "
                          "'posteriors', got '" + kind + "'");
  }
  spec.seed = get_or<std::uint64_t>(cfg, "seed", 0, where);
  return spec;
}

json synth_spec_to_json(const SynthSpec& spec) {
  json prior = json::array();
  for (double p : spec.incorrect_prior) prior.push_back(p);
  return {{"n_speakers", spec.n_speakers},
          {"utterances_per_speaker", spec.utterances_per_speaker},
          {"segments_per_utterance", spec.segments_per_utterance},
          {"n_phones", spec.n_phones},
          {"min_segment_frames", spec.min_segment_frames},
          {"max_segment_frames", spec.max_segment_frames},
          {"dim", spec.dim},
          {"senones_per_phone", spec.senones_per_phone},
          {"separation", spec.separation},
          {"incorrect_prior", prior},
          {"target_logit_boost", spec.target_logit_boost},
          {"max_silence_frames", spec.max_silence_frames},
          {"n_dev_speakers", spec.resolved_dev_speakers()},
          {"kind", spec.kind == FrameKind::kActivations ? "activations"
                                                        : "posteriors"},
          {"seed", spec.seed}};
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_flag) {
  SynthSpec spec = parse_synth_spec(
      config_path.empty() ? json::object() : load_config_file(config_path),
      config_path.empty() ? "synth config" : config_path);
  if (seed_flag) spec.seed = *seed_flag;
  prepare_out_dir(out_dir);
  generate_corpus(spec, out_dir);
  write_run_json(out_dir, "synth", synth_spec_to_json(spec));
  std::cout << "wrote corpus to " << out_dir << "\n";
  return 0;
}

int cmd_gop(const std::string& manifest_path, const std::string& out_dir,
            double floor, const std::string& speakers_flag) {
  const LoadedCorpus corpus = load_corpus(manifest_path);
  const std::string speakers = resolve_speakers(speakers_flag, corpus, "all");
  const auto utts = filter_utterances(corpus, speakers);
  const auto gop_scores = score_corpus_gop(corpus, utts, floor);
  const auto decision = gop_decision_scores(gop_scores);
  prepare_out_dir(out_dir);
  write_scores_csv((fs::path(out_dir) / "scores.csv").string(), decision,
                   corpus.phones);
  write_run_json(out_dir, "gop",
                 {{"manifest", manifest_path},
                  {"floor", floor},
                  {"speakers", speakers}});
  std::cout << "wrote " << decision.size() << " scores\n";
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& config_path,
              const std::string& out_dir,
              std::optional<std::uint64_t> seed_flag,
              const std::string& speakers_flag) {
  const LoadedCorpus corpus = load_corpus(manifest_path);
  ModelSettings settings = parse_model_settings(
      config_path.empty() ? json::object() : load_config_file(config_path),
      config_path.empty() ? "train config" : config_path,
      /*allow_crossval_keys=*/false, /*allow_train_keys=*/true);
  if (seed_flag) settings.train.seed = *seed_flag;
  if (corpus.kind != FrameKind::kActivations) {
    throw ValidationError("training requires an activation-kind corpus");
  }
  const std::size_t corpus_dim =
      corpus.utterances.empty() ? 0 : corpus.utterances[0].frames.dim();
  if (settings.head.input_dim == 0) {
    settings.head.input_dim = static_cast<int>(corpus_dim);
  } else if (settings.head.input_dim != static_cast<int>(corpus_dim)) {
    throw ValidationError("configured input_dim " +
                          std::to_string(settings.head.input_dim) +
                          " does not match the corpus dimension " +
                          std::to_string(corpus_dim));
  }
  settings.head.n_phones = static_cast<int>(corpus.phones.size());

  const std::string speakers = resolve_speakers(speakers_flag, corpus, "all");
  const auto utts = filter_utterances(corpus, speakers);
  if (utts.empty()) {
    throw ValidationError("no utterances selected for training");
  }

  // Phones without enough minority-class instances get zero loss weight.
  const auto eligible = eligible_phones(corpus, utts, settings.min_minority);
  const std::set<int> eligible_set(eligible.begin(), eligible.end());
  std::set<int> excluded;
  for (std::size_t p = 0; p < corpus.phones.size(); ++p) {
    if (!eligible_set.count(static_cast<int>(p))) {
      excluded.insert(static_cast<int>(p));
    }
  }
  settings.loss.excluded_phones = excluded;

  prepare_out_dir(out_dir);
  const std::string stage = stage_name(settings.train.stage);
  TrainResult result;
  {
    const CheckpointSink sink = [&](int epoch, const HeadParams& params) {
      // Zero-padding keeps checkpoint files lexically ordered.
      char name[40];
      std::snprintf(name, sizeof(name), "checkpoint_epoch%06d.ckpt",
                    epoch + 1);
      Checkpoint checkpoint{settings.head, params, settings.train.seed,
                            stage};
      save_checkpoint((fs::path(out_dir) / name).string(), checkpoint);
    };
    std::optional<Matrix> hidden_init;
    if (!settings.init_hidden_path.empty()) {
      const FrameMatrix imported =
          read_frame_matrix(settings.init_hidden_path);
      hidden_init = imported.values;
    }
    result = train(corpus, utts, settings.head, settings.train, settings.loss,
                   sink, hidden_init ? &*hidden_init : nullptr);
  }

  std::string log_csv = "epoch,lr,train_loss\n";
  for (const auto& entry : result.log) {
    log_csv += std::to_string(entry.epoch);
    log_csv += ',';
    log_csv += fmt_double(entry.lr);
    log_csv += ',';
    log_csv += fmt_double(entry.train_loss);
    log_csv += '\n';
  }
  write_text_file((fs::path(out_dir) / "train_log.csv").string(), log_csv);

  Checkpoint final_checkpoint{settings.head, result.params,
                              settings.train.seed, stage};
  save_checkpoint((fs::path(out_dir) / "checkpoint_final.ckpt").string(),
                  final_checkpoint);

  json resolved = model_settings_to_json(settings, excluded, corpus.phones);
  resolved["manifest"] = manifest_path;
  resolved["speakers"] = speakers;
  resolved["seed"] = settings.train.seed;
  if (!settings.init_hidden_path.empty()) {
    resolved["init_hidden"] = settings.init_hidden_path;
  }
  write_run_json(out_dir, "train", resolved);
  std::cout << "trained " << result.log.size() << " epochs; final loss "
            << fmt_double(result.log.back().train_loss) << "\n";
  return 0;
}

int cmd_score(const std::string& manifest_path,
              const std::string& checkpoint_path, const std::string& out_dir,
              const std::string& speakers_flag) {
  const LoadedCorpus corpus = load_corpus(manifest_path);
  if (corpus.kind != FrameKind::kActivations) {
    throw ValidationError("scoring requires an activation-kind corpus");
  }
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  const std::size_t corpus_dim =
      corpus.utterances.empty() ? 0 : corpus.utterances[0].frames.dim();
  if (checkpoint.config.input_dim != static_cast<int>(corpus_dim)) {
    throw ValidationError("checkpoint input_dim " +
                          std::to_string(checkpoint.config.input_dim) +
                          " does not match the corpus dimension " +
                          std::to_string(corpus_dim));
  }
  if (checkpoint.config.n_phones != static_cast<int>(corpus.phones.size())) {
    throw ValidationError("checkpoint n_phones " +
                          std::to_string(checkpoint.config.n_phones) +
                          " does not match the corpus phone count " +
                          std::to_string(corpus.phones.size()));
  }
  const std::string speakers = resolve_speakers(speakers_flag, corpus, "all");
  const auto utts = filter_utterances(corpus, speakers);
  const auto scores =
      score_with_head(corpus, utts, checkpoint.config, checkpoint.params);
  prepare_out_dir(out_dir);
  write_scores_csv((fs::path(out_dir) / "scores.csv").string(), scores,
                   corpus.phones);
  write_run_json(out_dir, "score",
                 {{"manifest", manifest_path},
                  {"checkpoint", checkpoint_path},
                  {"speakers", speakers}});
  std::cout << "wrote " << scores.size() << " scores\n";
  return 0;
}

int cmd_crossval(const std::string& manifest_path,
                 const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_flag, int jobs,
                 const std::string& speakers_flag) {
  const LoadedCorpus corpus = load_corpus(manifest_path);
  ModelSettings settings = parse_model_settings(
      config_path.empty() ? json::object() : load_config_file(config_path),
      config_path.empty() ? "crossval config" : config_path,
      /*allow_crossval_keys=*/true, /*allow_train_keys=*/false);
  if (seed_flag) settings.train.seed = *seed_flag;
  if (corpus.kind != FrameKind::kActivations) {
    throw ValidationError("cross-validation requires an activation-kind "
                          "corpus");
  }
  const std::size_t corpus_dim =
      corpus.utterances.empty() ? 0 : corpus.utterances[0].frames.dim();
  if (settings.head.input_dim == 0) {
    settings.head.input_dim = static_cast<int>(corpus_dim);
  } else if (settings.head.input_dim != static_cast<int>(corpus_dim)) {
    throw ValidationError("configured input_dim " +
                          std::to_string(settings.head.input_dim) +
                          " does not match the corpus dimension " +
                          std::to_string(corpus_dim));
  }
  settings.head.n_phones = static_cast<int>(corpus.phones.size());

  const std::string speakers = resolve_speakers(speakers_flag, corpus, "dev");
  const auto utts = filter_utterances(corpus, speakers);
  if (utts.empty()) {
    throw ValidationError("no utterances selected for cross-validation");
  }
  std::set<std::string> speaker_set;
  for (std::size_t idx : utts) {
    speaker_set.insert(corpus.utterances[idx].speaker_id);
  }
  const SpeakerSplit split = make_speaker_folds(
      std::vector<std::string>(speaker_set.begin(), speaker_set.end()),
      settings.n_folds, settings.train.seed);

  CrossvalConfig cv_config;
  cv_config.jobs = jobs;
  cv_config.min_minority = settings.min_minority;
  cv_config.cost = settings.cost;
  const CrossvalResult result =
      crossval(corpus, utts, split, settings.head, settings.train,
               settings.loss, cv_config);

  prepare_out_dir(out_dir);
  write_scores_csv((fs::path(out_dir) / "pooled_scores.csv").string(),
                   result.pooled_scores, corpus.phones);
  std::string metrics_csv = "epoch,avg_one_minus_auc,avg_min_cost\n";
  for (const auto& m : result.epoch_metrics) {
    metrics_csv += std::to_string(m.epoch);
    metrics_csv += ',';
    metrics_csv += fmt_double(m.avg_one_minus_auc);
    metrics_csv += ',';
    metrics_csv += fmt_double(m.avg_min_cost);
    metrics_csv += '\n';
  }
  write_text_file((fs::path(out_dir) / "epoch_metrics.csv").string(),
                  metrics_csv);

  json folds = json::object();
  for (const auto& [speaker, fold] : split.fold_of) {
    folds[speaker] = fold;
  }
  json resolved =
      model_settings_to_json(settings, result.excluded_phones, corpus.phones);
  resolved["manifest"] = manifest_path;
  resolved["speakers"] = speakers;
  resolved["seed"] = settings.train.seed;
  resolved["n_folds"] = settings.n_folds;
  resolved["jobs"] = jobs;
  resolved["cost"] = {{"fpr_weight", settings.cost.fpr_weight},
                      {"fnr_weight", settings.cost.fnr_weight}};
  resolved["folds"] = folds;
  resolved["best_epoch"] = result.best_epoch;
  write_run_json(out_dir, "crossval", resolved);
  std::cout << "pooled " << result.pooled_scores.size()
            << " scores; best epoch " << result.best_epoch << "\n";
  return 0;
}

int cmd_evaluate(const std::string& eval_path, const std::string& dev_path,
                 const std::string& out_dir, long min_minority,
                 double fpr_weight, double fnr_weight) {
  if (fpr_weight <= 0.0 || fnr_weight <= 0.0) {
    throw ValidationError("cost weights must be positive");
  }
  if (min_minority < 0) {
    throw ValidationError("--min-minority must be >= 0");
  }
  const auto eval_rows = read_scores_csv(eval_path);
  const auto dev_rows = read_scores_csv(dev_path);

  std::set<std::string> eval_phones;
  for (const auto& r : eval_rows) eval_phones.insert(r.phone);
  std::set<std::string> dev_phones;
  for (const auto& r : dev_rows) dev_phones.insert(r.phone);
  if (eval_phones != dev_phones) {
    throw ValidationError("the evaluation and development score files cover "
                          "different phone sets; refusing to calibrate "
                          "across mismatched systems");
  }

  CostSpec spec;
  spec.fpr_weight = fpr_weight;
  spec.fnr_weight = fnr_weight;
  const EvalReport report =
      evaluate(eval_rows, dev_rows, spec, min_minority);
  prepare_out_dir(out_dir);
  write_report_csv((fs::path(out_dir) / "report.csv").string(), report);
  write_run_json(out_dir, "evaluate",
                 {{"eval_scores", eval_path},
                  {"dev_scores", dev_path},
                  {"min_minority", min_minority},
                  {"fpr_weight", fpr_weight},
                  {"fnr_weight", fnr_weight}});
  std::cout << report.phones.size() << " phones reported; average min cost "
            << fmt_double(report.average.min_cost) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phone-level pronunciation scoring toolkit"};
  app.require_subcommand(1);

  std::string manifest_path;
  std::string config_path;
  std::string out_dir;
  std::string speakers;
  std::string checkpoint_path;
  std::string eval_scores_path;
  std::string dev_scores_path;
  std::optional<std::uint64_t> seed_flag;
  std::uint64_t seed_value = 0;
  int jobs = 1;
  double floor = kDefaultPosteriorFloor;
  long min_minority = 50;
  double fpr_weight = 0.5;
  double fnr_weight = 1.0;

  auto add_speakers_flag = [&speakers](CLI::App* cmd) {
    cmd->add_option("--speakers", speakers,
                    "Speaker scope: dev, eval, or all")
        ->check(CLI::IsMember({"dev", "eval", "all"}));
  };

  CLI::App* validate =
      app.add_subcommand("validate", "Check a corpus manifest and its files");
  validate->add_option("manifest", manifest_path, "Corpus manifest JSON")
      ->required();

  CLI::App* synth =
      app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--config", config_path, "Synthesis spec JSON");
  synth->add_option("--out-dir", out_dir, "Output directory")->required();
  synth->add_option("--seed", seed_value, "Override the spec seed");

  CLI::App* gop = app.add_subcommand(
      "gop", "Score a posterior corpus with the GOP baseline");
  gop->add_option("manifest", manifest_path, "Corpus manifest JSON")
      ->required();
  gop->add_option("--out-dir", out_dir, "Output directory")->required();
  gop->add_option("--floor", floor, "Posterior floor applied before log");
  add_speakers_flag(gop);

  CLI::App* train_cmd =
      app.add_subcommand("train", "Train the scoring head");
  train_cmd->add_option("manifest", manifest_path, "Corpus manifest JSON")
      ->required();
  train_cmd->add_option("--config", config_path, "Training config JSON");
  train_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
  train_cmd->add_option("--seed", seed_value, "Override the config seed");
  add_speakers_flag(train_cmd);

  CLI::App* score =
      app.add_subcommand("score", "Score a corpus with a trained head");
  score->add_option("manifest", manifest_path, "Corpus manifest JSON")
      ->required();
  score->add_option("--checkpoint", checkpoint_path, "Checkpoint file")
      ->required();
  score->add_option("--out-dir", out_dir, "Output directory")->required();
  add_speakers_flag(score);

  CLI::App* crossval_cmd = app.add_subcommand(
      "crossval", "Speaker-grouped cross-validation of the scoring head");
  crossval_cmd->add_option("manifest", manifest_path, "Corpus manifest JSON")
      ->required();
  crossval_cmd->add_option("--config", config_path, "Training config JSON");
  crossval_cmd->add_option("--out-dir", out_dir, "Output directory")
      ->required();
  crossval_cmd->add_option("--seed", seed_value, "Override the config seed");
  crossval_cmd->add_option("--jobs", jobs, "Folds trained in parallel")
      ->check(CLI::PositiveNumber);
  add_speakers_flag(crossval_cmd);

  CLI::App* evaluate_cmd = app.add_subcommand(
      "evaluate", "Per-phone metrics from eval and dev score files");
  evaluate_cmd
      ->add_option("--eval-scores", eval_scores_path, "Evaluation scores CSV")
      ->required();
  evaluate_cmd
      ->add_option("--dev-scores", dev_scores_path,
                   "Development scores CSV for threshold calibration")
      ->required();
  evaluate_cmd->add_option("--out-dir", out_dir, "Output directory")
      ->required();
  evaluate_cmd->add_option("--min-minority", min_minority,
                           "Minimum minority-class instances per phone");
  evaluate_cmd->add_option("--fpr-weight", fpr_weight,
                           "False positive rate weight in the cost");
  evaluate_cmd->add_option("--fnr-weight", fnr_weight,
                           "False negative rate weight in the cost");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (validate->parsed()) {
      return cmd_validate(manifest_path);
    }
    if (synth->parsed()) {
      if (synth->count("--seed") > 0) seed_flag = seed_value;
      return cmd_synth(config_path, out_dir, seed_flag);
    }
    if (gop->parsed()) {
      return cmd_gop(manifest_path, out_dir, floor, speakers);
    }
    if (train_cmd->parsed()) {
      if (train_cmd->count("--seed") > 0) seed_flag = seed_value;
      return cmd_train(manifest_path, config_path, out_dir, seed_flag,
                       speakers);
    }
    if (score->parsed()) {
      return cmd_score(manifest_path, checkpoint_path, out_dir, speakers);
    }
    if (crossval_cmd->parsed()) {
      if (crossval_cmd->count("--seed") > 0) seed_flag = seed_value;
      return cmd_crossval(manifest_path, config_path, out_dir, seed_flag,
                          jobs, speakers);
    }
    if (evaluate_cmd->parsed()) {
      return cmd_evaluate(eval_scores_path, dev_scores_path, out_dir,
                          min_minority, fpr_weight, fnr_weight);
    }
  } catch (const ValidationError& e) {
    std::string message = e.what();
    std::replace(message.begin(), message.end(), '\n', ';');
    std::cerr << "error: " << message << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::string message = e.what();
    std::replace(message.begin(), message.end(), '\n', ';');
    std::cerr << "error: " << message << "\n";
    return 2;
  }
  return 2;  // unreachable: a subcommand is required
}
