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

#include "pronscore/crossval.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "pronscore/corpus.hpp"
#include "pronscore/errors.hpp"
#include "pronscore/rng.hpp"

namespace pronscore {

namespace {

// Scores every labeled segment of the given utterances with a fixed head;
// eval-mode forward, per-segment mean probability of the target phone.
std::vector<InstanceScore> score_utterances(
    const LoadedCorpus& corpus, const std::vector<std::size_t>& utt_indices,
    const HeadConfig& head_config, const HeadParams& params) {
  std::vector<InstanceScore> scores;
  for (std::size_t idx : utt_indices) {
    const auto& utt = corpus.utterances[idx];
    const ForwardTrace trace = forward(head_config, params,
                                       utt.frames.values, RunMode::kEval, 0);
    const auto utt_scores =
        aggregate_scores(trace.probs, utt, AggregateMethod::kMeanProb);
    scores.insert(scores.end(), utt_scores.begin(), utt_scores.end());
  }
  return scores;
}

struct FoldOutput {
  std::vector<int> checkpoint_epochs;
  // scores_per_epoch[i] belongs to checkpoint_epochs[i].
  std::vector<std::vector<InstanceScore>> scores_per_epoch;
};

}  // namespace

CrossvalResult crossval(const LoadedCorpus& corpus,
                        const std::vector<std::size_t>& utt_indices,
                        const SpeakerSplit& split,
                        const HeadConfig& head_config,
                        const TrainConfig& train_config,
                        const LossSpec& loss_spec,
                        const CrossvalConfig& cv_config) {
  if (split.n_folds < 2) {
    throw ValidationError("cross-validation needs at least 2 folds");
  }

  // Assign utterances to folds via their speakers.
  std::vector<std::vector<std::size_t>> fold_utts(
      static_cast<std::size_t>(split.n_folds));
  for (std::size_t idx : utt_indices) {
    const auto& speaker = corpus.utterances[idx].speaker_id;
    auto it = split.fold_of.find(speaker);
    if (it == split.fold_of.end()) {
      throw ValidationError("speaker '" + speaker +
                            "' has no fold assignment");
    }
    fold_utts[static_cast<std::size_t>(it->second)].push_back(idx);
  }
  for (std::size_t f = 0; f < fold_utts.size(); ++f) {
    if (fold_utts[f].empty()) {
      throw ValidationError("fold " + std::to_string(f) +
                            " contains no utterances");
    }
  }

  // One exclusion set for every fold, computed over the full selection, so
  // pooled scores are comparable across folds.
  CrossvalResult result;
  const auto eligible =
      eligible_phones(corpus, utt_indices, cv_config.min_minority);
  const std::set<int> eligible_set(eligible.begin(), eligible.end());
  for (std::size_t p = 0; p < corpus.phones.size(); ++p) {
    if (!eligible_set.count(static_cast<int>(p))) {
      result.excluded_phones.insert(static_cast<int>(p));
    }
  }
  LossSpec fold_loss = loss_spec;
  fold_loss.excluded_phones.insert(result.excluded_phones.begin(),
                                   result.excluded_phones.end());

  std::vector<FoldOutput> outputs(fold_utts.size());
  std::vector<std::exception_ptr> errors(fold_utts.size());

  auto run_fold = [&](std::size_t fold) {
    try {
      std::vector<std::size_t> train_utts;
      for (std::size_t other = 0; other < fold_utts.size(); ++other) {
        if (other == fold) continue;
        train_utts.insert(train_utts.end(), fold_utts[other].begin(),
                          fold_utts[other].end());
      }
      TrainConfig fold_config = train_config;
      // Every fold derives its own seed so folds do not share dropout or
      // shuffle streams; the derivation is fixed, keeping runs reproducible.
      fold_config.seed = Rng::derive(train_config.seed, "crossval-fold", fold);
      FoldOutput& out = outputs[fold];
      train(corpus, train_utts, head_config, fold_config, fold_loss,
            [&](int epoch, const HeadParams& params) {
              out.checkpoint_epochs.push_back(epoch);
              out.scores_per_epoch.push_back(score_utterances(
                  corpus, fold_utts[fold], head_config, params));
            });
    } catch (...) {
      errors[fold] = std::current_exception();
    }
  };

  const int jobs = std::max(1, cv_config.jobs);
  if (jobs == 1) {
    for (std::size_t fold = 0; fold < fold_utts.size(); ++fold) {
      run_fold(fold);
    }
  } else {
    std::size_t next_fold = 0;
    while (next_fold < fold_utts.size()) {
      std::vector<std::thread> workers;
      const std::size_t batch_end = std::min(
          next_fold + static_cast<std::size_t>(jobs), fold_utts.size());
      for (std::size_t fold = next_fold; fold < batch_end; ++fold) {
        workers.emplace_back(run_fold, fold);
      }
      for (auto& worker : workers) worker.join();
      next_fold = batch_end;
    }
  }
  for (std::size_t fold = 0; fold < errors.size(); ++fold) {
    if (errors[fold]) std::rethrow_exception(errors[fold]);
  }

  // All folds share the training schedule, hence the checkpoint epochs.
  const auto& epochs = outputs[0].checkpoint_epochs;
  for (const auto& out : outputs) {
    if (out.checkpoint_epochs != epochs) {
      throw std::runtime_error("folds produced different checkpoint sets");
    }
  }

  // Pool per epoch, pick the epoch with the lowest average MinCost.
  std::size_t best_index = 0;
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    std::vector<InstanceScore> pooled;
    for (const auto& out : outputs) {
      pooled.insert(pooled.end(), out.scores_per_epoch[e].begin(),
                    out.scores_per_epoch[e].end());
    }
    const PoolSummary summary =
        summarize_pool(pooled, cv_config.cost, cv_config.min_minority);
    result.epoch_metrics.push_back(
        {epochs[e], summary.avg_one_minus_auc, summary.avg_min_cost});
    if (summary.avg_min_cost <
        result.epoch_metrics[best_index].avg_min_cost) {
      best_index = e;
    }
  }
  result.best_epoch = epochs[best_index];
  for (const auto& out : outputs) {
    result.pooled_scores.insert(result.pooled_scores.end(),
                                out.scores_per_epoch[best_index].begin(),
                                out.scores_per_epoch[best_index].end());
  }
  return result;
}

}  // namespace pronscore
