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

#ifndef PRONSCORE_CROSSVAL_HPP
#define PRONSCORE_CROSSVAL_HPP

#include <vector>

#include "pronscore/metrics.hpp"
#include "pronscore/trainer.hpp"
#include "pronscore/types.hpp"

namespace pronscore {

struct CrossvalConfig {
  int jobs = 1;            // folds trained in parallel
  long min_minority = 50;  // eligibility for masking and metric averaging
  CostSpec cost;
};

struct CrossvalResult {
  // Held-out scores from the best checkpoint epoch, ordered by fold index
  // then utterance then segment. Every selected utterance appears exactly
  // once.
  std::vector<InstanceScore> pooled_scores;

  struct EpochMetric {
    int epoch = 0;  // 0-based checkpoint epoch
    double avg_one_minus_auc = 0.0;
    double avg_min_cost = 0.0;
  };
  std::vector<EpochMetric> epoch_metrics;
  int best_epoch = 0;  // checkpoint epoch minimizing avg_min_cost
  std::set<int> excluded_phones;  // ineligible on the full selection
};

// For each fold of the split: trains on the other folds' utterances and
// scores the held-out fold at every checkpoint epoch. Pooled metrics pick
// the best epoch (ties go to the earlier epoch). Phone exclusion for the
// loss is computed once over all selected utterances. Deterministic per
// seed; the `jobs` level does not change any output.
CrossvalResult crossval(const LoadedCorpus& corpus,
                        const std::vector<std::size_t>& utt_indices,
                        const SpeakerSplit& split,
                        const HeadConfig& head_config,
                        const TrainConfig& train_config,
                        const LossSpec& loss_spec,
                        const CrossvalConfig& cv_config);

}  // namespace pronscore

#endif  // PRONSCORE_CROSSVAL_HPP
