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

#ifndef PRONSCORE_METRICS_HPP
#define PRONSCORE_METRICS_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pronscore/io.hpp"
#include "pronscore/types.hpp"

namespace pronscore {

// (score, label) with label 1 = correctly pronounced. The positive class is
// "correct"; accepting an instance means deciding it was pronounced
// correctly.
using ScoredLabel = std::pair<double, int>;

struct CostSpec {
  double fpr_weight = 0.5;
  double fnr_weight = 1.0;
};

enum class AggregateMethod { kMeanProb, kMeanLogProb };

// Per labeled segment: mean over its frames of the target phone's frame
// score (probability, or floored log probability). Higher = better for both
// methods.
std::vector<InstanceScore> aggregate_scores(const Matrix& frame_probs,
                                            const LoadedUtterance& utt,
                                            AggregateMethod method);

// Decision rule: score >= threshold -> accepted as correct.
// FPR = fraction of incorrect instances accepted; FNR = fraction of correct
// instances rejected. Requires both classes present.
std::pair<double, double> fpr_fnr(const std::vector<ScoredLabel>& scored,
                                  double threshold);

// Probability that a random correct instance outscores a random incorrect
// one, ties counting one half (rank-based; equals the ROC area). Requires
// both classes present.
double auc(const std::vector<ScoredLabel>& scored);

struct ThresholdCost {
  double cost = 0.0;
  double threshold = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
};

ThresholdCost cost_at(const std::vector<ScoredLabel>& scored, double threshold,
                      const CostSpec& spec);

// Minimizes fpr_weight*FPR + fnr_weight*FNR over candidate thresholds:
// midpoints of adjacent unique scores plus one below the minimum and one
// above the maximum. Ties break toward lower FNR, then lower threshold.
ThresholdCost min_cost(const std::vector<ScoredLabel>& scored,
                       const CostSpec& spec);

// Cost of eval_scored at the threshold that minimizes cost on dev_scored.
ThresholdCost act_cost(const std::vector<ScoredLabel>& eval_scored,
                       const std::vector<ScoredLabel>& dev_scored,
                       const CostSpec& spec);

std::map<int, std::vector<ScoredLabel>> group_by_phone(
    const std::vector<InstanceScore>& scores);
std::map<std::string, std::vector<ScoredLabel>> group_rows_by_phone(
    const std::vector<ScoreRow>& rows);

struct PhoneReport {
  std::string phone;
  long n_correct = 0;
  long n_incorrect = 0;
  double one_minus_auc = 0.0;
  double min_cost = 0.0;
  double min_cost_threshold = 0.0;
  double act_cost = 0.0;
  double act_threshold = 0.0;
  double fpr_at_act = 0.0;
  double fnr_at_act = 0.0;
};

struct EvalReport {
  std::vector<PhoneReport> phones;  // sorted by phone symbol
  // Unweighted averages across reported phones; counts are totals.
  PhoneReport average;
};

// Per-phone metrics on eval scores with thresholds calibrated on dev scores.
// A phone is reported when its eval minority count reaches min_minority and
// the dev scores contain both classes (needed for calibration).
EvalReport evaluate(const std::vector<ScoreRow>& eval_rows,
                    const std::vector<ScoreRow>& dev_rows,
                    const CostSpec& spec, long min_minority);

void write_report_csv(const std::string& path, const EvalReport& report);

// Averages of 1-AUC and MinCost over eligible phones of one pooled score
// set, used for per-epoch metric curves.
struct PoolSummary {
  double avg_one_minus_auc = 0.0;
  double avg_min_cost = 0.0;
  long n_phones = 0;
};

PoolSummary summarize_pool(const std::vector<InstanceScore>& scores,
                           const CostSpec& spec, long min_minority);

}  // namespace pronscore

#endif  // PRONSCORE_METRICS_HPP
