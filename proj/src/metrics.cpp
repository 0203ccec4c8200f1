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

#include "pronscore/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pronscore/errors.hpp"
#include "pronscore/gop.hpp"

namespace pronscore {

namespace {

struct ClassCounts {
  long n_correct = 0;
  long n_incorrect = 0;
};

ClassCounts count_classes(const std::vector<ScoredLabel>& scored) {
  ClassCounts counts;
  for (const auto& [score, label] : scored) {
    (void)score;
    if (label == 1) {
      ++counts.n_correct;
    } else {
      ++counts.n_incorrect;
    }
  }
  return counts;
}

void require_both_classes(const ClassCounts& counts) {
  if (counts.n_correct == 0 || counts.n_incorrect == 0) {
    throw ValidationError("metric requires instances of both classes "
                          "(correct and incorrect)");
  }
}

}  // namespace

std::vector<InstanceScore> aggregate_scores(const Matrix& frame_probs,
                                            const LoadedUtterance& utt,
                                            AggregateMethod method) {
  if (frame_probs.rows() != utt.frames.n_frames()) {
    throw ValidationError("frame score matrix does not cover utterance '" +
                          utt.utterance_id + "'");
  }
  std::vector<InstanceScore> scores;
  scores.reserve(utt.alignment.segments.size());
  for (std::size_t s = 0; s < utt.alignment.segments.size(); ++s) {
    const auto& seg = utt.alignment.segments[s];
    if (static_cast<std::size_t>(seg.phone) >= frame_probs.cols()) {
      throw ValidationError("segment phone index out of range of the frame "
                            "score matrix");
    }
    double acc = 0.0;
    for (int t = seg.start_frame; t < seg.start_frame + seg.duration; ++t) {
      const double p = frame_probs(static_cast<std::size_t>(t),
                                   static_cast<std::size_t>(seg.phone));
      if (method == AggregateMethod::kMeanProb) {
        acc += p;
      } else {
        acc += std::log(p > kDefaultPosteriorFloor ? p
                                                   : kDefaultPosteriorFloor);
      }
    }
    InstanceScore inst;
    inst.utterance_id = utt.utterance_id;
    inst.segment_index = static_cast<int>(s);
    inst.phone = seg.phone;
    inst.score = acc / static_cast<double>(seg.duration);
    inst.label = utt.labels[s];
    scores.push_back(std::move(inst));
  }
  return scores;
}

std::pair<double, double> fpr_fnr(const std::vector<ScoredLabel>& scored,
                                  double threshold) {
  const ClassCounts counts = count_classes(scored);
  require_both_classes(counts);
  long accepted_incorrect = 0;
  long rejected_correct = 0;
  for (const auto& [score, label] : scored) {
    const bool accepted = score >= threshold;
    if (label == 0 && accepted) ++accepted_incorrect;
    if (label == 1 && !accepted) ++rejected_correct;
  }
  const double fpr = static_cast<double>(accepted_incorrect) /
                     static_cast<double>(counts.n_incorrect);
  const double fnr = static_cast<double>(rejected_correct) /
                     static_cast<double>(counts.n_correct);
  return {fpr, fnr};
}

double auc(const std::vector<ScoredLabel>& scored) {
  const ClassCounts counts = count_classes(scored);
  require_both_classes(counts);
  // Rank-based Mann-Whitney statistic with average ranks for ties.
  std::vector<ScoredLabel> sorted = scored;
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) {
              return a.first < b.first;
            });
  double rank_sum_correct = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
    // Ranks are 1-based; tied scores share the average rank of their block.
    const double avg_rank = (static_cast<double>(i + 1) +
                             static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (sorted[k].second == 1) rank_sum_correct += avg_rank;
    }
    i = j;
  }
  const double n1 = static_cast<double>(counts.n_correct);
  const double n0 = static_cast<double>(counts.n_incorrect);
  return (rank_sum_correct - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

ThresholdCost cost_at(const std::vector<ScoredLabel>& scored, double threshold,
                      const CostSpec& spec) {
  const auto [fpr, fnr] = fpr_fnr(scored, threshold);
  ThresholdCost out;
  out.threshold = threshold;
  out.fpr = fpr;
  out.fnr = fnr;
  out.cost = spec.fpr_weight * fpr + spec.fnr_weight * fnr;
  return out;
}

ThresholdCost min_cost(const std::vector<ScoredLabel>& scored,
                       const CostSpec& spec) {
  const ClassCounts counts = count_classes(scored);
  require_both_classes(counts);

  std::vector<ScoredLabel> sorted = scored;
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) {
              return a.first < b.first;
            });
  std::vector<double> candidates;
  candidates.push_back(sorted.front().first - 1.0);
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    if (sorted[i].first != sorted[i + 1].first) {
      candidates.push_back((sorted[i].first + sorted[i + 1].first) / 2.0);
    }
  }
  candidates.push_back(sorted.back().first + 1.0);

  // Ascending sweep; strict < keeps the first minimum, which has the lowest
  // FNR (FNR is non-decreasing in the threshold) and then the lowest
  // threshold.
  ThresholdCost best;
  bool have_best = false;
  std::size_t next = 0;  // first instance not yet below the threshold
  long rejected_correct = 0;
  long rejected_incorrect = 0;
  for (double theta : candidates) {
    while (next < sorted.size() && sorted[next].first < theta) {
      if (sorted[next].second == 1) {
        ++rejected_correct;
      } else {
        ++rejected_incorrect;
      }
      ++next;
    }
    ThresholdCost current;
    current.threshold = theta;
    current.fpr = static_cast<double>(counts.n_incorrect -
                                      rejected_incorrect) /
                  static_cast<double>(counts.n_incorrect);
    current.fnr = static_cast<double>(rejected_correct) /
                  static_cast<double>(counts.n_correct);
    current.cost = spec.fpr_weight * current.fpr +
                   spec.fnr_weight * current.fnr;
    if (!have_best || current.cost < best.cost) {
      best = current;
      have_best = true;
    }
  }
  return best;
}

ThresholdCost act_cost(const std::vector<ScoredLabel>& eval_scored,
                       const std::vector<ScoredLabel>& dev_scored,
                       const CostSpec& spec) {
  const ThresholdCost dev_best = min_cost(dev_scored, spec);
  return cost_at(eval_scored, dev_best.threshold, spec);
}

std::map<int, std::vector<ScoredLabel>> group_by_phone(
    const std::vector<InstanceScore>& scores) {
  std::map<int, std::vector<ScoredLabel>> grouped;
  for (const auto& s : scores) {
    grouped[s.phone].emplace_back(s.score, s.label);
  }
  return grouped;
}

std::map<std::string, std::vector<ScoredLabel>> group_rows_by_phone(
    const std::vector<ScoreRow>& rows) {
  std::map<std::string, std::vector<ScoredLabel>> grouped;
  for (const auto& r : rows) {
    grouped[r.phone].emplace_back(r.score, r.label);
  }
  return grouped;
}

EvalReport evaluate(const std::vector<ScoreRow>& eval_rows,
                    const std::vector<ScoreRow>& dev_rows,
                    const CostSpec& spec, long min_minority) {
  const auto eval_groups = group_rows_by_phone(eval_rows);
  const auto dev_groups = group_rows_by_phone(dev_rows);

  EvalReport report;
  for (const auto& [phone, scored] : eval_groups) {
    const ClassCounts counts = count_classes(scored);
    if (counts.n_correct == 0 || counts.n_incorrect == 0) continue;
    if (std::min(counts.n_correct, counts.n_incorrect) < min_minority) {
      continue;
    }
    auto dev_it = dev_groups.find(phone);
    if (dev_it == dev_groups.end()) continue;
    const ClassCounts dev_counts = count_classes(dev_it->second);
    if (dev_counts.n_correct == 0 || dev_counts.n_incorrect == 0) continue;

    PhoneReport row;
    row.phone = phone;
    row.n_correct = counts.n_correct;
    row.n_incorrect = counts.n_incorrect;
    row.one_minus_auc = 1.0 - auc(scored);
    const ThresholdCost mc = min_cost(scored, spec);
    row.min_cost = mc.cost;
    row.min_cost_threshold = mc.threshold;
    const ThresholdCost ac = act_cost(scored, dev_it->second, spec);
    row.act_cost = ac.cost;
    row.act_threshold = ac.threshold;
    row.fpr_at_act = ac.fpr;
    row.fnr_at_act = ac.fnr;
    report.phones.push_back(std::move(row));
  }

  auto& avg = report.average;
  avg.phone = "AVERAGE";
  if (!report.phones.empty()) {
    const double n = static_cast<double>(report.phones.size());
    for (const auto& row : report.phones) {
      avg.n_correct += row.n_correct;
      avg.n_incorrect += row.n_incorrect;
      avg.one_minus_auc += row.one_minus_auc;
      avg.min_cost += row.min_cost;
      avg.min_cost_threshold += row.min_cost_threshold;
      avg.act_cost += row.act_cost;
      avg.act_threshold += row.act_threshold;
      avg.fpr_at_act += row.fpr_at_act;
      avg.fnr_at_act += row.fnr_at_act;
    }
    avg.one_minus_auc /= n;
    avg.min_cost /= n;
    avg.min_cost_threshold /= n;
    avg.act_cost /= n;
    avg.act_threshold /= n;
    avg.fpr_at_act /= n;
    avg.fnr_at_act /= n;
  }
  return report;
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::string out =
      "phone,n_correct,n_incorrect,one_minus_auc,min_cost,"
      "min_cost_threshold,act_cost,act_threshold,fpr_at_act,fnr_at_act\n";
  auto append_row = [&out](const PhoneReport& row) {
    out += row.phone;
    out += ',';
    out += std::to_string(row.n_correct);
    out += ',';
    out += std::to_string(row.n_incorrect);
    out += ',';
    out += fmt_double(row.one_minus_auc);
    out += ',';
    out += fmt_double(row.min_cost);
    out += ',';
    out += fmt_double(row.min_cost_threshold);
    out += ',';
    out += fmt_double(row.act_cost);
    out += ',';
    out += fmt_double(row.act_threshold);
    out += ',';
    out += fmt_double(row.fpr_at_act);
    out += ',';
    out += fmt_double(row.fnr_at_act);
    out += '\n';
  };
  for (const auto& row : report.phones) {
    append_row(row);
  }
  append_row(report.average);
  std::ofstream file(path, std::ios::trunc);
  if (!file) {
    throw ValidationError("cannot open file for writing: " + path);
  }
  file << out;
  file.flush();
  if (!file.good()) {
    throw ValidationError("error while writing file: " + path);
  }
}

PoolSummary summarize_pool(const std::vector<InstanceScore>& scores,
                           const CostSpec& spec, long min_minority) {
  PoolSummary summary;
  for (const auto& [phone, scored] : group_by_phone(scores)) {
    (void)phone;
    const ClassCounts counts = count_classes(scored);
    if (counts.n_correct == 0 || counts.n_incorrect == 0) continue;
    if (std::min(counts.n_correct, counts.n_incorrect) < min_minority) {
      continue;
    }
    summary.avg_one_minus_auc += 1.0 - auc(scored);
    summary.avg_min_cost += min_cost(scored, spec).cost;
    ++summary.n_phones;
  }
  if (summary.n_phones > 0) {
    summary.avg_one_minus_auc /= static_cast<double>(summary.n_phones);
    summary.avg_min_cost /= static_cast<double>(summary.n_phones);
  }
  return summary;
}

}  // namespace pronscore
