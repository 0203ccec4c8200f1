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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "pronscore/errors.hpp"
#include "pronscore/metrics.hpp"
#include "pronscore/rng.hpp"
#include "test_util.hpp"

using namespace pronscore;

namespace {

// O(n^2) pairwise concordance: the probability that a random correct
// instance outscores a random incorrect one, ties counting one half.
double concordance_auc(const std::vector<ScoredLabel>& scored) {
  double concordant = 0.0;
  long pairs = 0;
  for (const auto& [s1, l1] : scored) {
    if (l1 != 1) continue;
    for (const auto& [s0, l0] : scored) {
      if (l0 != 0) continue;
      ++pairs;
      if (s1 > s0) {
        concordant += 1.0;
      } else if (s1 == s0) {
        concordant += 0.5;
      }
    }
  }
  return concordant / static_cast<double>(pairs);
}

std::vector<ScoredLabel> random_set(Rng& rng, std::size_t max_size) {
  std::vector<ScoredLabel> scored;
  const std::size_t n = 2 + rng.below(max_size - 1);
  bool has0 = false;
  bool has1 = false;
  for (std::size_t i = 0; i < n; ++i) {
    // A coarse grid in half the draws forces plenty of exact ties.
    const double score = rng.uniform() < 0.5
                             ? std::floor(rng.uniform() * 8.0) / 8.0
                             : rng.uniform() * 2.0 - 1.0;
    const int label = rng.uniform() < 0.5 ? 0 : 1;
    scored.emplace_back(score, label);
    has0 = has0 || label == 0;
    has1 = has1 || label == 1;
  }
  if (!has0) scored.emplace_back(0.25, 0);
  if (!has1) scored.emplace_back(0.75, 1);
  return scored;
}

std::vector<ScoreRow> rows_of(const std::string& phone,
                              std::vector<std::pair<double, int>> scored) {
  std::vector<ScoreRow> rows;
  int i = 0;
  for (const auto& [score, label] : scored) {
    rows.push_back({"u" + std::to_string(i), i, phone, score, label});
    ++i;
  }
  return rows;
}

}  // namespace

TEST_CASE("aggregate scores average the target phone per segment") {
  LoadedUtterance utt;
  utt.utterance_id = "u1";
  utt.frames.kind = FrameKind::kActivations;
  utt.frames.values = Matrix(5, 2);
  utt.alignment.segments = {{0, 0, 2}, {1, 3, 2}};
  utt.labels = {1, 0};

  Matrix probs(5, 2);
  probs(0, 0) = 0.2;
  probs(1, 0) = 0.4;
  probs(3, 1) = 0.5;
  probs(4, 1) = 0.7;

  const auto mean = aggregate_scores(probs, utt, AggregateMethod::kMeanProb);
  REQUIRE(mean.size() == 2);
  CHECK(mean[0].score == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(mean[1].score == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(mean[0].utterance_id == "u1");
  CHECK(mean[0].segment_index == 0);
  CHECK(mean[0].phone == 0);
  CHECK(mean[0].label == 1);
  CHECK(mean[1].label == 0);

  const auto log_mean =
      aggregate_scores(probs, utt, AggregateMethod::kMeanLogProb);
  CHECK(log_mean[0].score ==
        doctest::Approx(0.5 * (std::log(0.2) + std::log(0.4)))
            .epsilon(1e-12));
  // Zero probabilities hit the floor instead of -infinity.
  Matrix zeros(5, 2);
  const auto floored =
      aggregate_scores(zeros, utt, AggregateMethod::kMeanLogProb);
  CHECK(floored[0].score == doctest::Approx(std::log(1e-10)).epsilon(1e-12));
}

TEST_CASE("fpr and fnr follow the accept-if-at-least rule") {
  const std::vector<ScoredLabel> scored = {{0.9, 1}, {0.4, 1}, {0.6, 0}};
  const auto [fpr, fnr] = fpr_fnr(scored, 0.5);
  CHECK(fpr == 1.0);  // the incorrect instance at 0.6 is accepted
  CHECK(fnr == 0.5);  // the correct instance at 0.4 is rejected
  // Boundary: a score exactly at the threshold is accepted.
  const auto [fpr2, fnr2] = fpr_fnr(scored, 0.6);
  CHECK(fpr2 == 1.0);
  CHECK(fnr2 == 0.5);
  const auto [fpr3, fnr3] = fpr_fnr(scored, 0.61);
  CHECK(fpr3 == 0.0);

  CHECK_THROWS_AS(fpr_fnr({{0.5, 1}}, 0.5), ValidationError);
  CHECK_THROWS_AS(fpr_fnr({{0.5, 0}}, 0.5), ValidationError);
}

TEST_CASE("auc matches hand-computed examples") {
  CHECK(auc({{0.8, 1}, {0.4, 1}, {0.6, 0}, {0.2, 0}}) ==
        doctest::Approx(0.75).epsilon(1e-15));
  CHECK(auc({{0.5, 1}, {0.5, 1}, {0.5, 0}}) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK(auc({{0.9, 1}, {0.1, 0}}) == 1.0);
  CHECK(auc({{0.1, 1}, {0.9, 0}}) == 0.0);
}

TEST_CASE("auc equals pairwise concordance on random tied sets") {
  Rng rng(404);
  for (int trial = 0; trial < 50; ++trial) {
    const auto scored = random_set(rng, 120);
    CHECK(std::abs(auc(scored) - concordance_auc(scored)) <= 1e-12);
  }
}

TEST_CASE("cost combines the error rates with their weights") {
  // FPR 16/25 = 0.64, FNR 3/25 = 0.12 at threshold 0.5.
  std::vector<ScoredLabel> scored;
  for (int i = 0; i < 16; ++i) scored.emplace_back(0.8, 0);
  for (int i = 0; i < 9; ++i) scored.emplace_back(0.2, 0);
  for (int i = 0; i < 22; ++i) scored.emplace_back(0.9, 1);
  for (int i = 0; i < 3; ++i) scored.emplace_back(0.1, 1);
  const ThresholdCost cost = cost_at(scored, 0.5, CostSpec{});
  CHECK(cost.fpr == doctest::Approx(0.64).epsilon(1e-15));
  CHECK(cost.fnr == doctest::Approx(0.12).epsilon(1e-15));
  CHECK(cost.cost == doctest::Approx(0.44).epsilon(1e-15));
  CHECK(cost.threshold == 0.5);

  CostSpec heavy;
  heavy.fpr_weight = 2.0;
  heavy.fnr_weight = 0.5;
  CHECK(cost_at(scored, 0.5, heavy).cost ==
        doctest::Approx(2.0 * 0.64 + 0.5 * 0.12).epsilon(1e-15));
}

TEST_CASE("extreme thresholds give the trivial operating points exactly") {
  Rng rng(505);
  const auto scored = random_set(rng, 60);
  double lo = scored[0].first;
  double hi = scored[0].first;
  for (const auto& [s, l] : scored) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  const ThresholdCost accept_all = cost_at(scored, lo - 1.0, CostSpec{});
  CHECK(accept_all.fpr == 1.0);
  CHECK(accept_all.fnr == 0.0);
  CHECK(accept_all.cost == 0.5);
  const ThresholdCost reject_all = cost_at(scored, hi + 1.0, CostSpec{});
  CHECK(reject_all.fpr == 0.0);
  CHECK(reject_all.fnr == 1.0);
  CHECK(reject_all.cost == 1.0);
}

TEST_CASE("an inverted scorer can do no better than accepting everything") {
  const std::vector<ScoredLabel> scored = {{0.3, 1}, {0.7, 0}};
  const ThresholdCost best = min_cost(scored, CostSpec{});
  CHECK(best.cost == 0.5);
  CHECK(best.threshold < 0.3);
  CHECK(best.fpr == 1.0);
  CHECK(best.fnr == 0.0);
}

TEST_CASE("minimum cost ties resolve to the lowest rejection rate") {
  // cost 0.5 both when accepting everything and when rejecting {1, 2}.
  const std::vector<ScoredLabel> scored = {{1.0, 1}, {3.0, 1}, {2.0, 0}};
  const ThresholdCost best = min_cost(scored, CostSpec{});
  CHECK(best.cost == 0.5);
  CHECK(best.fnr == 0.0);
  CHECK(best.threshold == 0.0);  // one below the minimum score
}

TEST_CASE("minimum cost is a lower bound over random thresholds") {
  Rng rng(606);
  for (int trial = 0; trial < 10; ++trial) {
    const auto scored = random_set(rng, 150);
    const ThresholdCost best = min_cost(scored, CostSpec{});
    double lo = scored[0].first;
    double hi = scored[0].first;
    for (const auto& [s, l] : scored) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    for (int i = 0; i < 200; ++i) {
      const double theta = lo - 1.5 + rng.uniform() * (hi - lo + 3.0);
      CHECK(best.cost <= cost_at(scored, theta, CostSpec{}).cost);
    }
    // The reported threshold reproduces the reported cost.
    CHECK(cost_at(scored, best.threshold, CostSpec{}).cost == best.cost);
  }
}

TEST_CASE("calibrating on the same set reproduces the minimum cost") {
  Rng rng(707);
  for (int trial = 0; trial < 20; ++trial) {
    const auto scored = random_set(rng, 100);
    const ThresholdCost act = act_cost(scored, scored, CostSpec{});
    const ThresholdCost best = min_cost(scored, CostSpec{});
    CHECK(act.cost == best.cost);
    CHECK(act.threshold == best.threshold);
  }
}

TEST_CASE("calibration transfers a dev threshold to the eval set") {
  const std::vector<ScoredLabel> dev = {{0.6, 1}, {0.4, 0}};
  const std::vector<ScoredLabel> eval_set = {{0.6, 1}, {0.4, 1}, {0.5, 0}};
  const ThresholdCost act = act_cost(eval_set, dev, CostSpec{});
  // Dev's best threshold is 0.5; on eval it accepts the incorrect 0.5 and
  // rejects the correct 0.4.
  CHECK(act.threshold == 0.5);
  CHECK(act.fpr == 1.0);
  CHECK(act.fnr == 0.5);
  CHECK(act.cost == 1.0);
}

TEST_CASE("grouping splits scores by phone") {
  std::vector<InstanceScore> scores = {
      {"u1", 0, 2, 0.5, 1}, {"u1", 1, 0, 0.25, 0}, {"u2", 0, 2, 0.75, 0}};
  const auto groups = group_by_phone(scores);
  REQUIRE(groups.size() == 2);
  CHECK(groups.at(2).size() == 2);
  CHECK(groups.at(0).size() == 1);
  CHECK(groups.at(2)[0] == ScoredLabel{0.5, 1});
}

TEST_CASE("evaluation reports per-phone metrics and an unweighted average") {
  std::vector<ScoreRow> eval_rows;
  std::vector<ScoreRow> dev_rows;
  // Phone A: perfectly separated on eval; dev calibrates to 0.5.
  for (const auto& r :
       rows_of("A", {{0.9, 1}, {0.8, 1}, {0.1, 0}, {0.2, 0}})) {
    eval_rows.push_back(r);
  }
  for (const auto& r : rows_of("A", {{0.7, 1}, {0.3, 0}})) {
    dev_rows.push_back(r);
  }
  // Phone B: the dev threshold lands badly on eval.
  for (const auto& r : rows_of("B", {{0.6, 1}, {0.4, 1}, {0.5, 0}})) {
    eval_rows.push_back(r);
  }
  for (const auto& r : rows_of("B", {{0.6, 1}, {0.4, 0}})) {
    dev_rows.push_back(r);
  }

  const EvalReport report = evaluate(eval_rows, dev_rows, CostSpec{}, 1);
  REQUIRE(report.phones.size() == 2);
  const PhoneReport& a = report.phones[0];
  CHECK(a.phone == "A");
  CHECK(a.n_correct == 2);
  CHECK(a.n_incorrect == 2);
  CHECK(a.one_minus_auc == 0.0);
  CHECK(a.min_cost == 0.0);
  CHECK(a.act_cost == 0.0);
  const PhoneReport& b = report.phones[1];
  CHECK(b.phone == "B");
  CHECK(b.n_correct == 2);
  CHECK(b.n_incorrect == 1);
  CHECK(b.one_minus_auc == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b.min_cost == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b.act_cost == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b.fpr_at_act == 1.0);
  CHECK(b.fnr_at_act == 0.5);

  CHECK(report.average.n_correct == 4);
  CHECK(report.average.n_incorrect == 3);
  CHECK(report.average.one_minus_auc == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(report.average.min_cost == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(report.average.act_cost == doctest::Approx(0.5).epsilon(1e-15));

  // Raising the minority floor drops phone B (one incorrect instance).
  const EvalReport strict = evaluate(eval_rows, dev_rows, CostSpec{}, 2);
  REQUIRE(strict.phones.size() == 1);
  CHECK(strict.phones[0].phone == "A");

  // A phone whose dev scores are single-class cannot be calibrated.
  auto dev_single = dev_rows;
  for (auto& row : dev_single) {
    if (row.phone == "B") row.label = 1;
  }
  const EvalReport uncalibrated =
      evaluate(eval_rows, dev_single, CostSpec{}, 1);
  REQUIRE(uncalibrated.phones.size() == 1);
  CHECK(uncalibrated.phones[0].phone == "A");
}

TEST_CASE("the report file puts the average row last") {
  testutil::TempDir tmp;
  std::vector<ScoreRow> rows =
      rows_of("A", {{0.9, 1}, {0.8, 1}, {0.1, 0}, {0.2, 0}});
  const EvalReport report = evaluate(rows, rows, CostSpec{}, 1);
  const std::string path = tmp.file("report.csv");
  write_report_csv(path, report);
  const std::string text = testutil::read_file(path);
  CHECK(text.rfind("phone,n_correct,n_incorrect,one_minus_auc,min_cost,"
                   "min_cost_threshold,act_cost,act_threshold,fpr_at_act,"
                   "fnr_at_act\n",
                   0) == 0);
  CHECK(text.find("\nAVERAGE,") != std::string::npos);
  CHECK(text.back() == '\n');
}

TEST_CASE("pool summaries average the eligible phones") {
  std::vector<InstanceScore> scores;
  // Phone 0: perfect separation, 2 per class.
  scores.push_back({"u", 0, 0, 0.9, 1});
  scores.push_back({"u", 1, 0, 0.8, 1});
  scores.push_back({"u", 2, 0, 0.1, 0});
  scores.push_back({"u", 3, 0, 0.2, 0});
  // Phone 1: single-class -> never eligible.
  scores.push_back({"u", 4, 1, 0.5, 1});
  const PoolSummary summary = summarize_pool(scores, CostSpec{}, 1);
  CHECK(summary.n_phones == 1);
  CHECK(summary.avg_one_minus_auc == 0.0);
  CHECK(summary.avg_min_cost == 0.0);

  const PoolSummary empty = summarize_pool(scores, CostSpec{}, 3);
  CHECK(empty.n_phones == 0);
}
