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

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pronscore/corpus.hpp"
#include "pronscore/crossval.hpp"
#include "pronscore/errors.hpp"
#include "test_util.hpp"

using namespace pronscore;

namespace {

struct Fixture {
  LoadedCorpus corpus;
  std::vector<std::size_t> selection;
  SpeakerSplit split;
  HeadConfig head;
  TrainConfig train;
  LossSpec loss;
  CrossvalConfig cv;
};

Fixture make_fixture() {
  Fixture f;
  f.corpus = testutil::inline_corpus(6, 2, 4, 3, 4, 2.5, 55);
  f.selection = testutil::all_indices(f.corpus);

  std::set<std::string> speakers;
  for (const auto& utt : f.corpus.utterances) speakers.insert(utt.speaker_id);
  f.split = make_speaker_folds(
      std::vector<std::string>(speakers.begin(), speakers.end()), 3, 99);

  f.head.input_dim = 4;
  f.head.n_phones = 3;
  f.head.use_batchnorm = true;
  f.head.dropout_rate = 0.2;

  f.train.epochs = 4;
  f.train.checkpoint_every = 2;
  f.train.batch_size = 4;
  f.train.seed = 1234;

  f.cv.jobs = 1;
  f.cv.min_minority = 1;
  return f;
}

bool same_scores(const std::vector<InstanceScore>& a,
                 const std::vector<InstanceScore>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].utterance_id != b[i].utterance_id ||
        a[i].segment_index != b[i].segment_index || a[i].phone != b[i].phone ||
        a[i].score != b[i].score || a[i].label != b[i].label) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("cross-validation scores every utterance exactly once, in fold "
          "order") {
  Fixture f = make_fixture();
  const CrossvalResult result =
      crossval(f.corpus, f.selection, f.split, f.head, f.train, f.loss, f.cv);

  // Two checkpoints for four epochs saved every two epochs.
  REQUIRE(result.epoch_metrics.size() == 2);
  CHECK(result.epoch_metrics[0].epoch == 1);
  CHECK(result.epoch_metrics[1].epoch == 3);
  CHECK((result.best_epoch == 1 || result.best_epoch == 3));
  // best_epoch is the earliest epoch attaining the minimum average cost.
  double best = result.epoch_metrics[0].avg_min_cost;
  int best_epoch = result.epoch_metrics[0].epoch;
  for (const auto& m : result.epoch_metrics) {
    if (m.avg_min_cost < best) {
      best = m.avg_min_cost;
      best_epoch = m.epoch;
    }
  }
  CHECK(result.best_epoch == best_epoch);

  REQUIRE(result.pooled_scores.size() == 48);  // 12 utterances x 4 segments
  std::set<std::pair<std::string, int>> seen;
  for (const auto& s : result.pooled_scores) {
    CHECK(seen.insert({s.utterance_id, s.segment_index}).second);
    CHECK(s.score > 0.0);
    CHECK(s.score < 1.0);
  }
  for (const auto& utt : f.corpus.utterances) {
    for (int seg = 0; seg < 4; ++seg) {
      CHECK(seen.count({utt.utterance_id, seg}) == 1);
    }
  }

  // Pooled order: fold 0's utterances first, each utterance's segments in
  // order.
  std::vector<std::string> expected_order;
  for (int fold = 0; fold < f.split.n_folds; ++fold) {
    for (const auto& utt : f.corpus.utterances) {
      if (f.split.fold_of.at(utt.speaker_id) == fold) {
        for (int seg = 0; seg < 4; ++seg) {
          expected_order.push_back(utt.utterance_id);
        }
      }
    }
  }
  REQUIRE(expected_order.size() == result.pooled_scores.size());
  int cursor_seg = 0;
  for (std::size_t i = 0; i < result.pooled_scores.size(); ++i) {
    CHECK(result.pooled_scores[i].utterance_id == expected_order[i]);
    if (i > 0 && result.pooled_scores[i].utterance_id ==
                     result.pooled_scores[i - 1].utterance_id) {
      ++cursor_seg;
    } else {
      cursor_seg = 0;
    }
    CHECK(result.pooled_scores[i].segment_index == cursor_seg);
  }
}

TEST_CASE("the parallelism level does not change any output") {
  Fixture f = make_fixture();
  const CrossvalResult serial =
      crossval(f.corpus, f.selection, f.split, f.head, f.train, f.loss, f.cv);
  f.cv.jobs = 3;
  const CrossvalResult parallel =
      crossval(f.corpus, f.selection, f.split, f.head, f.train, f.loss, f.cv);

  CHECK(same_scores(serial.pooled_scores, parallel.pooled_scores));
  CHECK(serial.best_epoch == parallel.best_epoch);
  REQUIRE(serial.epoch_metrics.size() == parallel.epoch_metrics.size());
  for (std::size_t i = 0; i < serial.epoch_metrics.size(); ++i) {
    CHECK(serial.epoch_metrics[i].avg_min_cost ==
          parallel.epoch_metrics[i].avg_min_cost);
    CHECK(serial.epoch_metrics[i].avg_one_minus_auc ==
          parallel.epoch_metrics[i].avg_one_minus_auc);
  }
}

TEST_CASE("cross-validation is deterministic per seed and sensitive to it") {
  Fixture f = make_fixture();
  const CrossvalResult a =
      crossval(f.corpus, f.selection, f.split, f.head, f.train, f.loss, f.cv);
  const CrossvalResult b =
      crossval(f.corpus, f.selection, f.split, f.head, f.train, f.loss, f.cv);
  CHECK(same_scores(a.pooled_scores, b.pooled_scores));

  f.train.seed = 4321;
  const CrossvalResult c =
      crossval(f.corpus, f.selection, f.split, f.head, f.train, f.loss, f.cv);
  CHECK(!same_scores(a.pooled_scores, c.pooled_scores));
}

TEST_CASE("phone exclusion is computed once over the full selection") {
  Fixture f = make_fixture();
  f.cv.min_minority = 2;
  const CrossvalResult result =
      crossval(f.corpus, f.selection, f.split, f.head, f.train, f.loss, f.cv);
  const auto eligible = eligible_phones(f.corpus, f.selection, 2);
  for (int p = 0; p < 3; ++p) {
    const bool is_eligible =
        std::find(eligible.begin(), eligible.end(), p) != eligible.end();
    CHECK(result.excluded_phones.count(p) == (is_eligible ? 0u : 1u));
  }
}

TEST_CASE("impossible cross-validation setups are rejected") {
  Fixture f = make_fixture();

  SUBCASE("an eligibility floor no phone can meet") {
    f.cv.min_minority = 1000;
    CHECK_THROWS_AS(crossval(f.corpus, f.selection, f.split, f.head, f.train,
                             f.loss, f.cv),
                    ValidationError);
  }
  SUBCASE("a speaker without a fold assignment") {
    f.split.fold_of.erase("s3");
    CHECK_THROWS_AS(crossval(f.corpus, f.selection, f.split, f.head, f.train,
                             f.loss, f.cv),
                    ValidationError);
  }
  SUBCASE("fewer than two folds") {
    SpeakerSplit flat;
    flat.n_folds = 1;
    for (const auto& [speaker, fold] : f.split.fold_of) {
      (void)fold;
      flat.fold_of[speaker] = 0;
    }
    CHECK_THROWS_AS(crossval(f.corpus, f.selection, flat, f.head, f.train,
                             f.loss, f.cv),
                    ValidationError);
  }
  SUBCASE("a fold left empty by the selection") {
    SpeakerSplit manual;
    manual.n_folds = 3;
    manual.fold_of = {{"s0", 0}, {"s1", 0}, {"s2", 1},
                      {"s3", 1}, {"s4", 2}, {"s5", 2}};
    std::vector<std::size_t> partial;
    for (std::size_t i = 0; i < f.corpus.utterances.size(); ++i) {
      const auto& speaker = f.corpus.utterances[i].speaker_id;
      if (speaker != "s4" && speaker != "s5") partial.push_back(i);
    }
    CHECK_THROWS_AS(crossval(f.corpus, partial, manual, f.head, f.train,
                             f.loss, f.cv),
                    ValidationError);
  }
}
