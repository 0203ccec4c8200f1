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

#ifndef PRONSCORE_GOP_HPP
#define PRONSCORE_GOP_HPP

#include <vector>

#include "pronscore/types.hpp"

namespace pronscore {

inline constexpr double kDefaultPosteriorFloor = 1e-10;

// Per-segment goodness-of-pronunciation value: the negative mean log
// posterior of the target phone over its aligned frames. Lower raw value =
// better pronunciation; decision_score() flips the orientation so all
// downstream thresholds treat larger as better.
struct GopScore {
  std::string utterance_id;
  int segment_index = 0;
  int phone = 0;
  double value = 0.0;
  int label = 0;

  double decision_score() const { return -value; }
};

// Sums senone posterior columns into phone posterior columns:
// out[t][p] = sum over senones s with map(s) = p of in[t][s].
// Per-frame mass is preserved; no re-normalization is applied.
Matrix collapse_senones(const FrameMatrix& posteriors,
                        const SenonePhoneMap& map, const PhoneSet& phones);

// value = -(1/D) * sum_{t=start}^{start+D-1} log(max(post(t, phone), floor)).
double gop_value(const Matrix& phone_posteriors, const AlignSegment& segment,
                 double floor = kDefaultPosteriorFloor);

// One score per labeled segment, in corpus order then segment order. The
// corpus must be posterior-kind; when it has no senone map, the posterior
// dimension must equal the phone count (identity collapse).
std::vector<GopScore> score_corpus_gop(const LoadedCorpus& corpus,
                                       const std::vector<std::size_t>& utts,
                                       double floor = kDefaultPosteriorFloor);

// Decision-score view (score = -GOP) for evaluation and CSV emission.
std::vector<InstanceScore> gop_decision_scores(
    const std::vector<GopScore>& gop_scores);

}  // namespace pronscore

#endif  // PRONSCORE_GOP_HPP
