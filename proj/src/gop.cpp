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

#include "pronscore/gop.hpp"

#include <cmath>
#include <string>

#include "pronscore/errors.hpp"

namespace pronscore {

Matrix collapse_senones(const FrameMatrix& posteriors,
                        const SenonePhoneMap& map, const PhoneSet& phones) {
  if (posteriors.kind != FrameKind::kPosteriors) {
    throw ValidationError("collapse_senones requires posterior-kind frames");
  }
  if (posteriors.dim() != map.senone_count()) {
    throw ValidationError(
        "senone posterior dimension " + std::to_string(posteriors.dim()) +
        " does not match the senone map size " +
        std::to_string(map.senone_count()));
  }
  Matrix out(posteriors.n_frames(), phones.size());
  for (std::size_t t = 0; t < posteriors.n_frames(); ++t) {
    for (std::size_t s = 0; s < map.senone_count(); ++s) {
      out(t, static_cast<std::size_t>(map.phone_of[s])) +=
          posteriors.values(t, s);
    }
  }
  return out;
}

double gop_value(const Matrix& phone_posteriors, const AlignSegment& segment,
                 double floor) {
  if (floor <= 0.0) {
    throw ValidationError("posterior floor must be positive");
  }
  if (segment.duration <= 0) {
    throw ValidationError("segment duration must be positive");
  }
  if (segment.start_frame < 0 ||
      static_cast<std::size_t>(segment.start_frame + segment.duration) >
          phone_posteriors.rows()) {
    throw ValidationError("segment out of bounds: frames [" +
                          std::to_string(segment.start_frame) + ", " +
                          std::to_string(segment.start_frame +
                                         segment.duration) +
                          ") in a matrix of " +
                          std::to_string(phone_posteriors.rows()) +
                          " frames");
  }
  if (segment.phone < 0 ||
      static_cast<std::size_t>(segment.phone) >= phone_posteriors.cols()) {
    throw ValidationError("segment phone index out of range");
  }
  double sum_log = 0.0;
  for (int t = segment.start_frame; t < segment.start_frame + segment.duration;
       ++t) {
    const double p = phone_posteriors(static_cast<std::size_t>(t),
                                      static_cast<std::size_t>(segment.phone));
    sum_log += std::log(p > floor ? p : floor);
  }
  return -sum_log / static_cast<double>(segment.duration);
}

std::vector<GopScore> score_corpus_gop(const LoadedCorpus& corpus,
                                       const std::vector<std::size_t>& utts,
                                       double floor) {
  if (corpus.kind != FrameKind::kPosteriors) {
    throw ValidationError("GOP scoring requires a posterior-kind corpus");
  }
  std::vector<GopScore> scores;
  for (std::size_t idx : utts) {
    const auto& utt = corpus.utterances[idx];
    Matrix phone_post;
    try {
      if (corpus.senone_map) {
        phone_post =
            collapse_senones(utt.frames, *corpus.senone_map, corpus.phones);
      } else {
        if (utt.frames.dim() != corpus.phones.size()) {
          throw ValidationError(
              "posterior dimension " + std::to_string(utt.frames.dim()) +
              " does not match the phone count " +
              std::to_string(corpus.phones.size()) +
              " and no senone map is given");
        }
        phone_post = utt.frames.values;
      }
      for (std::size_t s = 0; s < utt.alignment.segments.size(); ++s) {
        GopScore score;
        score.utterance_id = utt.utterance_id;
        score.segment_index = static_cast<int>(s);
        score.phone = utt.alignment.segments[s].phone;
        score.value = gop_value(phone_post, utt.alignment.segments[s], floor);
        score.label = utt.labels[s];
        scores.push_back(std::move(score));
      }
    } catch (const ValidationError& e) {
      throw ValidationError("utterance '" + utt.utterance_id +
                            "': " + e.what());
    }
  }
  return scores;
}

std::vector<InstanceScore> gop_decision_scores(
    const std::vector<GopScore>& gop_scores) {
  std::vector<InstanceScore> out;
  out.reserve(gop_scores.size());
  for (const auto& g : gop_scores) {
    InstanceScore s;
    s.utterance_id = g.utterance_id;
    s.segment_index = g.segment_index;
    s.phone = g.phone;
    s.score = g.decision_score();
    s.label = g.label;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pronscore
