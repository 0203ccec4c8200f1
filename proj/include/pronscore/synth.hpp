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

#ifndef PRONSCORE_SYNTH_HPP
#define PRONSCORE_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "pronscore/types.hpp"

namespace pronscore {

// Synthetic corpus description. Frames of a labeled segment are drawn from a
// Gaussian (unit variance per coordinate) whose mean depends on the (phone,
// label) pair; the two class means of a phone sit `separation` standard
// deviations apart. Posterior corpora pass the same class signal through
// senone logits and a softmax; target_logit_boost adds a label-independent
// lift to the target phone's senones (a deliberately permissive scorer when
// separation is small).
struct SynthSpec {
  int n_speakers = 10;
  int utterances_per_speaker = 10;
  int segments_per_utterance = 10;
  int n_phones = 10;
  int min_segment_frames = 3;
  int max_segment_frames = 8;
  int dim = 20;               // feature dimension (activation corpora)
  int senones_per_phone = 3;  // posterior corpora; dim becomes phones*this
  double separation = 0.0;
  // Probability that a segment is labeled incorrectly pronounced; one value
  // broadcast to every phone, or one value per phone.
  std::vector<double> incorrect_prior = {0.3};
  double target_logit_boost = 0.0;
  int max_silence_frames = 2;  // random gap before each segment and at the end
  int n_dev_speakers = -1;     // -1: 60% of speakers, rounded down, min 1
  FrameKind kind = FrameKind::kActivations;
  std::uint64_t seed = 0;

  void validate() const;  // throws ValidationError
  int resolved_dev_speakers() const;
};

// Writes a complete corpus (frame files, alignments, labels, phone set,
// senone map for posterior corpora, manifest.json) into out_dir and returns
// the manifest. Deterministic per seed; the segment/label structure depends
// only on the structure-affecting fields, so two specs differing in kind or
// feature parameters produce instance-aligned corpora.
CorpusManifest generate_corpus(const SynthSpec& spec,
                               const std::string& out_dir);

}  // namespace pronscore

#endif  // PRONSCORE_SYNTH_HPP
