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

#ifndef PRONSCORE_TYPES_HPP
#define PRONSCORE_TYPES_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pronscore/matrix.hpp"

namespace pronscore {

// Ordered phone inventory. The position of a symbol is its canonical integer
// id, and the inventory size equals the scoring head's output dimension.
class PhoneSet {
 public:
  PhoneSet() = default;
  // Validates that symbols are unique and non-empty.
  explicit PhoneSet(std::vector<std::string> symbols);

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(int index) const { return symbols_[index]; }
  const std::vector<std::string>& symbols() const { return symbols_; }
  std::optional<int> find(const std::string& symbol) const;

  bool operator==(const PhoneSet& o) const { return symbols_ == o.symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_;
};

// Total map from senone index to phone index; the senone count S equals the
// posterior matrix dimension wherever the map is applied.
struct SenonePhoneMap {
  std::vector<int> phone_of;  // phone_of[senone] = phone index

  std::size_t senone_count() const { return phone_of.size(); }
  bool operator==(const SenonePhoneMap& o) const {
    return phone_of == o.phone_of;
  }
};

enum class FrameKind { kActivations, kPosteriors };

// Per-utterance frames x dim matrix of either raw activations or senone/phone
// posteriors. Posterior rows are non-negative and sum to 1 within 1e-4.
struct FrameMatrix {
  FrameKind kind = FrameKind::kActivations;
  Matrix values;

  std::size_t n_frames() const { return values.rows(); }
  std::size_t dim() const { return values.cols(); }
};

// One aligned target-phone occurrence: [start, start + duration) frames.
struct AlignSegment {
  int phone = 0;
  int start_frame = 0;
  int duration = 0;
};

// Forced-aligner output for one utterance. Segments are non-overlapping and
// ordered by start frame; frames outside every segment carry no label.
struct Alignment {
  std::vector<AlignSegment> segments;
};

// Binary annotation for one aligned segment; 1 = correctly pronounced.
struct PhoneInstanceLabel {
  std::string utterance_id;
  int segment_index = 0;
  int phone = 0;
  int label = 0;
};

struct UtteranceRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string activation_path;  // resolved, absolute or manifest-relative
};

// Parsed manifest metadata; file contents are loaded separately.
struct CorpusManifest {
  FrameKind kind = FrameKind::kActivations;
  std::string phone_set_path;
  std::string senone_map_path;  // empty when absent
  std::string alignment_path;
  std::string label_path;
  std::vector<UtteranceRecord> utterances;
  std::vector<std::string> dev_speakers;   // optional split declaration
  std::vector<std::string> eval_speakers;  // optional split declaration
};

// Fully loaded, validated utterance: matrix + alignment + one label per
// segment. Immutable after load.
struct LoadedUtterance {
  std::string utterance_id;
  std::string speaker_id;
  FrameMatrix frames;
  Alignment alignment;
  std::vector<int> labels;  // labels[i] is the label of segment i
};

struct LoadedCorpus {
  FrameKind kind = FrameKind::kActivations;
  PhoneSet phones;
  std::optional<SenonePhoneMap> senone_map;
  std::vector<LoadedUtterance> utterances;
  std::vector<std::string> dev_speakers;
  std::vector<std::string> eval_speakers;
};

// Assignment of every speaker to exactly one fold; fold sizes differ by at
// most one speaker.
struct SpeakerSplit {
  std::map<std::string, int> fold_of;
  int n_folds = 0;
};

// One scored phone instance, higher score = more likely correct.
struct InstanceScore {
  std::string utterance_id;
  int segment_index = 0;
  int phone = 0;
  double score = 0.0;
  int label = 0;
};

}  // namespace pronscore

#endif  // PRONSCORE_TYPES_HPP
