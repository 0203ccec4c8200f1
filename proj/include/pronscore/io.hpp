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

#ifndef PRONSCORE_IO_HPP
#define PRONSCORE_IO_HPP

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pronscore/types.hpp"

namespace pronscore {

// Shortest decimal representation that round-trips the double exactly.
std::string fmt_double(double v);

// Frame-matrix container: little-endian, magic "FMAT", version 1, a kind tag
// (0 = activations, 1 = posteriors), the frame count and dimension, then the
// row-major float32 payload. Values are widened to double in memory.
// Validation errors name the offending file (and frame/offset when known).
FrameMatrix read_frame_matrix(const std::string& path);
void write_frame_matrix(const std::string& path, const FrameMatrix& m);

// In-memory forms of the same container, used for embedded tensor blocks.
// `name` labels the block in error messages.
std::string encode_frame_matrix(const FrameMatrix& m);
FrameMatrix decode_frame_matrix(std::string_view bytes,
                                const std::string& name);

// Phone set file: one symbol per line, '#' comments and blank lines ignored.
PhoneSet read_phone_set(const std::string& path);
void write_phone_set(const std::string& path, const PhoneSet& phones);

// Senone map file: "senone_index phone" per line. Every senone index in
// [0, S) must appear exactly once; S is inferred as max index + 1. Phones
// must belong to the given inventory.
SenonePhoneMap read_senone_map(const std::string& path, const PhoneSet& phones);
void write_senone_map(const std::string& path, const SenonePhoneMap& map,
                      const PhoneSet& phones);

// Alignment file: "utt_id phone start_frame duration" per line, '#' comments
// and blank lines ignored. Within one utterance, segments must be ordered by
// start frame and must not overlap; duration must be positive.
std::map<std::string, Alignment> read_alignments(const std::string& path,
                                                 const PhoneSet& phones);
void write_alignments(const std::string& path,
                      const std::map<std::string, Alignment>& alignments,
                      const PhoneSet& phones);

// Label file: "utt_id segment_index phone label" per line, label in {0, 1};
// '#' comments and blank lines ignored.
std::vector<PhoneInstanceLabel> read_labels(const std::string& path,
                                            const PhoneSet& phones);
void write_labels(const std::string& path,
                  const std::vector<PhoneInstanceLabel>& labels,
                  const PhoneSet& phones);

// One row of a scores CSV, phone kept as its symbol so score files can be
// consumed without the producing corpus at hand.
struct ScoreRow {
  std::string utterance_id;
  int segment_index = 0;
  std::string phone;
  double score = 0.0;
  int label = 0;
};

// Scores CSV: header "utt_id,segment_index,phone,score,label".
void write_scores_csv(const std::string& path,
                      const std::vector<InstanceScore>& scores,
                      const PhoneSet& phones);
std::vector<ScoreRow> read_scores_csv(const std::string& path);

}  // namespace pronscore

#endif  // PRONSCORE_IO_HPP
