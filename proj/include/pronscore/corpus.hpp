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

#ifndef PRONSCORE_CORPUS_HPP
#define PRONSCORE_CORPUS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pronscore/types.hpp"

namespace pronscore {

// Parses the manifest JSON without touching the referenced files. Relative
// paths are resolved against the manifest's directory. Unknown keys are
// errors.
CorpusManifest read_manifest(const std::string& path);

// Writes a manifest whose file paths are relative to `path`'s directory.
void write_manifest(const std::string& path, const CorpusManifest& manifest);

// Loads and cross-checks an entire corpus. `problems` lists every violation
// found (file/line where known); `corpus` is set only when there are none.
struct CorpusLoadResult {
  std::optional<LoadedCorpus> corpus;
  std::vector<std::string> problems;
};
CorpusLoadResult load_corpus_checked(const std::string& manifest_path);

// Convenience wrapper: throws ValidationError listing all problems.
LoadedCorpus load_corpus(const std::string& manifest_path);

// Deterministically partitions speakers into n_folds groups whose sizes
// differ by at most one. Requires 2 <= n_folds <= |speakers|.
SpeakerSplit make_speaker_folds(const std::vector<std::string>& speaker_ids,
                                int n_folds, std::uint64_t seed);

// counts[p] = (n_incorrect, n_correct) over the labeled segments of the
// selected utterances.
std::vector<std::pair<long, long>> phone_class_counts(
    const LoadedCorpus& corpus, const std::vector<std::size_t>& utt_indices);
std::vector<std::pair<long, long>> phone_class_counts(
    const LoadedCorpus& corpus);

// Sorted indices of phones whose minority class has at least min_minority
// instances among the selected utterances.
std::vector<int> eligible_phones(const LoadedCorpus& corpus,
                                 const std::vector<std::size_t>& utt_indices,
                                 long min_minority);
std::vector<int> eligible_phones(const LoadedCorpus& corpus,
                                 long min_minority);

// Indices of utterances whose speaker passes the filter: "dev", "eval"
// (require the manifest split lists), or "all".
std::vector<std::size_t> filter_utterances(const LoadedCorpus& corpus,
                                           const std::string& speakers);

}  // namespace pronscore

#endif  // PRONSCORE_CORPUS_HPP
