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

#include "pronscore/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "pronscore/errors.hpp"
#include "pronscore/io.hpp"
#include "pronscore/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pronscore {

namespace {

void require_keys(const json& obj, const std::set<std::string>& allowed,
                  const std::set<std::string>& required,
                  const std::string& where) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ValidationError(where + ": unknown key '" + item.key() + "'");
    }
  }
  for (const auto& key : required) {
    if (!obj.contains(key)) {
      throw ValidationError(where + ": missing key '" + key + "'");
    }
  }
}

std::string get_string(const json& obj, const std::string& key,
                       const std::string& where) {
  if (!obj.at(key).is_string()) {
    throw ValidationError(where + ": key '" + key + "' must be a string");
  }
  return obj.at(key).get<std::string>();
}

std::vector<std::string> get_string_list(const json& obj,
                                         const std::string& key,
                                         const std::string& where) {
  if (!obj.at(key).is_array()) {
    throw ValidationError(where + ": key '" + key + "' must be an array");
  }
  std::vector<std::string> out;
  for (const auto& item : obj.at(key)) {
    if (!item.is_string()) {
      throw ValidationError(where + ": key '" + key +
                            "' must contain only strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

std::string resolve(const fs::path& base_dir, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute()) return path.string();
  return (base_dir / path).lexically_normal().string();
}

}  // namespace

CorpusManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open manifest: " + path);
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) {
    throw ValidationError(path + ": manifest must be a JSON object");
  }
  require_keys(doc,
               {"kind", "phone_set", "senone_map", "alignments", "labels",
                "utterances", "dev_speakers", "eval_speakers"},
               {"kind", "phone_set", "alignments", "labels", "utterances"},
               path);

  CorpusManifest m;
  const std::string kind = get_string(doc, "kind", path);
  if (kind == "activations") {
    m.kind = FrameKind::kActivations;
  } else if (kind == "posteriors") {
    m.kind = FrameKind::kPosteriors;
  } else {
    throw ValidationError(path + ": kind must be 'activations' or "
                          "'posteriors', got '" + kind + "'");
  }

  const fs::path base_dir = fs::path(path).parent_path();
  m.phone_set_path = resolve(base_dir, get_string(doc, "phone_set", path));
  if (doc.contains("senone_map")) {
    m.senone_map_path = resolve(base_dir, get_string(doc, "senone_map", path));
  }
  m.alignment_path = resolve(base_dir, get_string(doc, "alignments", path));
  m.label_path = resolve(base_dir, get_string(doc, "labels", path));

  if (!doc.at("utterances").is_array()) {
    throw ValidationError(path + ": 'utterances' must be an array");
  }
  for (std::size_t i = 0; i < doc.at("utterances").size(); ++i) {
    const json& entry = doc.at("utterances")[i];
    const std::string where =
        path + ": utterances[" + std::to_string(i) + "]";
    if (!entry.is_object()) {
      throw ValidationError(where + ": must be an object");
    }
    require_keys(entry, {"id", "speaker", "features"},
                 {"id", "speaker", "features"}, where);
    UtteranceRecord rec;
    rec.utterance_id = get_string(entry, "id", where);
    rec.speaker_id = get_string(entry, "speaker", where);
    rec.activation_path = resolve(base_dir, get_string(entry, "features", where));
    if (rec.utterance_id.empty() || rec.speaker_id.empty()) {
      throw ValidationError(where + ": id and speaker must be non-empty");
    }
    m.utterances.push_back(std::move(rec));
  }

  if (doc.contains("dev_speakers")) {
    m.dev_speakers = get_string_list(doc, "dev_speakers", path);
  }
  if (doc.contains("eval_speakers")) {
    m.eval_speakers = get_string_list(doc, "eval_speakers", path);
  }
  return m;
}

void write_manifest(const std::string& path, const CorpusManifest& manifest) {
  const fs::path base_dir = fs::path(path).parent_path();
  auto relativize = [&](const std::string& p) -> std::string {
    const fs::path rel = fs::path(p).lexically_relative(
        base_dir.empty() ? fs::path(".") : base_dir);
    if (rel.empty() || rel.native().starts_with("..")) return p;
    return rel.generic_string();
  };

  json doc;
  doc["kind"] =
      manifest.kind == FrameKind::kActivations ? "activations" : "posteriors";
  doc["phone_set"] = relativize(manifest.phone_set_path);
  if (!manifest.senone_map_path.empty()) {
    doc["senone_map"] = relativize(manifest.senone_map_path);
  }
  doc["alignments"] = relativize(manifest.alignment_path);
  doc["labels"] = relativize(manifest.label_path);
  doc["utterances"] = json::array();
  for (const auto& rec : manifest.utterances) {
    doc["utterances"].push_back({{"id", rec.utterance_id},
                                 {"speaker", rec.speaker_id},
                                 {"features", relativize(rec.activation_path)}});
  }
  if (!manifest.dev_speakers.empty()) {
    doc["dev_speakers"] = manifest.dev_speakers;
  }
  if (!manifest.eval_speakers.empty()) {
    doc["eval_speakers"] = manifest.eval_speakers;
  }

  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw ValidationError("cannot open file for writing: " + path);
  }
  out << doc.dump(2) << '\n';
  out.flush();
  if (!out.good()) {
    throw ValidationError("error while writing file: " + path);
  }
}

CorpusLoadResult load_corpus_checked(const std::string& manifest_path) {
  CorpusLoadResult result;
  auto& problems = result.problems;

  CorpusManifest manifest;
  try {
    manifest = read_manifest(manifest_path);
  } catch (const ValidationError& e) {
    problems.push_back(e.what());
    return result;
  }

  LoadedCorpus corpus;
  corpus.kind = manifest.kind;
  corpus.dev_speakers = manifest.dev_speakers;
  corpus.eval_speakers = manifest.eval_speakers;

  try {
    corpus.phones = read_phone_set(manifest.phone_set_path);
  } catch (const ValidationError& e) {
    problems.push_back(e.what());
    return result;  // everything downstream needs the phone set
  }

  if (!manifest.senone_map_path.empty()) {
    try {
      corpus.senone_map =
          read_senone_map(manifest.senone_map_path, corpus.phones);
    } catch (const ValidationError& e) {
      problems.push_back(e.what());
    }
  }

  std::map<std::string, Alignment> alignments;
  try {
    alignments = read_alignments(manifest.alignment_path, corpus.phones);
  } catch (const ValidationError& e) {
    problems.push_back(e.what());
  }
  std::vector<PhoneInstanceLabel> labels;
  try {
    labels = read_labels(manifest.label_path, corpus.phones);
  } catch (const ValidationError& e) {
    problems.push_back(e.what());
  }
  if (!problems.empty()) return result;

  std::unordered_set<std::string> utt_ids;
  for (const auto& rec : manifest.utterances) {
    if (!utt_ids.insert(rec.utterance_id).second) {
      problems.push_back(manifest_path + ": duplicate utterance id '" +
                         rec.utterance_id + "'");
    }
  }

  // Group labels by utterance for the per-utterance pairing check.
  std::unordered_map<std::string, std::vector<const PhoneInstanceLabel*>>
      labels_by_utt;
  for (const auto& label : labels) {
    if (!utt_ids.count(label.utterance_id)) {
      problems.push_back(manifest.label_path + ": label references unknown "
                         "utterance '" + label.utterance_id + "'");
      continue;
    }
    labels_by_utt[label.utterance_id].push_back(&label);
  }
  for (const auto& [utt, alignment] : alignments) {
    (void)alignment;
    if (!utt_ids.count(utt)) {
      problems.push_back(manifest.alignment_path +
                         ": alignment references unknown utterance '" + utt +
                         "'");
    }
  }

  const std::size_t phone_count = corpus.phones.size();
  std::optional<std::size_t> expected_dim;
  for (const auto& rec : manifest.utterances) {
    LoadedUtterance utt;
    utt.utterance_id = rec.utterance_id;
    utt.speaker_id = rec.speaker_id;
    try {
      utt.frames = read_frame_matrix(rec.activation_path);
    } catch (const ValidationError& e) {
      problems.push_back(e.what());
      continue;
    }
    if (utt.frames.kind != corpus.kind) {
      problems.push_back(rec.activation_path + ": file kind does not match "
                         "the manifest kind");
      continue;
    }
    if (!expected_dim) {
      expected_dim = utt.frames.dim();
    } else if (utt.frames.dim() != *expected_dim) {
      problems.push_back(rec.activation_path + ": dimension " +
                         std::to_string(utt.frames.dim()) +
                         " differs from the corpus dimension " +
                         std::to_string(*expected_dim));
      continue;
    }
    if (corpus.kind == FrameKind::kPosteriors) {
      const std::size_t want =
          corpus.senone_map ? corpus.senone_map->senone_count() : phone_count;
      if (utt.frames.dim() != want) {
        problems.push_back(rec.activation_path + ": posterior dimension " +
                           std::to_string(utt.frames.dim()) + " does not "
                           "match the expected " + std::to_string(want) +
                           (corpus.senone_map ? " senones" : " phones"));
        continue;
      }
    }

    auto align_it = alignments.find(rec.utterance_id);
    if (align_it != alignments.end()) {
      utt.alignment = align_it->second;
    }
    const int n_frames = static_cast<int>(utt.frames.n_frames());
    bool segments_ok = true;
    for (std::size_t s = 0; s < utt.alignment.segments.size(); ++s) {
      const auto& seg = utt.alignment.segments[s];
      if (seg.start_frame + seg.duration > n_frames) {
        problems.push_back(manifest.alignment_path + ": utterance '" +
                           rec.utterance_id + "' segment " +
                           std::to_string(s) + " covers frames up to " +
                           std::to_string(seg.start_frame + seg.duration) +
                           " but the utterance has only " +
                           std::to_string(n_frames) + " frames");
        segments_ok = false;
      }
    }

    utt.labels.assign(utt.alignment.segments.size(), -1);
    auto lab_it = labels_by_utt.find(rec.utterance_id);
    if (lab_it != labels_by_utt.end()) {
      for (const auto* label : lab_it->second) {
        if (label->segment_index >=
            static_cast<int>(utt.alignment.segments.size())) {
          problems.push_back(manifest.label_path + ": label for utterance '" +
                             rec.utterance_id + "' references segment " +
                             std::to_string(label->segment_index) +
                             " but the alignment has only " +
                             std::to_string(utt.alignment.segments.size()) +
                             " segments");
          segments_ok = false;
          continue;
        }
        const auto& seg = utt.alignment.segments[label->segment_index];
        if (seg.phone != label->phone) {
          problems.push_back(
              manifest.label_path + ": label phone '" +
              corpus.phones.symbol(label->phone) + "' for utterance '" +
              rec.utterance_id + "' segment " +
              std::to_string(label->segment_index) +
              " does not match the aligned phone '" +
              corpus.phones.symbol(seg.phone) + "'");
          segments_ok = false;
          continue;
        }
        utt.labels[label->segment_index] = label->label;
      }
    }
    for (std::size_t s = 0; s < utt.labels.size(); ++s) {
      if (utt.labels[s] == -1) {
        problems.push_back(manifest.label_path + ": utterance '" +
                           rec.utterance_id + "' segment " +
                           std::to_string(s) + " has no label");
        segments_ok = false;
      }
    }
    if (segments_ok) {
      corpus.utterances.push_back(std::move(utt));
    }
  }

  // Split lists must reference known speakers and must not overlap.
  std::unordered_set<std::string> speakers;
  for (const auto& rec : manifest.utterances) speakers.insert(rec.speaker_id);
  std::unordered_set<std::string> dev_set;
  for (const auto& s : corpus.dev_speakers) {
    if (!speakers.count(s)) {
      problems.push_back(manifest_path + ": dev speaker '" + s +
                         "' has no utterances");
    }
    if (!dev_set.insert(s).second) {
      problems.push_back(manifest_path + ": duplicate dev speaker '" + s +
                         "'");
    }
  }
  std::unordered_set<std::string> eval_set;
  for (const auto& s : corpus.eval_speakers) {
    if (!speakers.count(s)) {
      problems.push_back(manifest_path + ": eval speaker '" + s +
                         "' has no utterances");
    }
    if (!eval_set.insert(s).second) {
      problems.push_back(manifest_path + ": duplicate eval speaker '" + s +
                         "'");
    }
    if (dev_set.count(s)) {
      problems.push_back(manifest_path + ": speaker '" + s +
                         "' appears in both dev and eval lists");
    }
  }

  if (problems.empty()) {
    result.corpus = std::move(corpus);
  }
  return result;
}

LoadedCorpus load_corpus(const std::string& manifest_path) {
  CorpusLoadResult result = load_corpus_checked(manifest_path);
  if (!result.corpus) {
    std::string message = "corpus validation failed:";
    for (const auto& p : result.problems) {
      message += "\n  " + p;
    }
    throw ValidationError(message);
  }
  return std::move(*result.corpus);
}

SpeakerSplit make_speaker_folds(const std::vector<std::string>& speaker_ids,
                                int n_folds, std::uint64_t seed) {
  std::vector<std::string> ids = speaker_ids;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ValidationError("duplicate speaker id in fold assignment");
  }
  if (n_folds < 2) {
    throw ValidationError("n_folds must be at least 2, got " +
                          std::to_string(n_folds));
  }
  if (static_cast<std::size_t>(n_folds) > ids.size()) {
    throw ValidationError("n_folds (" + std::to_string(n_folds) +
                          ") exceeds the number of speakers (" +
                          std::to_string(ids.size()) + ")");
  }
  Rng rng(Rng::derive(seed, "speaker-folds"));
  rng.shuffle(ids);
  SpeakerSplit split;
  split.n_folds = n_folds;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    split.fold_of[ids[i]] = static_cast<int>(i % n_folds);
  }
  return split;
}

std::vector<std::pair<long, long>> phone_class_counts(
    const LoadedCorpus& corpus, const std::vector<std::size_t>& utt_indices) {
  std::vector<std::pair<long, long>> counts(corpus.phones.size(), {0, 0});
  for (std::size_t idx : utt_indices) {
    const auto& utt = corpus.utterances[idx];
    for (std::size_t s = 0; s < utt.alignment.segments.size(); ++s) {
      const int phone = utt.alignment.segments[s].phone;
      if (utt.labels[s] == 0) {
        ++counts[phone].first;
      } else {
        ++counts[phone].second;
      }
    }
  }
  return counts;
}

std::vector<std::pair<long, long>> phone_class_counts(
    const LoadedCorpus& corpus) {
  std::vector<std::size_t> all(corpus.utterances.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return phone_class_counts(corpus, all);
}

std::vector<int> eligible_phones(const LoadedCorpus& corpus,
                                 const std::vector<std::size_t>& utt_indices,
                                 long min_minority) {
  const auto counts = phone_class_counts(corpus, utt_indices);
  std::vector<int> eligible;
  for (std::size_t p = 0; p < counts.size(); ++p) {
    const auto [n0, n1] = counts[p];
    if (n0 == 0 || n1 == 0) continue;  // both classes must be present
    if (std::min(n0, n1) >= min_minority) {
      eligible.push_back(static_cast<int>(p));
    }
  }
  return eligible;
}

std::vector<int> eligible_phones(const LoadedCorpus& corpus,
                                 long min_minority) {
  std::vector<std::size_t> all(corpus.utterances.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return eligible_phones(corpus, all, min_minority);
}

std::vector<std::size_t> filter_utterances(const LoadedCorpus& corpus,
                                           const std::string& speakers) {
  std::vector<std::size_t> indices;
  if (speakers == "all") {
    for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
      indices.push_back(i);
    }
    return indices;
  }
  const std::vector<std::string>* list = nullptr;
  if (speakers == "dev") {
    list = &corpus.dev_speakers;
  } else if (speakers == "eval") {
    list = &corpus.eval_speakers;
  } else {
    throw ValidationError("speaker filter must be 'dev', 'eval', or 'all', "
                          "got '" + speakers + "'");
  }
  if (list->empty()) {
    throw ValidationError("the manifest declares no " + speakers +
                          " speakers; cannot filter by '" + speakers + "'");
  }
  std::unordered_set<std::string> wanted(list->begin(), list->end());
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    if (wanted.count(corpus.utterances[i].speaker_id)) {
      indices.push_back(i);
    }
  }
  return indices;
}

}  // namespace pronscore
