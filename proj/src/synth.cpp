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

#include "pronscore/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "pronscore/corpus.hpp"
#include "pronscore/errors.hpp"
#include "pronscore/io.hpp"
#include "pronscore/rng.hpp"

namespace fs = std::filesystem;

namespace pronscore {

namespace {

std::string padded(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

int digits_for(int max_value) {
  int width = 1;
  for (int v = max_value; v >= 10; v /= 10) ++width;
  return width;
}

// Draws a unit-length direction; the zero-dimensional corner cannot occur
// because dim >= 1 and a Gaussian draw is almost surely nonzero (retried
// defensively regardless).
std::vector<double> random_direction(Rng& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

struct SegmentPlan {
  int phone = 0;
  int start = 0;
  int duration = 0;
  int label = 1;
};

struct UtterancePlan {
  std::string utterance_id;
  std::string speaker_id;
  int n_frames = 0;
  std::vector<SegmentPlan> segments;
};

}  // namespace

void SynthSpec::validate() const {
  if (n_speakers < 1) throw ValidationError("n_speakers must be >= 1");
  if (utterances_per_speaker < 1) {
    throw ValidationError("utterances_per_speaker must be >= 1");
  }
  if (segments_per_utterance < 1) {
    throw ValidationError("segments_per_utterance must be >= 1");
  }
  if (n_phones < 1) throw ValidationError("n_phones must be >= 1");
  if (min_segment_frames < 1 || max_segment_frames < min_segment_frames) {
    throw ValidationError("segment frame range must satisfy "
                          "1 <= min <= max");
  }
  if (dim < 1) throw ValidationError("dim must be >= 1");
  if (senones_per_phone < 1) {
    throw ValidationError("senones_per_phone must be >= 1");
  }
  if (separation < 0.0) throw ValidationError("separation must be >= 0");
  if (incorrect_prior.empty() ||
      (incorrect_prior.size() != 1 &&
       incorrect_prior.size() != static_cast<std::size_t>(n_phones))) {
    throw ValidationError("incorrect_prior must hold one value or one per "
                          "phone");
  }
  for (double p : incorrect_prior) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("incorrect_prior values must be in [0, 1]");
    }
  }
  if (max_silence_frames < 0) {
    throw ValidationError("max_silence_frames must be >= 0");
  }
  if (n_dev_speakers != -1 &&
      (n_dev_speakers < 0 || n_dev_speakers > n_speakers)) {
    throw ValidationError("n_dev_speakers must be in [0, n_speakers]");
  }
}

int SynthSpec::resolved_dev_speakers() const {
  if (n_dev_speakers != -1) return n_dev_speakers;
  return std::max(1, (n_speakers * 3) / 5);
}

CorpusManifest generate_corpus(const SynthSpec& spec,
                               const std::string& out_dir) {
  spec.validate();
  fs::create_directories(out_dir);
  fs::create_directories(fs::path(out_dir) / "frames");

  const int feature_dim = spec.kind == FrameKind::kActivations
                              ? spec.dim
                              : spec.n_phones * spec.senones_per_phone;

  // Phone inventory and senone map.
  const int phone_width = std::max(2, digits_for(spec.n_phones - 1));
  std::vector<std::string> phone_symbols;
  for (int p = 0; p < spec.n_phones; ++p) {
    phone_symbols.push_back("P" + padded(p, phone_width));
  }
  PhoneSet phones(phone_symbols);

  SenonePhoneMap senone_map;
  if (spec.kind == FrameKind::kPosteriors) {
    senone_map.phone_of.resize(
        static_cast<std::size_t>(spec.n_phones * spec.senones_per_phone));
    for (std::size_t s = 0; s < senone_map.phone_of.size(); ++s) {
      senone_map.phone_of[s] = static_cast<int>(s) / spec.senones_per_phone;
    }
  }

  // Class means: each phone gets a center on a sphere of radius
  // `separation` plus/minus half a separation along a second direction, so
  // |mean(correct) - mean(incorrect)| = separation with unit noise.
  Rng mean_rng(Rng::derive(spec.seed, "synth-means"));
  std::vector<std::vector<double>> mean_correct(spec.n_phones);
  std::vector<std::vector<double>> mean_incorrect(spec.n_phones);
  {
    const int mean_dim =
        spec.kind == FrameKind::kActivations ? spec.dim : 1;
    for (int p = 0; p < spec.n_phones; ++p) {
      if (spec.kind == FrameKind::kActivations) {
        const auto center_dir = random_direction(mean_rng, mean_dim);
        const auto split_dir = random_direction(mean_rng, mean_dim);
        mean_correct[p].resize(mean_dim);
        mean_incorrect[p].resize(mean_dim);
        for (int j = 0; j < mean_dim; ++j) {
          const double center = spec.separation * center_dir[j];
          const double split = 0.5 * spec.separation * split_dir[j];
          mean_correct[p][j] = center + split;
          mean_incorrect[p][j] = center - split;
        }
      } else {
        // Posterior corpora separate classes along the target senone logit.
        mean_correct[p] = {0.5 * spec.separation};
        mean_incorrect[p] = {-0.5 * spec.separation};
      }
    }
  }

  // Segment/label structure, drawn from a stream that does not depend on
  // the output kind or the feature parameters.
  Rng structure_rng(Rng::derive(spec.seed, "synth-structure"));
  const int speaker_width = std::max(2, digits_for(spec.n_speakers - 1));
  const int utt_width = std::max(3, digits_for(spec.utterances_per_speaker - 1));
  std::vector<UtterancePlan> plans;
  for (int sp = 0; sp < spec.n_speakers; ++sp) {
    const std::string speaker = "spk" + padded(sp, speaker_width);
    for (int u = 0; u < spec.utterances_per_speaker; ++u) {
      UtterancePlan plan;
      plan.speaker_id = speaker;
      plan.utterance_id = speaker + "_utt" + padded(u, utt_width);
      int cursor = 0;
      for (int s = 0; s < spec.segments_per_utterance; ++s) {
        if (spec.max_silence_frames > 0) {
          cursor += static_cast<int>(structure_rng.below(
              static_cast<std::uint64_t>(spec.max_silence_frames + 1)));
        }
        SegmentPlan seg;
        seg.phone = static_cast<int>(
            structure_rng.below(static_cast<std::uint64_t>(spec.n_phones)));
        seg.start = cursor;
        seg.duration =
            spec.min_segment_frames +
            static_cast<int>(structure_rng.below(static_cast<std::uint64_t>(
                spec.max_segment_frames - spec.min_segment_frames + 1)));
        const double prior =
            spec.incorrect_prior.size() == 1
                ? spec.incorrect_prior[0]
                : spec.incorrect_prior[static_cast<std::size_t>(seg.phone)];
        seg.label = structure_rng.uniform() < prior ? 0 : 1;
        cursor += seg.duration;
        plan.segments.push_back(seg);
      }
      if (spec.max_silence_frames > 0) {
        cursor += static_cast<int>(structure_rng.below(
            static_cast<std::uint64_t>(spec.max_silence_frames + 1)));
      }
      plan.n_frames = cursor;
      plans.push_back(std::move(plan));
    }
  }

  // Feature stream, keyed by the output kind so paired corpora share
  // structure but not noise.
  Rng feature_rng(Rng::derive(
      spec.seed, "synth-features",
      spec.kind == FrameKind::kActivations ? 0 : 1));

  CorpusManifest manifest;
  manifest.kind = spec.kind;
  manifest.phone_set_path = (fs::path(out_dir) / "phones.txt").string();
  manifest.alignment_path = (fs::path(out_dir) / "alignments.txt").string();
  manifest.label_path = (fs::path(out_dir) / "labels.txt").string();

  std::map<std::string, Alignment> alignments;
  std::vector<PhoneInstanceLabel> labels;

  for (const auto& plan : plans) {
    FrameMatrix frames;
    frames.kind = spec.kind;
    frames.values = Matrix(static_cast<std::size_t>(plan.n_frames),
                           static_cast<std::size_t>(feature_dim));

    // Which segment (if any) covers each frame.
    std::vector<int> segment_of(static_cast<std::size_t>(plan.n_frames), -1);
    for (std::size_t s = 0; s < plan.segments.size(); ++s) {
      const auto& seg = plan.segments[s];
      for (int t = seg.start; t < seg.start + seg.duration; ++t) {
        segment_of[static_cast<std::size_t>(t)] = static_cast<int>(s);
      }
    }

    for (int t = 0; t < plan.n_frames; ++t) {
      const int seg_idx = segment_of[static_cast<std::size_t>(t)];
      if (spec.kind == FrameKind::kActivations) {
        for (int j = 0; j < feature_dim; ++j) {
          double value = feature_rng.normal();
          if (seg_idx >= 0) {
            const auto& seg = plan.segments[static_cast<std::size_t>(seg_idx)];
            value += seg.label == 1 ? mean_correct[seg.phone][j]
                                    : mean_incorrect[seg.phone][j];
          }
          frames.values(static_cast<std::size_t>(t),
                        static_cast<std::size_t>(j)) = value;
        }
      } else {
        std::vector<double> logits(static_cast<std::size_t>(feature_dim));
        for (auto& logit : logits) logit = feature_rng.normal();
        if (seg_idx >= 0) {
          const auto& seg = plan.segments[static_cast<std::size_t>(seg_idx)];
          const double shift =
              spec.target_logit_boost +
              (seg.label == 1 ? mean_correct[seg.phone][0]
                              : mean_incorrect[seg.phone][0]);
          for (int s = seg.phone * spec.senones_per_phone;
               s < (seg.phone + 1) * spec.senones_per_phone; ++s) {
            logits[static_cast<std::size_t>(s)] += shift;
          }
        }
        double max_logit = logits[0];
        for (double logit : logits) max_logit = std::max(max_logit, logit);
        double denom = 0.0;
        for (auto& logit : logits) {
          logit = std::exp(logit - max_logit);
          denom += logit;
        }
        for (int j = 0; j < feature_dim; ++j) {
          frames.values(static_cast<std::size_t>(t),
                        static_cast<std::size_t>(j)) = logits[j] / denom;
        }
      }
    }

    const std::string frame_path =
        (fs::path(out_dir) / "frames" / (plan.utterance_id + ".fmat"))
            .string();
    write_frame_matrix(frame_path, frames);

    UtteranceRecord rec;
    rec.utterance_id = plan.utterance_id;
    rec.speaker_id = plan.speaker_id;
    rec.activation_path = frame_path;
    manifest.utterances.push_back(std::move(rec));

    Alignment alignment;
    for (std::size_t s = 0; s < plan.segments.size(); ++s) {
      const auto& seg = plan.segments[s];
      alignment.segments.push_back({seg.phone, seg.start, seg.duration});
      PhoneInstanceLabel label;
      label.utterance_id = plan.utterance_id;
      label.segment_index = static_cast<int>(s);
      label.phone = seg.phone;
      label.label = seg.label;
      labels.push_back(std::move(label));
    }
    alignments[plan.utterance_id] = std::move(alignment);
  }

  write_phone_set(manifest.phone_set_path, phones);
  if (spec.kind == FrameKind::kPosteriors) {
    manifest.senone_map_path = (fs::path(out_dir) / "senone_map.txt").string();
    write_senone_map(manifest.senone_map_path, senone_map, phones);
  }
  write_alignments(manifest.alignment_path, alignments, phones);
  write_labels(manifest.label_path, labels, phones);

  const int n_dev = spec.resolved_dev_speakers();
  std::vector<std::string> speakers;
  for (int sp = 0; sp < spec.n_speakers; ++sp) {
    speakers.push_back("spk" + padded(sp, speaker_width));
  }
  for (int sp = 0; sp < spec.n_speakers; ++sp) {
    if (sp < n_dev) {
      manifest.dev_speakers.push_back(speakers[sp]);
    } else {
      manifest.eval_speakers.push_back(speakers[sp]);
    }
  }

  write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
  return manifest;
}

}  // namespace pronscore
