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

#ifndef PRONSCORE_TRAINER_HPP
#define PRONSCORE_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pronscore/head.hpp"
#include "pronscore/types.hpp"

namespace pronscore {

// Weighted binary cross-entropy configuration. Balanced weighting uses
// w = 1/N for each (phone, class) cell with N counted over the mini-batch;
// excluded phones get weight 0 everywhere.
struct LossSpec {
  enum class Weighting { kFlat, kBalanced };
  Weighting weighting = Weighting::kFlat;
  std::set<int> excluded_phones;
  double prob_clamp = 1e-7;  // probabilities clamped to [c, 1-c] before log
};

// One labeled frame: row `frame` of the batch matrix is a frame of target
// phone `phone` with pronunciation label `label`.
struct FrameTarget {
  std::size_t frame = 0;
  int phone = 0;
  int label = 0;
};

struct BatchLossResult {
  double loss = 0.0;   // raw weighted sum, no per-batch normalization
  Matrix dprobs;       // dL/dprobabilities, nonzero only at selected entries
  bool empty_batch = false;
};

// loss = -sum_p sum_y w_py sum_{t in T_py} [y log p + (1-y) log(1-p)] with
// probabilities clamped to [prob_clamp, 1-prob_clamp]. Gradients are zero
// wherever the clamp is active.
BatchLossResult batch_loss(const Matrix& probs,
                           const std::vector<FrameTarget>& targets,
                           const LossSpec& spec);

// First/second Adam moments for one parameter tensor.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
};

// Standard Adam with bias correction; throws on non-finite gradients.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double epsilon = 1e-8);

enum class TrainStage { kOutputOnly, kOutputPlusHidden };

struct TrainConfig {
  int batch_size = 32;  // utterances per mini-batch
  int epochs = 600;
  double lr_initial = 0.01;
  double lr_decay_factor = 0.9;
  int lr_decay_every = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  TrainStage stage = TrainStage::kOutputOnly;
  // For two-stage training: epochs with the hidden layer frozen before it is
  // unfrozen (with fresh optimizer moments).
  int stage1_epochs = 100;
  int checkpoint_every = 50;
  std::uint64_t seed = 0;

  void validate() const;  // throws ValidationError
};

// lr_initial * decay_factor^floor(epoch / decay_every); epoch is 0-based.
double lr_at_epoch(const TrainConfig& config, int epoch);

struct EpochLog {
  int epoch = 0;  // 0-based
  double lr = 0.0;
  double train_loss = 0.0;  // epoch loss sum divided by utterance count
};

struct TrainResult {
  HeadParams params;
  std::vector<EpochLog> log;
};

// Called after each checkpoint epoch (every checkpoint_every epochs and at
// the final epoch) with the 0-based epoch index and the current parameters.
using CheckpointSink = std::function<void(int epoch, const HeadParams&)>;

// Trains the head on the selected utterances of an activation-kind corpus.
// Batch unit = utterance; each contributes all frames covered by a labeled
// segment. Deterministic for a fixed seed. When `hidden_init` is given it
// replaces the random initialization of the hidden weights (shape must be
// hidden_dim x input_dim).
TrainResult train(const LoadedCorpus& corpus,
                  const std::vector<std::size_t>& utt_indices,
                  const HeadConfig& head_config, const TrainConfig& config,
                  const LossSpec& loss_spec,
                  const CheckpointSink& sink = nullptr,
                  const Matrix* hidden_init = nullptr);

}  // namespace pronscore

#endif  // PRONSCORE_TRAINER_HPP
