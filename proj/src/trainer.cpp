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

#include "pronscore/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "pronscore/errors.hpp"
#include "pronscore/rng.hpp"

namespace pronscore {

namespace {

// Labeled frames of one utterance, extracted once before the epoch loop.
struct UttFrames {
  Matrix rows;                       // labeled frames only
  std::vector<FrameTarget> targets;  // frame indices local to `rows`
};

UttFrames extract_labeled_frames(const LoadedUtterance& utt) {
  UttFrames out;
  std::size_t n_rows = 0;
  for (const auto& seg : utt.alignment.segments) {
    n_rows += static_cast<std::size_t>(seg.duration);
  }
  out.rows = Matrix(n_rows, utt.frames.dim());
  out.targets.reserve(n_rows);
  std::size_t r = 0;
  for (std::size_t s = 0; s < utt.alignment.segments.size(); ++s) {
    const auto& seg = utt.alignment.segments[s];
    for (int t = seg.start_frame; t < seg.start_frame + seg.duration; ++t) {
      for (std::size_t c = 0; c < utt.frames.dim(); ++c) {
        out.rows(r, c) = utt.frames.values(static_cast<std::size_t>(t), c);
      }
      out.targets.push_back({r, seg.phone, utt.labels[s]});
      ++r;
    }
  }
  return out;
}

struct OptimizerStates {
  AdamState w;
  AdamState b;
  AdamState bn_gamma;
  AdamState bn_beta;
  AdamState hidden_w;
};

}  // namespace

BatchLossResult batch_loss(const Matrix& probs,
                           const std::vector<FrameTarget>& targets,
                           const LossSpec& spec) {
  BatchLossResult result;
  result.dprobs = Matrix(probs.rows(), probs.cols());
  if (targets.empty()) {
    result.empty_batch = true;
    return result;
  }
  const double clamp_lo = spec.prob_clamp;
  const double clamp_hi = 1.0 - spec.prob_clamp;

  // Per-batch (phone, class) counts for balanced weighting.
  std::map<std::pair<int, int>, long> cell_counts;
  if (spec.weighting == LossSpec::Weighting::kBalanced) {
    for (const auto& target : targets) {
      ++cell_counts[{target.phone, target.label}];
    }
  }

  for (const auto& target : targets) {
    if (target.frame >= probs.rows() ||
        static_cast<std::size_t>(target.phone) >= probs.cols()) {
      throw ValidationError("frame target out of range of the probability "
                            "matrix");
    }
    if (spec.excluded_phones.count(target.phone)) continue;
    double weight = 1.0;
    if (spec.weighting == LossSpec::Weighting::kBalanced) {
      weight = 1.0 / static_cast<double>(
                         cell_counts[{target.phone, target.label}]);
    }
    const double raw = probs(target.frame,
                             static_cast<std::size_t>(target.phone));
    double p = raw;
    if (p < clamp_lo) p = clamp_lo;
    if (p > clamp_hi) p = clamp_hi;
    const double y = static_cast<double>(target.label);
    result.loss -= weight * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    if (raw >= clamp_lo && raw <= clamp_hi) {
      result.dprobs(target.frame, static_cast<std::size_t>(target.phone)) +=
          weight * (p - y) / (p * (1.0 - p));
    }
  }
  return result;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr, double beta1, double beta2,
               double epsilon) {
  if (params.size() != grads.size()) {
    throw ValidationError("adam_step: parameter/gradient size mismatch");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  } else if (state.m.size() != params.size()) {
    throw ValidationError("adam_step: optimizer state size mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) {
      throw std::runtime_error("adam_step: non-finite gradient encountered");
    }
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
  }
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (lr_initial <= 0.0) throw ValidationError("lr_initial must be > 0");
  if (lr_decay_factor <= 0.0) {
    throw ValidationError("lr_decay_factor must be > 0");
  }
  if (lr_decay_every < 1) throw ValidationError("lr_decay_every must be >= 1");
  if (checkpoint_every < 1) {
    throw ValidationError("checkpoint_every must be >= 1");
  }
  if (stage == TrainStage::kOutputPlusHidden) {
    if (stage1_epochs < 0 || stage1_epochs >= epochs) {
      throw ValidationError("stage1_epochs must be in [0, epochs)");
    }
  }
}

double lr_at_epoch(const TrainConfig& config, int epoch) {
  if (epoch < 0) throw ValidationError("epoch must be >= 0");
  const int steps = epoch / config.lr_decay_every;
  return config.lr_initial *
         std::pow(config.lr_decay_factor, static_cast<double>(steps));
}

TrainResult train(const LoadedCorpus& corpus,
                  const std::vector<std::size_t>& utt_indices,
                  const HeadConfig& head_config, const TrainConfig& config,
                  const LossSpec& loss_spec, const CheckpointSink& sink,
                  const Matrix* hidden_init) {
  head_config.validate();
  config.validate();
  if (hidden_init != nullptr) {
    if (!head_config.use_hidden) {
      throw ValidationError("hidden-layer initialization given but the head "
                            "has no hidden layer");
    }
    if (hidden_init->rows() !=
            static_cast<std::size_t>(head_config.hidden_dim) ||
        hidden_init->cols() !=
            static_cast<std::size_t>(head_config.input_dim)) {
      throw ValidationError("hidden-layer initialization must be hidden_dim "
                            "x input_dim");
    }
  }
  if (corpus.kind != FrameKind::kActivations) {
    throw ValidationError("training requires an activation-kind corpus");
  }
  if (head_config.n_phones != static_cast<int>(corpus.phones.size())) {
    throw ValidationError("head n_phones " +
                          std::to_string(head_config.n_phones) +
                          " does not match the corpus phone count " +
                          std::to_string(corpus.phones.size()));
  }
  if (config.stage == TrainStage::kOutputPlusHidden &&
      !head_config.use_hidden) {
    throw ValidationError("two-stage training requires the hidden layer");
  }
  if (utt_indices.empty()) {
    throw ValidationError("no utterances selected for training");
  }

  std::vector<UttFrames> data;
  data.reserve(utt_indices.size());
  bool any_included_target = false;
  for (std::size_t idx : utt_indices) {
    const auto& utt = corpus.utterances[idx];
    if (utt.frames.dim() != static_cast<std::size_t>(head_config.input_dim)) {
      throw ValidationError("utterance '" + utt.utterance_id +
                            "' dimension " + std::to_string(utt.frames.dim()) +
                            " does not match head input_dim " +
                            std::to_string(head_config.input_dim));
    }
    data.push_back(extract_labeled_frames(utt));
    for (const auto& target : data.back().targets) {
      if (!loss_spec.excluded_phones.count(target.phone)) {
        any_included_target = true;
      }
    }
  }
  if (!any_included_target) {
    throw ValidationError("every labeled frame belongs to an excluded phone; "
                          "nothing to train on");
  }

  TrainResult result;
  result.params = init_params(head_config, config.seed);
  if (hidden_init != nullptr) {
    result.params.hidden_w = *hidden_init;
  }
  OptimizerStates opt;
  result.log.reserve(static_cast<std::size_t>(config.epochs));

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config, epoch);
    const bool hidden_frozen =
        head_config.use_hidden && (config.stage == TrainStage::kOutputOnly ||
                                   epoch < config.stage1_epochs);

    Rng shuffle_rng(Rng::derive(config.seed, "epoch-shuffle",
                                static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    const std::size_t n_batches =
        (data.size() + config.batch_size - 1) / config.batch_size;
    for (std::size_t batch_idx = 0; batch_idx < n_batches; ++batch_idx) {
      const std::size_t begin = batch_idx * config.batch_size;
      const std::size_t end =
          std::min(begin + config.batch_size, data.size());
      std::size_t n_rows = 0;
      for (std::size_t i = begin; i < end; ++i) {
        n_rows += data[order[i]].rows.rows();
      }
      if (n_rows == 0) continue;
      if (head_config.use_batchnorm && n_rows < 2) continue;

      Matrix batch(n_rows, static_cast<std::size_t>(head_config.input_dim));
      std::vector<FrameTarget> targets;
      targets.reserve(n_rows);
      std::size_t row_offset = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& utt = data[order[i]];
        for (std::size_t r = 0; r < utt.rows.rows(); ++r) {
          for (std::size_t c = 0; c < utt.rows.cols(); ++c) {
            batch(row_offset + r, c) = utt.rows(r, c);
          }
        }
        for (const auto& target : utt.targets) {
          targets.push_back(
              {target.frame + row_offset, target.phone, target.label});
        }
        row_offset += utt.rows.rows();
      }

      const std::uint64_t dropout_seed =
          Rng::derive(config.seed, "dropout",
                      static_cast<std::uint64_t>(epoch), batch_idx);
      ForwardTrace trace = forward(head_config, result.params, batch,
                                   RunMode::kTrain, dropout_seed);
      BatchLossResult loss = batch_loss(trace.probs, targets, loss_spec);
      if (!std::isfinite(loss.loss)) {
        throw std::runtime_error(
            "training diverged: non-finite loss at epoch " +
            std::to_string(epoch) + ", batch " + std::to_string(batch_idx));
      }
      epoch_loss += loss.loss;

      // The optimized objective is the batch loss averaged per utterance.
      const double inv_utts = 1.0 / static_cast<double>(end - begin);
      for (std::size_t i = 0; i < loss.dprobs.size(); ++i) {
        loss.dprobs.data()[i] *= inv_utts;
      }

      HeadGrads grads = backward(head_config, result.params, trace,
                                 loss.dprobs, hidden_frozen);
      try {
        adam_step(result.params.w.data(), grads.d_w.data(), opt.w, lr,
                  config.adam_beta1, config.adam_beta2, config.adam_epsilon);
        adam_step(result.params.b, grads.d_b, opt.b, lr, config.adam_beta1,
                  config.adam_beta2, config.adam_epsilon);
        if (head_config.use_batchnorm) {
          adam_step(result.params.bn_gamma, grads.d_bn_gamma, opt.bn_gamma,
                    lr, config.adam_beta1, config.adam_beta2,
                    config.adam_epsilon);
          adam_step(result.params.bn_beta, grads.d_bn_beta, opt.bn_beta, lr,
                    config.adam_beta1, config.adam_beta2,
                    config.adam_epsilon);
        }
        if (head_config.use_hidden && !hidden_frozen) {
          adam_step(result.params.hidden_w.data(), grads.d_hidden_w.data(),
                    opt.hidden_w, lr, config.adam_beta1, config.adam_beta2,
                    config.adam_epsilon);
        }
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_idx));
      }

      if (head_config.use_batchnorm) {
        update_running_stats(result.params, trace.bn_mean, trace.bn_var);
      }
    }

    result.log.push_back(
        {epoch, lr, epoch_loss / static_cast<double>(data.size())});
    if (sink && ((epoch + 1) % config.checkpoint_every == 0 ||
                 epoch == config.epochs - 1)) {
      sink(epoch, result.params);
    }
  }
  return result;
}

}  // namespace pronscore
