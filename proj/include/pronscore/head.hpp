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

#ifndef PRONSCORE_HEAD_HPP
#define PRONSCORE_HEAD_HPP

#include <cstdint>
#include <vector>

#include "pronscore/matrix.hpp"

namespace pronscore {

inline constexpr double kBatchnormEpsilon = 1e-5;
inline constexpr double kBatchnormMomentum = 0.1;
// Sigmoid outputs are kept strictly inside (0,1) so logs stay finite.
inline constexpr double kProbEpsilon = 1e-15;

// Architecture of the trainable scoring head: optional hidden linear layer
// (no bias, no activation), optional batch normalization over the feature
// dimension, then an affine map to one sigmoid unit per phone.
struct HeadConfig {
  int input_dim = 0;
  bool use_hidden = false;
  int hidden_dim = 0;  // required when use_hidden
  bool use_batchnorm = false;
  double dropout_rate = 0.4;
  int n_phones = 0;

  // Dimension entering the batchnorm/affine stage.
  int feature_dim() const { return use_hidden ? hidden_dim : input_dim; }
  void validate() const;  // throws ValidationError
};

struct HeadParams {
  Matrix hidden_w;  // hidden_dim x input_dim; empty unless use_hidden
  std::vector<double> bn_gamma;  // feature_dim; empty unless use_batchnorm
  std::vector<double> bn_beta;
  std::vector<double> bn_running_mean;
  std::vector<double> bn_running_var;
  Matrix w;                // n_phones x feature_dim
  std::vector<double> b;   // n_phones
};

enum class RunMode { kTrain, kEval };

// Everything the backward pass needs, cached by a train-mode forward.
struct ForwardTrace {
  RunMode mode = RunMode::kEval;
  Matrix input_dropped;    // batch after input dropout (train) or input copy
  Matrix input_mask;       // inverted-dropout scale factors (0 or 1/(1-rate))
  Matrix hidden_out;       // after hidden linear; empty unless use_hidden
  Matrix hidden_mask;      // second dropout scales; empty unless applied
  Matrix features;         // input to the batchnorm/affine stage
  std::vector<double> bn_mean;     // batch statistics (train mode)
  std::vector<double> bn_var;      // biased variance
  std::vector<double> bn_scale;    // 1 / sqrt(var + eps)
  Matrix bn_normalized;    // x-hat
  Matrix bn_out;           // gamma * x-hat + beta (or features when bn off)
  Matrix logits;
  Matrix probs;            // frames x n_phones, strictly inside (0,1)
};

struct HeadGrads {
  Matrix d_hidden_w;            // empty when hidden absent or frozen
  std::vector<double> d_bn_gamma;  // empty unless use_batchnorm
  std::vector<double> d_bn_beta;
  Matrix d_w;
  std::vector<double> d_b;
};

// Weights ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases 0, gamma 1,
// beta 0, running mean 0, running variance 1. Deterministic per seed.
HeadParams init_params(const HeadConfig& config, std::uint64_t seed);

// Pipeline: [input dropout]* -> [hidden linear] -> [dropout]* -> [batchnorm]
// -> affine -> sigmoid, where * = train mode with dropout_rate > 0 only and
// the second dropout exists only when the hidden layer does. Train-mode
// batchnorm uses batch statistics and requires >= 2 frames; eval mode uses
// running statistics, draws no randomness, and updates nothing.
ForwardTrace forward(const HeadConfig& config, const HeadParams& params,
                     const Matrix& batch, RunMode mode,
                     std::uint64_t dropout_seed);

// Analytic gradients for all unfrozen parameters given dL/dprobs. The trace
// must come from a train-mode forward on the same batch. When hidden_frozen,
// no hidden-layer gradient is produced.
HeadGrads backward(const HeadConfig& config, const HeadParams& params,
                   const ForwardTrace& trace, const Matrix& dprobs,
                   bool hidden_frozen);

// running <- (1 - momentum) * running + momentum * batch statistic.
void update_running_stats(HeadParams& params,
                          const std::vector<double>& batch_mean,
                          const std::vector<double>& batch_var,
                          double momentum = kBatchnormMomentum);

}  // namespace pronscore

#endif  // PRONSCORE_HEAD_HPP
