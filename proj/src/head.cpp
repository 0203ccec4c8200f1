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

#include "pronscore/head.hpp"

#include <cmath>
#include <string>

#include "pronscore/errors.hpp"
#include "pronscore/rng.hpp"

namespace pronscore {

namespace {

// y = x * w^T for w with shape (out_dim x in_dim).
Matrix matmul_transposed(const Matrix& x, const Matrix& w) {
  Matrix y(x.rows(), w.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t o = 0; o < w.rows(); ++o) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols(); ++k) {
        acc += x(i, k) * w(o, k);
      }
      y(i, o) = acc;
    }
  }
  return y;
}

// Draws an inverted-dropout scale matrix: each entry is 0 with probability
// rate, otherwise 1/(1-rate).
Matrix draw_dropout_mask(std::size_t rows, std::size_t cols, double rate,
                         Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      mask(i, j) = rng.uniform() < rate ? 0.0 : keep_scale;
    }
  }
  return mask;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data()[i] = a.data()[i] * b.data()[i];
  }
  return out;
}

}  // namespace

void HeadConfig::validate() const {
  if (input_dim < 1) {
    throw ValidationError("head input_dim must be >= 1");
  }
  if (use_hidden && hidden_dim < 1) {
    throw ValidationError("head hidden_dim must be >= 1 when the hidden "
                          "layer is enabled");
  }
  if (n_phones < 1) {
    throw ValidationError("head n_phones must be >= 1");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ValidationError("dropout_rate must be in [0, 1)");
  }
}

HeadParams init_params(const HeadConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(Rng::derive(seed, "head-init"));
  HeadParams params;
  if (config.use_hidden) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(config.input_dim));
    params.hidden_w = Matrix(config.hidden_dim, config.input_dim);
    for (std::size_t i = 0; i < params.hidden_w.size(); ++i) {
      params.hidden_w.data()[i] = rng.uniform(-bound, bound);
    }
  }
  const std::size_t d_f = static_cast<std::size_t>(config.feature_dim());
  if (config.use_batchnorm) {
    params.bn_gamma.assign(d_f, 1.0);
    params.bn_beta.assign(d_f, 0.0);
    params.bn_running_mean.assign(d_f, 0.0);
    params.bn_running_var.assign(d_f, 1.0);
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_f));
  params.w = Matrix(config.n_phones, d_f);
  for (std::size_t i = 0; i < params.w.size(); ++i) {
    params.w.data()[i] = rng.uniform(-bound, bound);
  }
  params.b.assign(static_cast<std::size_t>(config.n_phones), 0.0);
  return params;
}

ForwardTrace forward(const HeadConfig& config, const HeadParams& params,
                     const Matrix& batch, RunMode mode,
                     std::uint64_t dropout_seed) {
  config.validate();
  if (batch.cols() != static_cast<std::size_t>(config.input_dim)) {
    throw ValidationError("batch dimension " + std::to_string(batch.cols()) +
                          " does not match head input_dim " +
                          std::to_string(config.input_dim));
  }
  const bool train = mode == RunMode::kTrain;
  if (train && config.use_batchnorm && batch.rows() < 2) {
    throw ValidationError("train-mode batchnorm needs a batch of >= 2 "
                          "frames, got " + std::to_string(batch.rows()));
  }

  ForwardTrace trace;
  trace.mode = mode;
  const bool dropout_active = train && config.dropout_rate > 0.0;
  Rng rng(dropout_seed);

  if (dropout_active) {
    trace.input_mask = draw_dropout_mask(batch.rows(), batch.cols(),
                                         config.dropout_rate, rng);
    trace.input_dropped = hadamard(batch, trace.input_mask);
  } else {
    trace.input_dropped = batch;
  }

  if (config.use_hidden) {
    trace.hidden_out = matmul_transposed(trace.input_dropped, params.hidden_w);
    if (dropout_active) {
      trace.hidden_mask = draw_dropout_mask(
          trace.hidden_out.rows(), trace.hidden_out.cols(),
          config.dropout_rate, rng);
      trace.features = hadamard(trace.hidden_out, trace.hidden_mask);
    } else {
      trace.features = trace.hidden_out;
    }
  } else {
    trace.features = trace.input_dropped;
  }

  const std::size_t m = trace.features.rows();
  const std::size_t d_f = trace.features.cols();
  if (config.use_batchnorm) {
    trace.bn_normalized = Matrix(m, d_f);
    trace.bn_out = Matrix(m, d_f);
    trace.bn_scale.assign(d_f, 0.0);
    if (train) {
      trace.bn_mean.assign(d_f, 0.0);
      trace.bn_var.assign(d_f, 0.0);
      for (std::size_t j = 0; j < d_f; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += trace.features(i, j);
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double d = trace.features(i, j) - mean;
          var += d * d;
        }
        var /= static_cast<double>(m);  // biased, matching normalization
        trace.bn_mean[j] = mean;
        trace.bn_var[j] = var;
      }
    } else {
      trace.bn_mean = params.bn_running_mean;
      trace.bn_var = params.bn_running_var;
    }
    for (std::size_t j = 0; j < d_f; ++j) {
      trace.bn_scale[j] = 1.0 / std::sqrt(trace.bn_var[j] + kBatchnormEpsilon);
      for (std::size_t i = 0; i < m; ++i) {
        const double x_hat =
            (trace.features(i, j) - trace.bn_mean[j]) * trace.bn_scale[j];
        trace.bn_normalized(i, j) = x_hat;
        trace.bn_out(i, j) = params.bn_gamma[j] * x_hat + params.bn_beta[j];
      }
    }
  } else {
    trace.bn_out = trace.features;
  }

  trace.logits = matmul_transposed(trace.bn_out, params.w);
  trace.probs = Matrix(m, static_cast<std::size_t>(config.n_phones));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < trace.probs.cols(); ++p) {
      const double z = trace.logits(i, p) + params.b[p];
      trace.logits(i, p) = z;
      double prob = 1.0 / (1.0 + std::exp(-z));
      if (prob < kProbEpsilon) prob = kProbEpsilon;
      if (prob > 1.0 - kProbEpsilon) prob = 1.0 - kProbEpsilon;
      trace.probs(i, p) = prob;
    }
  }
  return trace;
}

HeadGrads backward(const HeadConfig& config, const HeadParams& params,
                   const ForwardTrace& trace, const Matrix& dprobs,
                   bool hidden_frozen) {
  if (trace.mode != RunMode::kTrain) {
    throw ValidationError("backward requires a train-mode forward trace");
  }
  if (dprobs.rows() != trace.probs.rows() ||
      dprobs.cols() != trace.probs.cols()) {
    throw ValidationError("gradient shape does not match the forward trace");
  }
  const std::size_t m = trace.probs.rows();
  const std::size_t n_phones = trace.probs.cols();
  const std::size_t d_f = trace.bn_out.cols();

  // Through the sigmoid: dL/dz = dL/dprob * prob * (1 - prob).
  Matrix dlogits(m, n_phones);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < n_phones; ++p) {
      const double prob = trace.probs(i, p);
      dlogits(i, p) = dprobs(i, p) * prob * (1.0 - prob);
    }
  }

  HeadGrads grads;
  grads.d_w = Matrix(n_phones, d_f);
  grads.d_b.assign(n_phones, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < n_phones; ++p) {
      const double g = dlogits(i, p);
      if (g == 0.0) continue;
      grads.d_b[p] += g;
      for (std::size_t j = 0; j < d_f; ++j) {
        grads.d_w(p, j) += g * trace.bn_out(i, j);
      }
    }
  }

  // dL/d(bn_out).
  Matrix d_bn_out(m, d_f);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < n_phones; ++p) {
      const double g = dlogits(i, p);
      if (g == 0.0) continue;
      for (std::size_t j = 0; j < d_f; ++j) {
        d_bn_out(i, j) += g * params.w(p, j);
      }
    }
  }

  Matrix d_features;
  if (config.use_batchnorm) {
    grads.d_bn_gamma.assign(d_f, 0.0);
    grads.d_bn_beta.assign(d_f, 0.0);
    d_features = Matrix(m, d_f);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t j = 0; j < d_f; ++j) {
      double sum_dy = 0.0;       // sum of dL/dx_hat over the batch
      double sum_dy_xhat = 0.0;  // sum of dL/dx_hat * x_hat
      for (std::size_t i = 0; i < m; ++i) {
        const double x_hat = trace.bn_normalized(i, j);
        const double g = d_bn_out(i, j);
        grads.d_bn_gamma[j] += g * x_hat;
        grads.d_bn_beta[j] += g;
        const double dy = g * params.bn_gamma[j];
        sum_dy += dy;
        sum_dy_xhat += dy * x_hat;
      }
      const double mean_dy = sum_dy * inv_m;
      const double mean_dy_xhat = sum_dy_xhat * inv_m;
      for (std::size_t i = 0; i < m; ++i) {
        const double dy = d_bn_out(i, j) * params.bn_gamma[j];
        d_features(i, j) = trace.bn_scale[j] *
                           (dy - mean_dy -
                            trace.bn_normalized(i, j) * mean_dy_xhat);
      }
    }
  } else {
    d_features = std::move(d_bn_out);
  }

  if (config.use_hidden && !hidden_frozen) {
    // Through the second dropout back to the hidden layer's raw output.
    Matrix d_hidden = trace.hidden_mask.empty()
                          ? std::move(d_features)
                          : hadamard(d_features, trace.hidden_mask);
    // hidden_out = input_dropped * hidden_w^T, so
    // d_hidden_w = d_hidden^T * input_dropped.
    grads.d_hidden_w = Matrix(params.hidden_w.rows(), params.hidden_w.cols());
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t h = 0; h < grads.d_hidden_w.rows(); ++h) {
        const double g = d_hidden(i, h);
        if (g == 0.0) continue;
        for (std::size_t k = 0; k < grads.d_hidden_w.cols(); ++k) {
          grads.d_hidden_w(h, k) += g * trace.input_dropped(i, k);
        }
      }
    }
  }
  return grads;
}

void update_running_stats(HeadParams& params,
                          const std::vector<double>& batch_mean,
                          const std::vector<double>& batch_var,
                          double momentum) {
  if (batch_mean.size() != params.bn_running_mean.size() ||
      batch_var.size() != params.bn_running_var.size()) {
    throw ValidationError("batch statistic size does not match the "
                          "batchnorm parameters");
  }
  for (std::size_t j = 0; j < batch_mean.size(); ++j) {
    params.bn_running_mean[j] =
        (1.0 - momentum) * params.bn_running_mean[j] + momentum * batch_mean[j];
    params.bn_running_var[j] =
        (1.0 - momentum) * params.bn_running_var[j] + momentum * batch_var[j];
  }
}

}  // namespace pronscore
