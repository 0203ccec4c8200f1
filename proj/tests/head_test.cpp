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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "pronscore/errors.hpp"
#include "pronscore/head.hpp"
#include "pronscore/rng.hpp"
#include "pronscore/trainer.hpp"

using namespace pronscore;

namespace {

Matrix random_batch(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = rng.normal();
  return m;
}

std::vector<FrameTarget> random_targets(Rng& rng, std::size_t rows,
                                        int n_phones) {
  std::vector<FrameTarget> targets;
  for (std::size_t t = 0; t < rows; ++t) {
    targets.push_back({t,
                       static_cast<int>(rng.below(
                           static_cast<std::uint64_t>(n_phones))),
                       rng.uniform() < 0.5 ? 0 : 1});
  }
  return targets;
}

double loss_of(const HeadConfig& config, const HeadParams& params,
               const Matrix& batch, const std::vector<FrameTarget>& targets,
               const LossSpec& spec, std::uint64_t dropout_seed) {
  const ForwardTrace trace =
      forward(config, params, batch, RunMode::kTrain, dropout_seed);
  return batch_loss(trace.probs, targets, spec).loss;
}

struct ParamView {
  std::string name;
  double* data;
  std::size_t size;
};

std::vector<ParamView> trainable_views(const HeadConfig& config,
                                       HeadParams& params) {
  std::vector<ParamView> views;
  if (config.use_hidden) {
    views.push_back(
        {"hidden_w", params.hidden_w.data().data(), params.hidden_w.size()});
  }
  if (config.use_batchnorm) {
    views.push_back(
        {"bn_gamma", params.bn_gamma.data(), params.bn_gamma.size()});
    views.push_back({"bn_beta", params.bn_beta.data(), params.bn_beta.size()});
  }
  views.push_back({"w", params.w.data().data(), params.w.size()});
  views.push_back({"b", params.b.data(), params.b.size()});
  return views;
}

const double* grad_for(const HeadConfig& config, const HeadGrads& grads,
                       const std::string& name) {
  if (name == "hidden_w") return grads.d_hidden_w.data().data();
  if (name == "bn_gamma") return grads.d_bn_gamma.data();
  if (name == "bn_beta") return grads.d_bn_beta.data();
  if (name == "w") return grads.d_w.data().data();
  return grads.d_b.data();
}

// Max relative error between analytic gradients and central finite
// differences over every trainable parameter.
double gradient_check(const HeadConfig& config, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, "grad-check-data"));
  const std::size_t rows = 6 + rng.below(8);
  const Matrix batch =
      random_batch(rng, rows, static_cast<std::size_t>(config.input_dim));
  const auto targets = random_targets(rng, rows, config.n_phones);
  LossSpec spec;
  const std::uint64_t dropout_seed = Rng::derive(seed, "grad-check-mask");

  HeadParams params = init_params(config, seed);
  const ForwardTrace trace =
      forward(config, params, batch, RunMode::kTrain, dropout_seed);
  const BatchLossResult loss = batch_loss(trace.probs, targets, spec);
  const HeadGrads grads = backward(config, params, trace, loss.dprobs,
                                   /*hidden_frozen=*/false);

  double worst = 0.0;
  for (const auto& view : trainable_views(config, params)) {
    const double* analytic = grad_for(config, grads, view.name);
    for (std::size_t i = 0; i < view.size; ++i) {
      const double saved = view.data[i];
      const double h = 1e-5 * std::max(1.0, std::abs(saved));
      view.data[i] = saved + h;
      const double up = loss_of(config, params, batch, targets, spec,
                                dropout_seed);
      view.data[i] = saved - h;
      const double down = loss_of(config, params, batch, targets, spec,
                                  dropout_seed);
      view.data[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(fd),
                                     1e-4});
      worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("initialization is seeded, bounded, and correctly shaped") {
  HeadConfig config;
  config.input_dim = 256;
  config.use_hidden = true;
  config.hidden_dim = 16;
  config.use_batchnorm = true;
  config.n_phones = 10;

  const HeadParams a = init_params(config, 5);
  const HeadParams b = init_params(config, 5);
  CHECK(a.hidden_w == b.hidden_w);
  CHECK(a.w == b.w);
  const HeadParams c = init_params(config, 6);
  CHECK_FALSE(a.hidden_w == c.hidden_w);

  REQUIRE(a.hidden_w.rows() == 16);
  REQUIRE(a.hidden_w.cols() == 256);
  REQUIRE(a.w.rows() == 10);
  REQUIRE(a.w.cols() == 16);
  REQUIRE(a.b.size() == 10);

  // Hidden weights: fan_in = 256 -> bound 1/16.
  double hidden_max = 0.0;
  for (double v : a.hidden_w.data()) {
    CHECK(std::abs(v) <= 0.0625);
    hidden_max = std::max(hidden_max, std::abs(v));
  }
  CHECK(hidden_max > 0.05);  // the range is actually used
  // Output weights: fan_in = hidden_dim = 16 -> bound 0.25.
  for (double v : a.w.data()) CHECK(std::abs(v) <= 0.25);

  for (double v : a.b) CHECK(v == 0.0);
  for (double v : a.bn_gamma) CHECK(v == 1.0);
  for (double v : a.bn_beta) CHECK(v == 0.0);
  for (double v : a.bn_running_mean) CHECK(v == 0.0);
  for (double v : a.bn_running_var) CHECK(v == 1.0);
  REQUIRE(a.bn_gamma.size() == 16);  // feature dimension, not input
}

TEST_CASE("analytic gradients match central finite differences") {
  // Eight flag combinations, cycled over distinct seeds and dimensions.
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 20; ++seed) {
    const int combo = static_cast<int>(seed % 8);
    HeadConfig config;
    Rng rng(Rng::derive(seed, "grad-check-dims"));
    config.input_dim = 3 + static_cast<int>(rng.below(4));
    config.use_hidden = (combo & 1) != 0;
    config.hidden_dim =
        config.use_hidden ? 2 + static_cast<int>(rng.below(3)) : 0;
    config.use_batchnorm = (combo & 2) != 0;
    config.dropout_rate = (combo & 4) != 0 ? 0.3 : 0.0;
    config.n_phones = 2 + static_cast<int>(rng.below(3));

    const double worst = gradient_check(config, seed);
    INFO("combo ", combo, " seed ", seed, " worst ", worst);
    CHECK(worst <= 1e-4);
    ++checked;
  }
}

TEST_CASE("frozen hidden layers produce no hidden gradient") {
  HeadConfig config;
  config.input_dim = 4;
  config.use_hidden = true;
  config.hidden_dim = 3;
  config.n_phones = 2;
  config.dropout_rate = 0.0;
  HeadParams params = init_params(config, 1);
  Rng rng(2);
  const Matrix batch = random_batch(rng, 5, 4);
  const auto targets = random_targets(rng, 5, 2);
  const ForwardTrace trace =
      forward(config, params, batch, RunMode::kTrain, 0);
  const BatchLossResult loss = batch_loss(trace.probs, targets, LossSpec{});
  const HeadGrads frozen = backward(config, params, trace, loss.dprobs, true);
  CHECK(frozen.d_hidden_w.empty());
  const HeadGrads live = backward(config, params, trace, loss.dprobs, false);
  CHECK_FALSE(live.d_hidden_w.empty());
  // Output-layer gradients are identical either way.
  CHECK(frozen.d_w == live.d_w);
}

TEST_CASE("eval-mode forward is pure and ignores dropout") {
  HeadConfig config;
  config.input_dim = 3;
  config.n_phones = 2;
  config.dropout_rate = 0.5;
  HeadParams params = init_params(config, 3);
  Rng rng(4);
  const Matrix batch = random_batch(rng, 4, 3);
  const ForwardTrace t1 = forward(config, params, batch, RunMode::kEval, 1);
  const ForwardTrace t2 = forward(config, params, batch, RunMode::kEval, 999);
  CHECK(t1.probs == t2.probs);  // dropout seed is irrelevant in eval mode
  CHECK(t1.input_dropped == batch);
  for (std::size_t i = 0; i < t1.probs.size(); ++i) {
    const double p = t1.probs.data()[i];
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("eval-mode batchnorm uses running statistics") {
  HeadConfig config;
  config.input_dim = 2;
  config.use_batchnorm = true;
  config.n_phones = 1;
  config.dropout_rate = 0.0;
  HeadParams params = init_params(config, 0);
  params.bn_running_mean = {1.0, -2.0};
  params.bn_running_var = {4.0, 0.25};
  params.bn_gamma = {2.0, 3.0};
  params.bn_beta = {0.5, -0.5};

  Matrix batch(1, 2);
  batch(0, 0) = 3.0;
  batch(0, 1) = -2.5;
  const ForwardTrace trace = forward(config, params, batch, RunMode::kEval, 0);
  const double xhat0 = (3.0 - 1.0) / std::sqrt(4.0 + kBatchnormEpsilon);
  const double xhat1 = (-2.5 + 2.0) / std::sqrt(0.25 + kBatchnormEpsilon);
  CHECK(trace.bn_out(0, 0) ==
        doctest::Approx(2.0 * xhat0 + 0.5).epsilon(1e-12));
  CHECK(trace.bn_out(0, 1) ==
        doctest::Approx(3.0 * xhat1 - 0.5).epsilon(1e-12));
}

TEST_CASE("train-mode batchnorm standardizes with biased batch statistics") {
  HeadConfig config;
  config.input_dim = 1;
  config.use_batchnorm = true;
  config.n_phones = 1;
  config.dropout_rate = 0.0;
  HeadParams params = init_params(config, 0);
  params.bn_gamma = {2.0};
  params.bn_beta = {0.5};

  Matrix batch(2, 1);
  batch(0, 0) = 1.0;
  batch(1, 0) = 3.0;
  const ForwardTrace trace =
      forward(config, params, batch, RunMode::kTrain, 0);
  REQUIRE(trace.bn_mean.size() == 1);
  CHECK(trace.bn_mean[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(trace.bn_var[0] == doctest::Approx(1.0).epsilon(1e-15));  // biased
  const double scale = 1.0 / std::sqrt(1.0 + kBatchnormEpsilon);
  CHECK(trace.bn_out(0, 0) ==
        doctest::Approx(2.0 * (-1.0 * scale) + 0.5).epsilon(1e-12));
  CHECK(trace.bn_out(1, 0) ==
        doctest::Approx(2.0 * (1.0 * scale) + 0.5).epsilon(1e-12));

  // Running statistics blend with momentum 0.1.
  update_running_stats(params, trace.bn_mean, trace.bn_var);
  CHECK(params.bn_running_mean[0] ==
        doctest::Approx(0.9 * 0.0 + 0.1 * 2.0).epsilon(1e-15));
  CHECK(params.bn_running_var[0] ==
        doctest::Approx(0.9 * 1.0 + 0.1 * 1.0).epsilon(1e-15));

  Matrix single(1, 1);
  CHECK_THROWS_AS(forward(config, params, single, RunMode::kTrain, 0),
                  ValidationError);
}

TEST_CASE("inverted dropout preserves activations in expectation") {
  HeadConfig config;
  config.input_dim = 4;
  config.n_phones = 1;
  config.dropout_rate = 0.4;
  const HeadParams params = init_params(config, 0);
  Matrix batch(1, 4, 1.0);

  double sum = 0.0;
  const int n_masks = 10000;
  for (int i = 0; i < n_masks; ++i) {
    const ForwardTrace trace = forward(
        config, params, batch, RunMode::kTrain,
        Rng::derive(123, "dropout-expectation", static_cast<std::uint64_t>(i)));
    for (std::size_t j = 0; j < 4; ++j) sum += trace.input_dropped(0, j);
  }
  const double mean = sum / (4.0 * n_masks);
  // sd of one inverted-dropout factor at rate 0.4 is sqrt(0.4/0.6).
  const double standard_error =
      std::sqrt(0.4 / 0.6) / std::sqrt(4.0 * n_masks);
  CHECK(std::abs(mean - 1.0) <= 3.0 * standard_error);
}

TEST_CASE("dropout masks scale by the inverse keep rate") {
  HeadConfig config;
  config.input_dim = 50;
  config.n_phones = 1;
  config.dropout_rate = 0.4;
  const HeadParams params = init_params(config, 0);
  Matrix batch(20, 50, 1.0);
  const ForwardTrace trace =
      forward(config, params, batch, RunMode::kTrain, 77);
  int zeros = 0;
  int scaled = 0;
  for (double v : trace.input_dropped.data()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      CHECK(v == doctest::Approx(1.0 / 0.6).epsilon(1e-12));
      ++scaled;
    }
  }
  CHECK(zeros > 0);
  CHECK(scaled > 0);
  // Roughly 40% dropped (binomial, 1000 draws).
  CHECK(zeros > 300);
  CHECK(zeros < 500);
}

TEST_CASE("head configuration is validated") {
  HeadConfig config;
  config.input_dim = 0;
  config.n_phones = 1;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config.input_dim = 4;
  config.n_phones = 0;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config.n_phones = 2;
  config.use_hidden = true;
  config.hidden_dim = 0;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config.hidden_dim = 3;
  config.dropout_rate = 1.0;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config.dropout_rate = 0.4;
  CHECK_NOTHROW(config.validate());
}
