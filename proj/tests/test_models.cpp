// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "sbvqa/models.hpp"

using namespace sbvqa;

namespace {

SpeechModConfig toy_speech_config() {
  SpeechModConfig cfg;
  cfg.conv = ConvStackSpec::toy();
  cfg.lstm_hidden = 8;
  cfg.image_dim = 8;
  cfg.fused_dim = 8;
  cfg.hidden_dense = 8;
  cfg.num_answers = 3;
  return cfg;
}

TextModConfig toy_text_config() {
  TextModConfig cfg;
  cfg.vocab_size = 5;
  cfg.embed_dim = 4;
  cfg.lstm_hidden = 8;
  cfg.image_dim = 8;
  cfg.fused_dim = 8;
  cfg.hidden_dense = 8;
  cfg.num_answers = 3;
  return cfg;
}

Tensor random_feature(std::size_t dim, std::mt19937_64& rng) {
  Tensor t({dim});
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

std::vector<double> random_audio(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> a(n);
  std::uniform_real_distribution<double> dist(-256.0, 256.0);
  for (auto& v : a) v = dist(rng);
  return a;
}

}  // namespace

TEST_CASE("conv stack reproduces the published per-layer output lengths") {
  const ConvStackSpec spec = ConvStackSpec::defaults();
  CHECK(spec.layer_output_lengths(32000) ==
        std::vector<std::size_t>{16000, 4000, 2000, 500, 250, 62, 31, 7, 3});
  CHECK(spec.output_frames(107360) == 13);
  CHECK(spec.output_frames(10080) == 1);
  CHECK(spec.final_channels() == 512);
  CHECK(spec.min_input_len() == 8192);
  CHECK(spec.output_frames(8191) == 0);
}

TEST_CASE("default conv layer parameters match the published table") {
  const ConvStackSpec spec = ConvStackSpec::defaults();
  const std::size_t filters[5] = {32, 64, 128, 256, 512};
  const std::size_t lengths[5] = {64, 32, 16, 8, 4};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(spec.conv[i].filters == filters[i]);
    CHECK(spec.conv[i].length == lengths[i]);
    CHECK(spec.conv[i].stride == 2);
  }
  for (const auto& p : spec.pool) {
    CHECK(p.size == 4);
    CHECK(p.stride == 4);
  }
}

TEST_CASE("parameter counts match the closed-form formulas") {
  SpeechModConfig def;
  SpeechMod model(def, 1);
  CHECK(model.params().scalar_count() == SpeechMod::parameter_count(def));
  // conv1: 64-tap mono kernel x 32 filters + 32 biases.
  CHECK(model.params().find("conv1.weight")->value->numel() == 64 * 1 * 32);
  CHECK(model.params().find("conv1.bias")->value->numel() == 32);
  CHECK(model.params().find("lstm.w_in")->value->shape ==
        std::vector<std::size_t>{512, 2048});

  const SpeechModConfig toy = toy_speech_config();
  SpeechMod toy_model(toy, 1);
  CHECK(toy_model.params().scalar_count() == SpeechMod::parameter_count(toy));
  CHECK(SpeechMod::parameter_count(toy) <= 5000);

  const TextModConfig tcfg = toy_text_config();
  TextMod text(tcfg, 1);
  CHECK(text.params().scalar_count() == TextMod::parameter_count(tcfg));
  CHECK(TextMod::parameter_count(tcfg) <= 5000);
  CHECK(text.params().find("embedding.table")->value->shape ==
        std::vector<std::size_t>{6, 4});  // vocab + reserved row 0
}

TEST_CASE("blind configs drop the image-branch parameters") {
  SpeechModConfig cfg = toy_speech_config();
  cfg.blind = true;
  SpeechMod model(cfg, 1);
  CHECK(model.params().find("img_dense.weight") == nullptr);
  CHECK(SpeechMod::parameter_count(cfg) <
        SpeechMod::parameter_count(toy_speech_config()));
}

TEST_CASE("lstm forget-gate bias initializes to one") {
  SpeechMod model(toy_speech_config(), 3);
  const Tensor& bias = *model.params().find("lstm.bias")->value;
  const std::size_t h = 8;
  for (std::size_t j = 0; j < h; ++j) {
    CHECK(bias[j] == 0.0);            // input gate
    CHECK(bias[h + j] == 1.0);        // forget gate
    CHECK(bias[2 * h + j] == 0.0);    // candidate
    CHECK(bias[3 * h + j] == 0.0);    // output gate
  }
}

TEST_CASE("same seed gives bit-identical models and logits") {
  std::mt19937_64 rng(8);
  const auto audio = random_audio(8192, rng);
  const Tensor feat = random_feature(8, rng);
  SpeechMod a(toy_speech_config(), 42), b(toy_speech_config(), 42);
  const TracedTensor la = a.forward_logits(nullptr, audio, feat);
  const TracedTensor lb = b.forward_logits(nullptr, audio, feat);
  CHECK(la.value->data == lb.value->data);

  SpeechMod c(toy_speech_config(), 43);
  CHECK(c.forward_logits(nullptr, audio, feat).value->data != la.value->data);
}

TEST_CASE("too-short waveforms are rejected with the minimum length named") {
  SpeechMod model(toy_speech_config(), 1);
  std::mt19937_64 rng(9);
  const auto audio = random_audio(100, rng);
  CHECK_THROWS_WITH_AS(
      model.forward_logits(nullptr, audio, random_feature(8, rng)),
      doctest::Contains("8192"), TensorError);
}

TEST_CASE("non-finite image features are rejected") {
  SpeechMod model(toy_speech_config(), 1);
  std::mt19937_64 rng(10);
  Tensor feat = random_feature(8, rng);
  feat[3] = std::nan("");
  CHECK_THROWS_AS(model.forward_logits(nullptr, random_audio(8192, rng), feat),
                  TensorError);
}

TEST_CASE("text logits are bit-identical under appended zero padding") {
  TextMod model(toy_text_config(), 7);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> indices;
    const std::size_t len = 1 + rng() % 6;
    for (std::size_t i = 0; i < len; ++i) indices.push_back(1 + rng() % 5);
    const Tensor feat = random_feature(8, rng);

    const TracedTensor base = model.forward_logits(nullptr, indices, feat);
    std::vector<int> padded = indices;
    padded.insert(padded.end(), 1 + rng() % 8, 0);
    const TracedTensor same = model.forward_logits(nullptr, padded, feat);
    CHECK(base.value->data == same.value->data);
  }
}

TEST_CASE("blind models are literally constant in the image feature") {
  TextModConfig tcfg = toy_text_config();
  tcfg.blind = true;
  TextMod text(tcfg, 5);
  SpeechModConfig scfg = toy_speech_config();
  scfg.blind = true;
  SpeechMod speech(scfg, 5);

  std::mt19937_64 rng(12);
  const std::vector<int> indices{1, 3, 2};
  const auto audio = random_audio(8192, rng);
  const auto text_ref = text.forward_logits(nullptr, indices, random_feature(8, rng));
  const auto speech_ref = speech.forward_logits(nullptr, audio, random_feature(8, rng));
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor feat = random_feature(8, rng);
    CHECK(text.forward_logits(nullptr, indices, feat).value->data == text_ref.value->data);
    CHECK(speech.forward_logits(nullptr, audio, feat).value->data ==
          speech_ref.value->data);
  }
}

TEST_CASE("language-branch override hook replaces the fused input") {
  SpeechMod model(toy_speech_config(), 2);
  std::mt19937_64 rng(13);
  const auto audio = random_audio(8192, rng);
  const Tensor feat = random_feature(8, rng);
  Tensor override_a({8}, 0.5);
  Tensor override_b({8}, -0.5);
  const auto la = model.forward_logits(nullptr, audio, feat, &override_a);
  const auto lb = model.forward_logits(nullptr, audio, feat, &override_b);
  CHECK(la.value->data != lb.value->data);
  // With the override in place the audio itself no longer matters.
  const auto lc = model.forward_logits(nullptr, random_audio(8192, rng), feat, &override_a);
  CHECK(la.value->data == lc.value->data);
}

TEST_CASE("full-model gradients match finite differences at toy size") {
  // A quick two-seed version of the acceptance-level sweep.
  for (std::uint64_t seed : {1ull, 2ull}) {
    std::mt19937_64 rng(seed);
    TextMod model(toy_text_config(), seed);
    const std::vector<int> indices{2, 4, 1, 0};
    const Tensor feat = random_feature(8, rng);

    auto loss_value = [&]() {
      Tape tape;
      return softmax_xent(&tape, model.forward_logits(&tape, indices, feat), 1)
          .loss.value->data[0];
    };

    Tape tape;
    SoftmaxXent sx = softmax_xent(&tape, model.forward_logits(&tape, indices, feat), 1);
    model.params().zero_grad();
    tape.backward(sx.loss);

    const double h = 1e-5;
    double worst = 0.0;
    for (auto& p : model.params()) {
      Tensor& v = *p.tensor.value;
      for (std::size_t i = 0; i < v.numel(); ++i) {
        const double keep = v[i];
        v[i] = keep + h;
        const double lp = loss_value();
        v[i] = keep - h;
        const double lm = loss_value();
        v[i] = keep;
        const double fd = (lp - lm) / (2.0 * h);
        const double g = p.tensor.grad->data[i];
        worst = std::max(worst,
                         std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-5}));
      }
    }
    CHECK(worst < 1e-4);
  }
}
