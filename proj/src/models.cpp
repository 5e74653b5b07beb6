// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbvqa/models.hpp"

#include <algorithm>
#include <cmath>

namespace sbvqa {

ConvStackSpec ConvStackSpec::defaults() {
  ConvStackSpec spec;
  const std::size_t filters[5] = {32, 64, 128, 256, 512};
  const std::size_t lengths[5] = {64, 32, 16, 8, 4};
  for (std::size_t i = 0; i < 5; ++i) {
    spec.conv[i].filters = filters[i];
    spec.conv[i].length = lengths[i];
    spec.conv[i].stride = 2;
    spec.conv[i].pad_left = spec.conv[i].pad_right = (lengths[i] - 2) / 2;
  }
  for (auto& p : spec.pool) p = PoolSpec{4, 4};
  return spec;
}

ConvStackSpec ConvStackSpec::toy(std::array<std::size_t, 5> filters) {
  ConvStackSpec spec = defaults();
  const std::size_t lengths[5] = {16, 8, 8, 4, 4};
  for (std::size_t i = 0; i < 5; ++i) {
    spec.conv[i].filters = filters[i];
    spec.conv[i].length = lengths[i];
    spec.conv[i].pad_left = spec.conv[i].pad_right = (lengths[i] - 2) / 2;
  }
  return spec;
}

std::vector<std::size_t> ConvStackSpec::layer_output_lengths(std::size_t len) const {
  std::vector<std::size_t> out;
  std::size_t l = len;
  for (std::size_t i = 0; i < 5; ++i) {
    const ConvLayerSpec& c = conv[i];
    const std::size_t padded = l + c.pad_left + c.pad_right;
    if (padded < c.length) return out;
    l = (padded - c.length) / c.stride + 1;
    out.push_back(l);
    if (i < 4) {
      const PoolSpec& p = pool[i];
      if (l < p.size) return out;
      l = (l - p.size) / p.stride + 1;
      out.push_back(l);
    }
  }
  return out;
}

std::size_t ConvStackSpec::output_frames(std::size_t len) const {
  const auto lengths = layer_output_lengths(len);
  return lengths.size() == 9 ? lengths.back() : 0;
}

std::size_t ConvStackSpec::min_input_len() const {
  // Strides are small so a forward scan is cheap enough.
  std::size_t lo = 1;
  while (output_frames(lo) < 1) {
    ++lo;
    if (lo > (1u << 24)) throw TensorError("conv stack admits no valid input length");
  }
  return lo;
}

void init_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.data) v = dist(rng);
}

namespace {

// Parameters shared by both models from the LSTM output onward.
void add_head_params(ParameterSet& params, std::size_t lstm_hidden, std::size_t image_dim,
                     std::size_t fused_dim, std::size_t hidden_dense, std::size_t num_answers,
                     bool blind, std::mt19937_64& rng) {
  auto dense_pair = [&](const std::string& name, std::size_t in, std::size_t out) {
    Tensor w({in, out});
    init_uniform(w, in, out, rng);
    params.add(name + ".weight", std::move(w));
    params.add(name + ".bias", Tensor({out}, 0.0));
  };
  dense_pair("lang_dense", lstm_hidden, fused_dim);
  if (!blind) dense_pair("img_dense", image_dim, fused_dim);
  dense_pair("hidden", fused_dim, hidden_dense);
  dense_pair("out", hidden_dense, num_answers);
}

void add_lstm_params(ParameterSet& params, std::size_t input_dim, std::size_t hidden,
                     std::mt19937_64& rng) {
  Tensor w_in({input_dim, 4 * hidden});
  init_uniform(w_in, input_dim, 4 * hidden, rng);
  params.add("lstm.w_in", std::move(w_in));
  Tensor w_rec({hidden, 4 * hidden});
  init_uniform(w_rec, hidden, 4 * hidden, rng);
  params.add("lstm.w_rec", std::move(w_rec));
  Tensor bias({4 * hidden}, 0.0);
  for (std::size_t j = 0; j < hidden; ++j) bias[hidden + j] = 1.0;  // forget gate
  params.add("lstm.bias", std::move(bias));
}

LstmParams lstm_of(ParameterSet& params) {
  return {*params.find("lstm.w_in"), *params.find("lstm.w_rec"), *params.find("lstm.bias")};
}

TracedTensor fusion_head(Tape* tape, ParameterSet& params, const TracedTensor& lstm_out,
                         const Tensor& image_feat, bool blind,
                         const Tensor* lang_override) {
  TracedTensor lang = dense(tape, lstm_out, *params.find("lang_dense.weight"),
                            *params.find("lang_dense.bias"), Activation::kTanh);
  if (lang_override) lang = TracedTensor::from(*lang_override);

  TracedTensor fused = lang;
  if (!blind) {
    if (!image_feat.all_finite()) throw TensorError("image feature contains NaN/Inf");
    TracedTensor img_in = TracedTensor::from(image_feat);
    TracedTensor img = dense(tape, img_in, *params.find("img_dense.weight"),
                             *params.find("img_dense.bias"), Activation::kTanh);
    fused = elementwise_mul(tape, lang, img);
  }
  TracedTensor hidden = dense(tape, fused, *params.find("hidden.weight"),
                              *params.find("hidden.bias"), Activation::kTanh);
  return dense(tape, hidden, *params.find("out.weight"), *params.find("out.bias"),
               Activation::kIdentity);
}

std::size_t head_count(std::size_t lstm_hidden, std::size_t image_dim, std::size_t fused_dim,
                       std::size_t hidden_dense, std::size_t num_answers, bool blind) {
  std::size_t n = lstm_hidden * fused_dim + fused_dim;
  if (!blind) n += image_dim * fused_dim + fused_dim;
  n += fused_dim * hidden_dense + hidden_dense;
  n += hidden_dense * num_answers + num_answers;
  return n;
}

std::size_t lstm_count(std::size_t input_dim, std::size_t hidden) {
  return input_dim * 4 * hidden + hidden * 4 * hidden + 4 * hidden;
}

}  // namespace

Prediction predict_from_logits(const Tensor& logits) {
  Prediction p;
  p.probs = softmax(logits);
  p.answer_index = static_cast<std::size_t>(
      std::max_element(p.probs.data.begin(), p.probs.data.end()) - p.probs.data.begin());
  return p;
}

SpeechMod::SpeechMod(SpeechModConfig config, std::uint64_t seed) : config_(config) {
  std::mt19937_64 rng(seed);
  std::size_t cin = 1;
  for (std::size_t i = 0; i < 5; ++i) {
    const ConvLayerSpec& c = config_.conv.conv[i];
    Tensor w({c.length, cin, c.filters});
    init_uniform(w, c.length * cin, c.length * c.filters, rng);
    const std::string name = "conv" + std::to_string(i + 1);
    params_.add(name + ".weight", std::move(w));
    params_.add(name + ".bias", Tensor({c.filters}, 0.0));
    cin = c.filters;
  }
  add_lstm_params(params_, config_.conv.final_channels(), config_.lstm_hidden, rng);
  add_head_params(params_, config_.lstm_hidden, config_.image_dim, config_.fused_dim,
                  config_.hidden_dense, config_.num_answers, config_.blind, rng);
}

TracedTensor SpeechMod::forward_logits(Tape* tape, const std::vector<double>& scaled_samples,
                                       const Tensor& image_feat,
                                       const Tensor* lang_override) {
  const std::size_t len = scaled_samples.size();
  if (config_.conv.output_frames(len) < 1)
    throw TensorError("waveform of " + std::to_string(len) +
                      " samples is shorter than one conv-stack output frame (min " +
                      std::to_string(config_.conv.min_input_len()) + ")");

  TracedTensor x = TracedTensor::from(Tensor({len, 1}, scaled_samples));
  for (std::size_t i = 0; i < 5; ++i) {
    const ConvLayerSpec& c = config_.conv.conv[i];
    const std::string name = "conv" + std::to_string(i + 1);
    x = conv1d(tape, x, *params_.find(name + ".weight"), *params_.find(name + ".bias"),
               c.stride, c.pad_left, c.pad_right);
    x = relu(tape, x);
    if (i < 4) x = maxpool1d(tape, x, config_.conv.pool[i].size, config_.conv.pool[i].stride);
  }
  TracedTensor encoded = lstm_encode(tape, x, nullptr, lstm_of(params_));
  return fusion_head(tape, params_, encoded, image_feat, config_.blind, lang_override);
}

Prediction SpeechMod::predict(const std::vector<double>& scaled_samples,
                              const Tensor& image_feat) {
  return predict_from_logits(*forward_logits(nullptr, scaled_samples, image_feat).value);
}

std::size_t SpeechMod::parameter_count(const SpeechModConfig& config) {
  std::size_t n = 0, cin = 1;
  for (const auto& c : config.conv.conv) {
    n += c.length * cin * c.filters + c.filters;
    cin = c.filters;
  }
  n += lstm_count(config.conv.final_channels(), config.lstm_hidden);
  n += head_count(config.lstm_hidden, config.image_dim, config.fused_dim, config.hidden_dense,
                  config.num_answers, config.blind);
  return n;
}

TextMod::TextMod(TextModConfig config, std::uint64_t seed) : config_(config) {
  if (config_.vocab_size < 1) throw TensorError("TextMod requires a non-empty vocabulary");
  std::mt19937_64 rng(seed);
  // Row 0 is the padding/OOV slot; it is masked out of the encoder so its
  // value never reaches the model output.
  Tensor table({config_.vocab_size + 1, config_.embed_dim});
  init_uniform(table, config_.vocab_size + 1, config_.embed_dim, rng);
  params_.add("embedding.table", std::move(table));
  add_lstm_params(params_, config_.embed_dim, config_.lstm_hidden, rng);
  add_head_params(params_, config_.lstm_hidden, config_.image_dim, config_.fused_dim,
                  config_.hidden_dense, config_.num_answers, config_.blind, rng);
}

TracedTensor TextMod::forward_logits(Tape* tape, const std::vector<int>& indices,
                                     const Tensor& image_feat) {
  std::vector<bool> mask;
  TracedTensor embedded = embedding_lookup(tape, indices, *params_.find("embedding.table"),
                                           &mask);
  TracedTensor encoded = lstm_encode(tape, embedded, &mask, lstm_of(params_));
  return fusion_head(tape, params_, encoded, image_feat, config_.blind, nullptr);
}

Prediction TextMod::predict(const std::vector<int>& indices, const Tensor& image_feat) {
  return predict_from_logits(*forward_logits(nullptr, indices, image_feat).value);
}

std::size_t TextMod::parameter_count(const TextModConfig& config) {
  std::size_t n = (config.vocab_size + 1) * config.embed_dim;
  n += lstm_count(config.embed_dim, config.lstm_hidden);
  n += head_count(config.lstm_hidden, config.image_dim, config.fused_dim, config.hidden_dense,
                  config.num_answers, config.blind);
  return n;
}

}  // namespace sbvqa
