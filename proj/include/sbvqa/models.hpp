// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0
//
// SpeechMod: conv stack over the raw scaled waveform -> LSTM -> dense,
// fused with a dense image branch by elementwise multiplication, then two
// dense layers into a softmax over the answer classes. TextMod swaps the
// conv stack for an embedding layer over token indices; everything else is
// shared. Blind variants drop the image branch.

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sbvqa/adam.hpp"
#include "sbvqa/autodiff.hpp"
#include "sbvqa/params.hpp"
#include "sbvqa/text.hpp"

namespace sbvqa {

struct ConvLayerSpec {
  std::size_t filters = 0;
  std::size_t length = 0;
  std::size_t stride = 2;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
};

struct PoolSpec {
  std::size_t size = 4;
  std::size_t stride = 4;
};

/// Five conv layers interleaved with four max-pool layers. The default
/// symmetric padding of (length - stride) / 2 per conv layer makes every
/// conv output floor(L / stride) and the whole stack floor(L / 8192).
struct ConvStackSpec {
  std::array<ConvLayerSpec, 5> conv;
  std::array<PoolSpec, 4> pool;

  static ConvStackSpec defaults();

  /// A narrow stack for gradient checks and small experiments; same
  /// stride/pool structure, filter counts (2, 2, 2, 2, 4).
  static ConvStackSpec toy(std::array<std::size_t, 5> filters = {2, 2, 2, 2, 4});

  std::size_t final_channels() const { return conv[4].filters; }

  /// Output sequence length for an input of len samples; 0 if too short.
  std::size_t output_frames(std::size_t len) const;

  /// Smallest input length producing at least one output frame.
  std::size_t min_input_len() const;

  /// Lengths after each of the nine layers (conv1, pool1, ..., conv5).
  std::vector<std::size_t> layer_output_lengths(std::size_t len) const;
};

struct SpeechModConfig {
  ConvStackSpec conv = ConvStackSpec::defaults();
  std::size_t lstm_hidden = 512;
  std::size_t image_dim = 4096;
  std::size_t fused_dim = 512;
  std::size_t hidden_dense = 1024;
  std::size_t num_answers = 1000;
  bool blind = false;
};

struct TextModConfig {
  std::size_t vocab_size = 0;  // excludes the reserved 0 index
  std::size_t embed_dim = 512;
  std::size_t lstm_hidden = 512;
  std::size_t image_dim = 4096;
  std::size_t fused_dim = 512;
  std::size_t hidden_dense = 1024;
  std::size_t num_answers = 1000;
  bool blind = false;
};

struct Prediction {
  Tensor probs;
  std::size_t answer_index = 0;
};

Prediction predict_from_logits(const Tensor& logits);

class SpeechMod {
 public:
  SpeechMod(SpeechModConfig config, std::uint64_t seed);

  /// scaled_samples in [-256, 256]; image_feat [image_dim] (ignored when
  /// blind). lang_override is a test hook replacing the language-branch
  /// dense output.
  TracedTensor forward_logits(Tape* tape, const std::vector<double>& scaled_samples,
                              const Tensor& image_feat,
                              const Tensor* lang_override = nullptr);
  Prediction predict(const std::vector<double>& scaled_samples, const Tensor& image_feat);

  ParameterSet& params() { return params_; }
  const SpeechModConfig& config() const { return config_; }

  static std::size_t parameter_count(const SpeechModConfig& config);

 private:
  SpeechModConfig config_;
  ParameterSet params_;
};

class TextMod {
 public:
  TextMod(TextModConfig config, std::uint64_t seed);

  /// indices use 0 for padding/OOV; at least one index must be nonzero.
  TracedTensor forward_logits(Tape* tape, const std::vector<int>& indices,
                              const Tensor& image_feat);
  Prediction predict(const std::vector<int>& indices, const Tensor& image_feat);

  ParameterSet& params() { return params_; }
  const TextModConfig& config() const { return config_; }

  static std::size_t parameter_count(const TextModConfig& config);

 private:
  TextModConfig config_;
  ParameterSet params_;
};

/// Uniform init in +-sqrt(6 / (fan_in + fan_out)).
void init_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

}  // namespace sbvqa
