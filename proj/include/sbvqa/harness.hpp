// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sbvqa/adam.hpp"
#include "sbvqa/audio.hpp"
#include "sbvqa/dataset.hpp"
#include "sbvqa/models.hpp"
#include "sbvqa/text.hpp"

namespace sbvqa {

class HarnessError : public std::runtime_error {
 public:
  explicit HarnessError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  std::string out_dir;               // empty: no files written
  /// When in (0, 1], training stops at the first epoch whose full-pass
  /// training accuracy reaches the target.
  double target_train_accuracy = 0.0;
};

/// One prepared model input: exactly one of audio/indices is populated,
/// depending on the model kind.
struct SampleInput {
  std::vector<double> audio;  // scaled samples, [-256, 256]
  std::vector<int> indices;   // token indices, 0 = padding/OOV
  Tensor image_feat;
  std::size_t label = 0;  // answer class, used by training only
};

/// Uniform surface the harness drives; SpeechMod and TextMod plug in via
/// the adapters below, tests may substitute stubs.
class VqaModelAdapter {
 public:
  virtual ~VqaModelAdapter() = default;
  virtual TracedTensor forward_logits(Tape* tape, const SampleInput& input) = 0;
  virtual Prediction predict(const SampleInput& input) = 0;
  virtual ParameterSet& params() = 0;
  /// Batch-level input normalization (speech pads audio to equal length).
  virtual void prepare_batch(std::vector<SampleInput>& batch) { (void)batch; }
};

class SpeechAdapter : public VqaModelAdapter {
 public:
  explicit SpeechAdapter(SpeechMod& model) : model_(model) {}
  TracedTensor forward_logits(Tape* tape, const SampleInput& input) override {
    return model_.forward_logits(tape, input.audio, input.image_feat);
  }
  Prediction predict(const SampleInput& input) override {
    return model_.predict(input.audio, input.image_feat);
  }
  ParameterSet& params() override { return model_.params(); }
  void prepare_batch(std::vector<SampleInput>& batch) override;

 private:
  SpeechMod& model_;
};

class TextAdapter : public VqaModelAdapter {
 public:
  explicit TextAdapter(TextMod& model) : model_(model) {}
  TracedTensor forward_logits(Tape* tape, const SampleInput& input) override {
    return model_.forward_logits(tape, input.indices, input.image_feat);
  }
  Prediction predict(const SampleInput& input) override {
    return model_.predict(input.indices, input.image_feat);
  }
  ParameterSet& params() override { return model_.params(); }

 private:
  TextMod& model_;
};

struct TrainResult {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;  // within-epoch, pre-update predictions
  std::size_t epochs_run = 0;
  double final_train_accuracy = 0.0;  // clean pass, only when a target is set
  std::string final_checkpoint;
  std::string best_checkpoint;
  double best_selection_accuracy = -1.0;
};

/// Seeded, reproducible training; per-epoch mean loss logged; NaN loss
/// aborts with a state dump. selection, when given, scores a checkpoint
/// and drives best-model tracking.
TrainResult train(VqaModelAdapter& model, const std::vector<SampleInput>& samples,
                  const TrainConfig& cfg,
                  const std::function<double(VqaModelAdapter&)>* selection = nullptr);

enum class AccuracyMode { kExact, kConsensus };

/// exact: 1 if predicted equals the primary answer. consensus:
/// min(matching answers / 3, 1).
double accuracy(const std::string& predicted, const std::vector<std::string>& answers,
                AccuracyMode mode);

struct EvalReport {
  std::string model_name;
  std::string split;
  double noise_level = 0.0;
  double all = 0.0, yes_no = 0.0, number = 0.0, other = 0.0;
  std::size_t n_all = 0, n_yes_no = 0, n_number = 0, n_other = 0;
  std::size_t missing = 0;  // inputs that could not be prepared, scored 0

  std::string to_json() const;
};

/// Returns an input for one question, or nullopt when the question cannot
/// be served at this noise level (counted and scored 0 by evaluate).
using SamplePreparer = std::function<std::optional<SampleInput>(const QuestionRecord&)>;

SamplePreparer make_speech_preparer(const std::string& audio_dir, const FeatureStore& store,
                                    double noise_level);
/// use_original_text serves the manifest question text (the OQ row);
/// otherwise the transcriber supplies text for (question, level).
SamplePreparer make_text_preparer(const Transcriber* transcriber, const Vocabulary& vocab,
                                  std::size_t max_len, const FeatureStore& store,
                                  double noise_level, bool use_original_text);

/// Labels each prepared record via the answer vocabulary; records whose
/// primary answer is outside the vocabulary are rejected.
std::vector<SampleInput> prepare_training_samples(const std::vector<QuestionRecord>& records,
                                                  const AnswerVocabulary& vocab,
                                                  const SamplePreparer& prepare);

EvalReport evaluate(VqaModelAdapter& model, const std::vector<QuestionRecord>& records,
                    const SamplePreparer& prepare, const AnswerVocabulary& vocab,
                    AccuracyMode mode, double noise_level, const std::string& split_name,
                    const std::string& model_name);

struct SweepReport {
  std::vector<EvalReport> rows;  // ascending noise level
  void write_csv(const std::string& path) const;
};

SweepReport noise_sweep(VqaModelAdapter& model, const std::vector<QuestionRecord>& records,
                        const std::vector<double>& levels,
                        const std::function<SamplePreparer(double)>& preparer_for_level,
                        const AnswerVocabulary& vocab, AccuracyMode mode,
                        const std::string& split_name, const std::string& model_name);

/// Plain-text key = value run configuration; flags override file values.
class RunConfig {
 public:
  static RunConfig load(const std::string& path);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& def = "") const;
  double get_double(const std::string& key, double def) const;
  std::size_t get_size(const std::string& key, std::size_t def) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
  bool get_bool(const std::string& key, bool def) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Accepts a fraction ("0.3") or a percent literal ("30%").
double parse_noise_level(const std::string& text);
std::vector<double> parse_noise_levels(const std::string& csv);

}  // namespace sbvqa
