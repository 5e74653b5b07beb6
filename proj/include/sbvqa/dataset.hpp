// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sbvqa/tensor.hpp"

namespace sbvqa {

class DatasetError : public std::runtime_error {
 public:
  explicit DatasetError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class AnswerType { kYesNo, kNumber, kOther };
enum class Split { kTrain, kVal, kTestDev };

std::string to_string(AnswerType t);
std::string to_string(Split s);
AnswerType answer_type_from_string(const std::string& s);
Split split_from_string(const std::string& s);

/// Fallback for manifests lacking answer_type; its use is logged by the
/// manifest loader.
AnswerType infer_answer_type(const std::string& question_text);

struct QuestionRecord {
  std::uint64_t question_id = 0;
  std::uint64_t image_id = 0;
  std::string question_text;
  std::string audio_path;
  std::vector<std::string> answers;
  AnswerType answer_type = AnswerType::kOther;
  Split split = Split::kTrain;

  const std::string& primary_answer() const { return answers.front(); }
};

/// JSON-lines manifest, one record per line. Duplicate ids, missing fields
/// and unknown answer types are distinct errors naming the line.
std::vector<QuestionRecord> load_manifest(const std::string& path);
void save_manifest(const std::vector<QuestionRecord>& records, const std::string& path);

std::vector<QuestionRecord> records_of_split(const std::vector<QuestionRecord>& records,
                                             Split split);

/// The K most frequent primary answers of the train split, defining the
/// model's output classes. Ties broken lexicographically.
class AnswerVocabulary {
 public:
  static AnswerVocabulary build(const std::vector<QuestionRecord>& train_records,
                                std::size_t k);

  /// Rebuilds a vocabulary from a persisted class list (order preserved).
  static AnswerVocabulary from_classes(const std::vector<std::string>& classes);

  std::optional<std::size_t> index_of(const std::string& answer) const {
    auto it = index_.find(answer);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& class_name(std::size_t i) const { return classes_.at(i); }
  std::size_t size() const { return classes_.size(); }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> classes_;
};

/// Keeps exactly the records whose primary answer is in the vocabulary.
/// Applied to train only; val/test are evaluated in full.
std::vector<QuestionRecord> filter_train(const std::vector<QuestionRecord>& records,
                                         const AnswerVocabulary& vocab);

struct SplitSpec {
  std::vector<std::uint64_t> zero_shot_ids;  // subset of val, by question id
};

/// Retains val records whose normalized question text never occurs in train.
SplitSpec zero_shot_split(const std::vector<QuestionRecord>& train_records,
                          const std::vector<QuestionRecord>& val_records);

/// File-backed map image_id -> fixed-dim float32 feature vector.
/// File: magic "VQAF", version u32, count u32, dim u32, then per record
/// (image_id u64, dim x float32), all little-endian.
class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(std::size_t dim) : dim_(dim) {}

  static FeatureStore load(const std::string& path);
  void save(const std::string& path) const;

  void put(std::uint64_t image_id, const std::vector<float>& vec);
  const std::vector<float>& get(std::uint64_t image_id) const;
  Tensor get_tensor(std::uint64_t image_id) const;
  bool contains(std::uint64_t image_id) const { return feats_.count(image_id) > 0; }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return order_.size(); }
  const std::vector<std::uint64_t>& ids() const { return order_; }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::uint64_t, std::vector<float>> feats_;
  std::vector<std::uint64_t> order_;  // insertion order, fixes file layout
};

constexpr std::uint32_t kFeatureStoreVersion = 1;

// ---------------------------------------------------------------------------
// Synthetic desk-scale dataset. Questions come from a small template bank;
// audio is synthesized deterministically; image features carry a planted
// one-hot pattern in per-template coordinate blocks so the correct answer is
// recoverable from (question, feature) by construction.

struct SynthTemplate {
  std::string text;
  AnswerType type = AnswerType::kOther;
  std::vector<std::string> answers;
};

std::vector<SynthTemplate> default_templates();

struct SynthDatasetSpec {
  std::size_t train_count = 32;
  std::size_t val_count = 0;
  std::uint64_t seed = 0;
  std::size_t feature_dim = 4096;
  /// multimodal: the answer depends on the image block of the asked
  /// template. text_only: the answer is a fixed function of the template,
  /// so it is decidable from the question alone.
  bool text_only = false;
  std::vector<SynthTemplate> templates = default_templates();
};

struct SynthDataset {
  std::vector<QuestionRecord> records;
  FeatureStore features;
  std::vector<std::string> global_answers;  // block layout, fixed order
};

/// Writes manifest.jsonl, audio/q<id>.wav and features.bin under out_dir.
SynthDataset generate_synthetic_dataset(const SynthDatasetSpec& spec,
                                        const std::string& out_dir);

/// Independent decoder reading the planted coordinates; achieves accuracy
/// 1.0 on generated data by construction.
std::string oracle_decode(const std::vector<SynthTemplate>& templates,
                          const std::vector<std::string>& global_answers,
                          const std::string& question_text, const std::vector<float>& feature);

/// Deterministic synthetic noise bank, one or more clips per Urban8K
/// category name, for desk-scale corruption runs.
void generate_noise_bank(const std::string& dir, std::size_t clips_per_category,
                         std::uint64_t seed, std::uint32_t rate = 16000,
                         double clip_seconds = 1.0);

}  // namespace sbvqa
