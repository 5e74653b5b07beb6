// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sbvqa {

class TextError : public std::runtime_error {
 public:
  explicit TextError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Lowercases, strips punctuation except within-word apostrophes, splits on
/// whitespace. Empty text gives an empty list.
std::vector<std::string> tokenize(const std::string& text);

/// Tokenize then rejoin with single spaces; the identity used for the
/// zero-shot membership test.
std::string normalize_text(const std::string& text);

/// Token -> index map with indices 1..V; index 0 is reserved for padding and
/// out-of-vocabulary tokens.
class Vocabulary {
 public:
  static Vocabulary build(const std::vector<std::string>& texts);

  /// 0 for unknown tokens.
  int lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? 0 : it->second;
  }

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int index) const { return tokens_.at(index - 1); }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> tokens_;  // tokens_[i] has index i+1
};

struct EncodedQuestion {
  std::vector<int> indices;   // front-aligned, trailing zeros
  std::size_t original_len = 0;

  bool all_masked() const {
    for (int i : indices)
      if (i != 0) return false;
    return true;
  }
};

constexpr std::size_t kDefaultMaxQuestionLen = 22;

EncodedQuestion encode(const std::string& text, const Vocabulary& vocab, std::size_t max_len);

struct WerBreakdown {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_len = 0;

  std::size_t edits() const { return substitutions + deletions + insertions; }
  double wer() const { return static_cast<double>(edits()) / static_cast<double>(ref_len); }
};

/// Minimal-edit alignment with unit costs; ties broken preferring
/// substitution, then deletion, then insertion. Reference must be non-empty
/// after tokenization.
WerBreakdown wer(const std::string& reference, const std::string& hypothesis);
WerBreakdown wer_tokens(const std::vector<std::string>& ref,
                        const std::vector<std::string>& hyp);

/// Corpus-level WER: sums S, D, I, N over pairs before dividing.
WerBreakdown wer_corpus(const std::vector<std::pair<std::string, std::string>>& pairs);

/// Supplies transcripts for (question, noise level); the ingestion point for
/// externally produced ASR output.
class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual std::optional<std::string> transcribe(std::uint64_t question_id,
                                                double noise_level) const = 0;
};

/// File-backed transcriber over JSON-lines {question_id, noise_level, text}.
class FileTranscriber : public Transcriber {
 public:
  explicit FileTranscriber(const std::string& path);
  std::optional<std::string> transcribe(std::uint64_t question_id,
                                        double noise_level) const override;
  /// Total number of (question, level) transcripts loaded.
  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [qid, by_level] : entries_) n += by_level.size();
    return n;
  }

 private:
  // Keyed by (question_id, round(level * 100)).
  std::unordered_map<std::uint64_t, std::unordered_map<int, std::string>> entries_;
};

}  // namespace sbvqa
