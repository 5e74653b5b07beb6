// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbvqa/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace sbvqa {

std::vector<std::string> tokenize(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isalnum(c)) {
      cleaned.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '\'' && i > 0 && i + 1 < text.size() &&
               std::isalnum(static_cast<unsigned char>(text[i - 1])) &&
               std::isalnum(static_cast<unsigned char>(text[i + 1]))) {
      cleaned.push_back('\'');  // within-word apostrophe
    } else {
      cleaned.push_back(' ');
    }
  }
  std::vector<std::string> tokens;
  std::size_t start = 0;
  while (start < cleaned.size()) {
    while (start < cleaned.size() && cleaned[start] == ' ') ++start;
    std::size_t end = start;
    while (end < cleaned.size() && cleaned[end] != ' ') ++end;
    if (end > start) tokens.push_back(cleaned.substr(start, end - start));
    start = end;
  }
  return tokens;
}

std::string normalize_text(const std::string& text) {
  const auto tokens = tokenize(text);
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  if (texts.empty()) throw TextError("cannot build vocabulary from an empty corpus");
  Vocabulary vocab;
  for (const auto& text : texts) {
    for (const auto& tok : tokenize(text)) {
      if (vocab.index_.emplace(tok, static_cast<int>(vocab.tokens_.size()) + 1).second)
        vocab.tokens_.push_back(tok);
    }
  }
  return vocab;
}

EncodedQuestion encode(const std::string& text, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 1) throw TextError("encode: max_len must be >= 1");
  const auto tokens = tokenize(text);
  EncodedQuestion out;
  out.original_len = tokens.size();
  out.indices.assign(max_len, 0);
  for (std::size_t i = 0; i < tokens.size() && i < max_len; ++i)
    out.indices[i] = vocab.lookup(tokens[i]);
  return out;
}

WerBreakdown wer_tokens(const std::vector<std::string>& ref,
                        const std::vector<std::string>& hyp) {
  if (ref.empty()) throw TextError("wer: empty reference");
  const std::size_t n = ref.size(), m = hyp.size();

  // d[i][j]: min edits aligning ref[0..i) with hyp[0..j).
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto cell = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
  for (std::size_t i = 0; i <= n; ++i) d[cell(i, 0)] = i;
  for (std::size_t j = 0; j <= m; ++j) d[cell(0, j)] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = d[cell(i - 1, j - 1)] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const std::size_t del = d[cell(i - 1, j)] + 1;
      const std::size_t ins = d[cell(i, j - 1)] + 1;
      d[cell(i, j)] = std::min({sub, del, ins});
    }
  }

  // Backtrace with the fixed tie order: substitution/match, deletion,
  // insertion. Makes the breakdown, not just the total, deterministic.
  WerBreakdown out;
  out.ref_len = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        d[cell(i, j)] == d[cell(i - 1, j - 1)] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++out.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[cell(i, j)] == d[cell(i - 1, j)] + 1) {
      ++out.deletions;
      --i;
    } else {
      ++out.insertions;
      --j;
    }
  }
  return out;
}

WerBreakdown wer(const std::string& reference, const std::string& hypothesis) {
  return wer_tokens(tokenize(reference), tokenize(hypothesis));
}

WerBreakdown wer_corpus(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw TextError("wer_corpus: no pairs");
  WerBreakdown total;
  for (const auto& [ref, hyp] : pairs) {
    const WerBreakdown one = wer(ref, hyp);
    total.substitutions += one.substitutions;
    total.deletions += one.deletions;
    total.insertions += one.insertions;
    total.ref_len += one.ref_len;
  }
  return total;
}

FileTranscriber::FileTranscriber(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw TextError("cannot open transcript file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw TextError("transcripts " + path + " line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    if (!j.contains("question_id") || !j.contains("noise_level") || !j.contains("text"))
      throw TextError("transcripts " + path + " line " + std::to_string(line_no) +
                      ": missing question_id, noise_level or text");
    const std::uint64_t qid = j["question_id"].get<std::uint64_t>();
    const int pct = static_cast<int>(std::lround(j["noise_level"].get<double>() * 100.0));
    entries_[qid][pct] = j["text"].get<std::string>();
  }
}

std::optional<std::string> FileTranscriber::transcribe(std::uint64_t question_id,
                                                       double noise_level) const {
  auto it = entries_.find(question_id);
  if (it == entries_.end()) return std::nullopt;
  const int pct = static_cast<int>(std::lround(noise_level * 100.0));
  auto jt = it->second.find(pct);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

}  // namespace sbvqa
