// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Noise corruption: a randomly assigned noise clip is length-fitted to the
// spoken question, both are normalized, and the two are convexly combined
// at the configured noise level.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbvqa/audio.hpp"

namespace sbvqa {

class CorruptionError : public std::runtime_error {
 public:
  explicit CorruptionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Convex mixing weight of noise versus original speech, in [0, 1].
struct NoiseLevel {
  double value = 0.0;

  explicit NoiseLevel(double v) : value(v) {
    if (!(v >= 0.0 && v <= 1.0))
      throw CorruptionError("noise level " + std::to_string(v) + " outside [0, 1]");
  }
};

/// Default sweep: 0% plus 10%-50% at 10% intervals.
std::vector<NoiseLevel> default_noise_levels();

extern const std::vector<std::string> kUrban8kCategories;

struct NoiseEntry {
  Waveform wave;
  std::string category;
  std::string source;  // file name, recorded in the plan
};

struct NoiseBank {
  std::vector<NoiseEntry> entries;

  /// Loads every .wav in a directory, resampling to the working rate.
  /// Category is inferred from the file-name prefix (Urban8K names).
  static NoiseBank load_dir(const std::string& dir, std::uint32_t rate = kWorkingRate);
};

/// Repeats the clip whole until it covers target_len, then truncates.
Waveform fit_noise_length(const Waveform& noise, std::size_t target_len);

struct NormalizeResult {
  Waveform wave;
  bool silent = false;  // all-zero input was passed through unchanged
};

/// Scales so max |sample| == 1. Silent input is a flagged no-op.
NormalizeResult peak_normalize(const Waveform& wave);

/// RMS alternative to peak normalization, selectable by config.
NormalizeResult rms_normalize(const Waveform& wave, double target_rms = 0.125);

enum class NormalizationMode { kPeak, kRms };

/// out[i] = (1 - NL) * original[i] + NL * noise[i]. Inputs must share length
/// and rate and be normalized by the caller.
Waveform mix(const Waveform& original, const Waveform& noise, NoiseLevel nl);

struct PlanEntry {
  std::uint64_t question_id = 0;
  std::string noise_file;
  std::string category;
  std::vector<double> levels;
};

struct CorruptionPlan {
  std::uint64_t seed = 0;
  std::vector<PlanEntry> entries;

  void save_jsonl(const std::string& path) const;
};

struct CorpusItem {
  std::uint64_t question_id = 0;
  std::string audio_path;
};

/// For each question and level, emits <question_id>_<level%>.wav into
/// out_dir. The same noise entry serves a question across all levels so the
/// sweep isolates the level effect; the assignment is drawn once from the
/// seed. Returns the persisted plan.
CorruptionPlan corrupt_corpus(const std::vector<CorpusItem>& items, const NoiseBank& bank,
                              const std::vector<NoiseLevel>& levels, std::uint64_t seed,
                              const std::string& out_dir,
                              NormalizationMode norm = NormalizationMode::kPeak);

std::string corrupted_file_name(std::uint64_t question_id, NoiseLevel level);

}  // namespace sbvqa
