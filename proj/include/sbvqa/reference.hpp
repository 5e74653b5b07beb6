// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Full-scale reference results. These numbers come from the original
// large-scale experiments (VQA1.0 questions, ~200 h of synthesized speech,
// VGG19 image features, a Kaldi ASR front end) and are NOT reproducible
// from this repository's desk-scale pipeline. They are recorded here as
// documentation constants only; nothing in the library computes against
// them.

#pragma once

#include <array>

namespace sbvqa::reference {

/// ASR word error rate (%) on test-dev audio at noise levels
/// 0%, 10%, ..., 50%.
inline constexpr std::array<double, 6> kAsrWerPercent = {8.46, 12.37, 17.77,
                                                         25.41, 35.15, 47.90};

struct AccuracyRow {
  double all, yes_no, number, other;
};

/// Test-dev accuracy (%) of the text-pipeline model on the original
/// (un-transcribed) questions.
inline constexpr AccuracyRow kTextModOriginal = {56.66, 78.89, 37.24, 42.07};
/// Text-pipeline model on ASR transcripts of 0%-noise audio.
inline constexpr AccuracyRow kTextModAsr0 = {54.03, 75.47, 36.82, 39.62};
/// End-to-end audio model at 0% noise.
inline constexpr AccuracyRow kSpeechMod0 = {46.99, 67.87, 30.84, 32.82};
/// Blind (no-image) variants.
inline constexpr AccuracyRow kTextModBlind = {48.76, 78.20, 35.68, 26.59};
inline constexpr AccuracyRow kSpeechModBlind = {42.05, 70.85, 31.62, 19.84};

/// Zero-shot filtering of the validation questions: total before and after
/// removing questions whose text also occurs in training.
inline constexpr std::size_t kValQuestionsTotal = 104654;
inline constexpr std::size_t kValQuestionsZeroShot = 65365;

}  // namespace sbvqa::reference
