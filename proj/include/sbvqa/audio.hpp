// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbvqa {

class AudioError : public std::runtime_error {
 public:
  explicit AudioError(const std::string& msg) : std::runtime_error(msg) {}
};

class MalformedWavError : public AudioError {
 public:
  using AudioError::AudioError;
};
class UnsupportedEncodingError : public AudioError {
 public:
  using AudioError::AudioError;
};
class UnsupportedChannelsError : public AudioError {
 public:
  using AudioError::AudioError;
};
class UnsupportedBitDepthError : public AudioError {
 public:
  using AudioError::AudioError;
};

/// Sampled audio in unit-amplitude form, samples in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  std::uint32_t rate = 16000;
};

/// Amplitude-scaled form consumed by SpeechMod, samples in [-256, 256].
struct ScaledWaveform {
  std::vector<double> samples;
  std::uint32_t rate = 16000;
};

/// A batch of scaled waveforms padded with trailing zeros to equal length.
struct PaddedBatch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;           // row-major [rows, cols]
  std::vector<std::size_t> lengths;   // original length per row

  const double* row(std::size_t i) const { return data.data() + i * cols; }
};

constexpr std::uint32_t kWorkingRate = 16000;

/// Reads a RIFF/WAVE file; PCM, 16-bit, mono only. Integer samples are
/// divided by 32768 into unit form.
Waveform read_wav(const std::string& path);

/// Writes 16-bit PCM mono, rounding half away from zero and clamping to
/// [-32768, 32767].
void write_wav(const Waveform& wave, const std::string& path);

/// Linear-interpolation resampling; same-rate input is returned unchanged.
/// Output length = round(len * target / rate).
Waveform resample(const Waveform& wave, std::uint32_t target_rate);

/// Fixed x256 map from unit form, clamped to [-256, 256].
ScaledWaveform scale_amplitude(const Waveform& wave);

/// Pads to the longest input with exact trailing zeros. Inputs must share
/// one sample rate.
PaddedBatch pad_batch(const std::vector<ScaledWaveform>& waves);

struct SynthConfig {
  double tone_seconds = 0.2;   // tone per token
  double gap_seconds = 0.05;   // silence after each token
  double freq_min_hz = 200.0;
  double freq_max_hz = 4000.0;
  double amplitude = 0.8;
};

/// Deterministic stand-in for TTS: each token maps via a stable hash mixed
/// with the seed to a fixed sine frequency; identical (text, rate, seed)
/// give identical samples.
Waveform synth_speech(const std::string& text, std::uint32_t rate, std::uint64_t seed,
                      const SynthConfig& cfg = {});

/// The frequency assigned to one token by synth_speech.
double synth_token_frequency(const std::string& token, std::uint64_t seed,
                             const SynthConfig& cfg = {});

}  // namespace sbvqa
