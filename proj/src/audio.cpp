// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbvqa/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sbvqa/text.hpp"

namespace sbvqa {

namespace {

std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void wr_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MalformedWavError("cannot open wav file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw MalformedWavError("not a RIFF/WAVE file: " + path);

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data_ptr = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t chunk_len = rd_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_len > bytes.size())
      throw MalformedWavError("truncated chunk in wav file: " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw MalformedWavError("fmt chunk too short: " + path);
      format = rd_u16(bytes.data() + body);
      channels = rd_u16(bytes.data() + body + 2);
      rate = rd_u32(bytes.data() + body + 4);
      bits = rd_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_ptr = bytes.data() + body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || !data_ptr) throw MalformedWavError("missing fmt or data chunk: " + path);
  if (format != 1)
    throw UnsupportedEncodingError("unsupported wav encoding " + std::to_string(format) +
                                   " (PCM only): " + path);
  if (channels != 1)
    throw UnsupportedChannelsError("unsupported channel count " + std::to_string(channels) +
                                   " (mono only): " + path);
  if (bits != 16)
    throw UnsupportedBitDepthError("unsupported bit depth " + std::to_string(bits) +
                                   " (16-bit only): " + path);
  if (rate == 0) throw MalformedWavError("zero sample rate: " + path);

  Waveform wave;
  wave.rate = rate;
  const std::size_t n = data_len / 2;
  wave.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int16_t s =
        static_cast<std::int16_t>(rd_u16(data_ptr + 2 * i));
    wave.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return wave;
}

void write_wav(const Waveform& wave, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw AudioError("cannot open for writing: " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(wave.samples.size());
  const std::uint32_t data_bytes = n * 2;
  os.write("RIFF", 4);
  wr_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  wr_u32(os, 16);
  wr_u16(os, 1);  // PCM
  wr_u16(os, 1);  // mono
  wr_u32(os, wave.rate);
  wr_u32(os, wave.rate * 2);
  wr_u16(os, 2);
  wr_u16(os, 16);
  os.write("data", 4);
  wr_u32(os, data_bytes);
  for (double v : wave.samples) {
    long q = std::lround(v * 32768.0);  // half away from zero
    q = std::clamp(q, -32768l, 32767l);
    wr_u16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  if (!os) throw AudioError("write failure: " + path);
}

Waveform resample(const Waveform& wave, std::uint32_t target_rate) {
  if (target_rate == 0) throw AudioError("resample target rate must be positive");
  if (wave.samples.empty()) throw AudioError("resample on empty waveform");
  if (target_rate == wave.rate) return wave;

  const std::size_t in_len = wave.samples.size();
  const std::size_t out_len = static_cast<std::size_t>(std::llround(
      static_cast<double>(in_len) * target_rate / static_cast<double>(wave.rate)));
  Waveform out;
  out.rate = target_rate;
  out.samples.resize(std::max<std::size_t>(out_len, 1));
  const double step = static_cast<double>(wave.rate) / static_cast<double>(target_rate);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const double pos = static_cast<double>(i) * step;
    const std::size_t lo = std::min(static_cast<std::size_t>(pos), in_len - 1);
    const std::size_t hi = std::min(lo + 1, in_len - 1);
    const double frac = pos - static_cast<double>(lo);
    out.samples[i] = wave.samples[lo] * (1.0 - frac) + wave.samples[hi] * frac;
  }
  return out;
}

ScaledWaveform scale_amplitude(const Waveform& wave) {
  ScaledWaveform out;
  out.rate = wave.rate;
  out.samples.resize(wave.samples.size());
  for (std::size_t i = 0; i < wave.samples.size(); ++i)
    out.samples[i] = std::clamp(wave.samples[i] * 256.0, -256.0, 256.0);
  return out;
}

PaddedBatch pad_batch(const std::vector<ScaledWaveform>& waves) {
  if (waves.empty()) throw AudioError("pad_batch on empty list");
  const std::uint32_t rate = waves.front().rate;
  std::size_t max_len = 0;
  for (const auto& w : waves) {
    if (w.rate != rate) throw AudioError("pad_batch requires a uniform sample rate");
    max_len = std::max(max_len, w.samples.size());
  }
  PaddedBatch batch;
  batch.rows = waves.size();
  batch.cols = max_len;
  batch.data.assign(batch.rows * batch.cols, 0.0);
  for (std::size_t i = 0; i < waves.size(); ++i) {
    batch.lengths.push_back(waves[i].samples.size());
    std::copy(waves[i].samples.begin(), waves[i].samples.end(),
              batch.data.begin() + i * batch.cols);
  }
  return batch;
}

double synth_token_frequency(const std::string& token, std::uint64_t seed,
                             const SynthConfig& cfg) {
  const std::uint64_t h = splitmix64(fnv1a64(token) ^ splitmix64(seed));
  const double unit = static_cast<double>(h % 100000ull) / 100000.0;
  return cfg.freq_min_hz + unit * (cfg.freq_max_hz - cfg.freq_min_hz);
}

Waveform synth_speech(const std::string& text, std::uint32_t rate, std::uint64_t seed,
                      const SynthConfig& cfg) {
  const std::vector<std::string> tokens = tokenize(text);
  if (tokens.empty()) throw AudioError("synth_speech: no tokens in input text");

  const std::size_t tone_len = static_cast<std::size_t>(std::llround(cfg.tone_seconds * rate));
  const std::size_t gap_len = static_cast<std::size_t>(std::llround(cfg.gap_seconds * rate));
  Waveform wave;
  wave.rate = rate;
  wave.samples.reserve(tokens.size() * (tone_len + gap_len));
  for (const auto& tok : tokens) {
    const double freq = synth_token_frequency(tok, seed, cfg);
    const double w = 2.0 * M_PI * freq / static_cast<double>(rate);
    for (std::size_t i = 0; i < tone_len; ++i)
      wave.samples.push_back(cfg.amplitude * std::sin(w * static_cast<double>(i)));
    wave.samples.insert(wave.samples.end(), gap_len, 0.0);
  }
  return wave;
}

}  // namespace sbvqa
