// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "sbvqa/audio.hpp"
#include "sbvqa/text.hpp"

using namespace sbvqa;

namespace {

void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

// Hand-rolled WAV bytes so the error paths can be exercised precisely.
std::string wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                      std::uint16_t bits, const std::vector<std::int16_t>& samples) {
  std::string data;
  put16(data, format);
  put16(data, channels);
  put32(data, rate);
  put32(data, rate * channels * bits / 8);
  put16(data, static_cast<std::uint16_t>(channels * bits / 8));
  put16(data, bits);

  std::string pcm;
  for (std::int16_t s : samples) put16(pcm, static_cast<std::uint16_t>(s));

  std::string out = "RIFF";
  put32(out, static_cast<std::uint32_t>(4 + 8 + data.size() + 8 + pcm.size()));
  out += "WAVE";
  out += "fmt ";
  put32(out, static_cast<std::uint32_t>(data.size()));
  out += data;
  out += "data";
  put32(out, static_cast<std::uint32_t>(pcm.size()));
  out += pcm;
  return out;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream os(path, std::ios::binary);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("wav round trip stays within one quantization step") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Waveform w;
  w.rate = 16000;
  w.samples.resize(2000);
  for (auto& s : w.samples) s = dist(rng);

  TempFile f("roundtrip.wav");
  write_wav(w, f.path);
  const Waveform r = read_wav(f.path);
  REQUIRE(r.samples.size() == w.samples.size());
  CHECK(r.rate == w.rate);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    CHECK(std::abs(r.samples[i] - w.samples[i]) <= 1.0 / 32768.0);
}

TEST_CASE("wav writes round half away from zero and clamp") {
  Waveform w;
  w.rate = 8000;
  // 1.5/32768 rounds to 2; -1.5/32768 rounds to -2; out-of-range clamps.
  w.samples = {1.5 / 32768.0, -1.5 / 32768.0, 2.0, -2.0};
  TempFile f("clamp.wav");
  write_wav(w, f.path);
  const Waveform r = read_wav(f.path);
  CHECK(r.samples[0] == doctest::Approx(2.0 / 32768.0).epsilon(1e-12));
  CHECK(r.samples[1] == doctest::Approx(-2.0 / 32768.0).epsilon(1e-12));
  CHECK(r.samples[2] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-12));
  CHECK(r.samples[3] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("wav reader accepts hand-built PCM and reports 2 s correctly") {
  std::vector<std::int16_t> samples(32000, 1024);
  TempFile f("twosec.wav");
  write_file(f.path, wav_bytes(1, 1, 16000, 16, samples));
  const Waveform w = read_wav(f.path);
  CHECK(w.samples.size() == 32000);
  CHECK(w.rate == 16000);
  CHECK(w.samples[0] == doctest::Approx(1024.0 / 32768.0).epsilon(1e-12));
}

TEST_CASE("wav reader raises distinct errors per defect") {
  TempFile bad("bad.wav"), flt("float.wav"), st("stereo.wav"), b8("8bit.wav"),
      trunc("trunc.wav");

  write_file(bad.path, "JUNKJUNKJUNKJUNK");
  CHECK_THROWS_AS(read_wav(bad.path), MalformedWavError);

  write_file(flt.path, wav_bytes(3, 1, 16000, 16, {0, 0}));  // IEEE float tag
  CHECK_THROWS_AS(read_wav(flt.path), UnsupportedEncodingError);

  write_file(st.path, wav_bytes(1, 2, 16000, 16, {0, 0}));
  CHECK_THROWS_AS(read_wav(st.path), UnsupportedChannelsError);

  write_file(b8.path, wav_bytes(1, 1, 16000, 8, {0, 0}));
  CHECK_THROWS_AS(read_wav(b8.path), UnsupportedBitDepthError);

  const std::string whole = wav_bytes(1, 1, 16000, 16, {1, 2, 3, 4});
  write_file(trunc.path, whole.substr(0, whole.size() - 3));
  CHECK_THROWS_AS(read_wav(trunc.path), MalformedWavError);

  CHECK_THROWS_AS(read_wav("no_such_file.wav"), AudioError);
}

TEST_CASE("resample length law and identity") {
  Waveform w;
  w.rate = 16000;
  w.samples.assign(16000, 0.25);
  const Waveform same = resample(w, 16000);
  CHECK(same.samples == w.samples);

  const Waveform down = resample(w, 8000);
  CHECK(down.samples.size() == 8000);
  CHECK(down.rate == 8000);
  const Waveform up = resample(w, 44100);
  CHECK(up.samples.size() == 44100);

  Waveform odd;
  odd.rate = 22050;
  odd.samples.assign(10000, 0.0);
  CHECK(resample(odd, 16000).samples.size() ==
        static_cast<std::size_t>(std::lround(10000.0 * 16000.0 / 22050.0)));
}

TEST_CASE("resample interpolates a ramp linearly") {
  Waveform w;
  w.rate = 1000;
  w.samples = {0.0, 1.0, 2.0, 3.0};
  const Waveform up = resample(w, 2000);
  REQUIRE(up.samples.size() == 8);
  // Interior points sit on the straight line between neighbors.
  for (std::size_t i = 0; i + 1 < up.samples.size(); ++i)
    CHECK(up.samples[i + 1] >= up.samples[i] - 1e-12);
  CHECK(up.samples[0] == doctest::Approx(0.0));
  CHECK(up.samples[2] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("scale_amplitude multiplies by 256 and clamps") {
  Waveform w;
  w.rate = 16000;
  w.samples = {0.5, -0.25, 1.5, -1.5};
  const ScaledWaveform s = scale_amplitude(w);
  CHECK(s.samples == std::vector<double>{128.0, -64.0, 256.0, -256.0});
  CHECK(s.rate == w.rate);
}

TEST_CASE("pad_batch pads with exact trailing zeros") {
  ScaledWaveform a{{1, 2, 3}, 16000};
  ScaledWaveform b{{4, 5}, 16000};
  const PaddedBatch batch = pad_batch({a, b});
  CHECK(batch.rows == 2);
  CHECK(batch.cols == 3);
  CHECK(batch.lengths == std::vector<std::size_t>{3, 2});
  CHECK(batch.row(1)[1] == 5.0);
  CHECK(batch.row(1)[2] == 0.0);

  ScaledWaveform c{{1}, 8000};
  CHECK_THROWS_AS(pad_batch({a, c}), AudioError);
}

TEST_CASE("synth_speech is deterministic and token-structured") {
  const Waveform a = synth_speech("is it red", 16000, 42);
  const Waveform b = synth_speech("is it red", 16000, 42);
  CHECK(a.samples == b.samples);

  // 3 tokens x (0.2 s tone + 0.05 s gap) at 16 kHz.
  CHECK(a.samples.size() == 3 * (3200 + 800));

  const Waveform c = synth_speech("is it red", 16000, 43);
  CHECK(a.samples != c.samples);  // seed moves the tone frequencies

  double peak = 0.0;
  for (double v : a.samples) peak = std::max(peak, std::abs(v));
  CHECK(peak <= 0.8 + 1e-9);
  CHECK(peak > 0.5);
}

TEST_CASE("synth token frequencies stay inside the configured band") {
  for (const char* tok : {"is", "it", "red", "how", "many", "dots", "zebra"}) {
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
      const double f = synth_token_frequency(tok, seed);
      CHECK(f >= 200.0);
      CHECK(f <= 4000.0);
    }
  }
  // Same token, same seed: identical; the mapping is a pure function.
  CHECK(synth_token_frequency("red", 7) == synth_token_frequency("red", 7));
}
