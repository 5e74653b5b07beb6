// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbvqa/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"

namespace fs = std::filesystem;

namespace sbvqa {

const std::vector<std::string> kUrban8kCategories = {
    "air_conditioner", "car_horn", "children_playing", "dog_bark",  "drilling",
    "engine_idling",   "gun_shot", "jackhammer",       "siren",     "street_music"};

std::vector<NoiseLevel> default_noise_levels() {
  std::vector<NoiseLevel> levels;
  for (int pct = 0; pct <= 50; pct += 10) levels.push_back(NoiseLevel(pct / 100.0));
  return levels;
}

NoiseBank NoiseBank::load_dir(const std::string& dir, std::uint32_t rate) {
  if (!fs::is_directory(dir)) throw CorruptionError("noise bank directory not found: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());

  NoiseBank bank;
  for (const auto& path : files) {
    NoiseEntry e;
    e.wave = resample(read_wav(path), rate);
    e.source = fs::path(path).filename().string();
    e.category = "unknown";
    for (const auto& cat : kUrban8kCategories)
      if (e.source.rfind(cat, 0) == 0) {
        e.category = cat;
        break;
      }
    bank.entries.push_back(std::move(e));
  }
  if (bank.entries.empty()) throw CorruptionError("no .wav files in noise bank: " + dir);
  return bank;
}

Waveform fit_noise_length(const Waveform& noise, std::size_t target_len) {
  if (noise.samples.empty()) throw CorruptionError("fit_noise_length: empty noise clip");
  if (target_len < 1) throw CorruptionError("fit_noise_length: target length must be >= 1");
  Waveform out;
  out.rate = noise.rate;
  out.samples.resize(target_len);
  for (std::size_t i = 0; i < target_len; ++i)
    out.samples[i] = noise.samples[i % noise.samples.size()];
  return out;
}

NormalizeResult peak_normalize(const Waveform& wave) {
  double peak = 0.0;
  for (double v : wave.samples) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return {wave, true};
  NormalizeResult out{wave, false};
  for (double& v : out.wave.samples) v /= peak;
  return out;
}

NormalizeResult rms_normalize(const Waveform& wave, double target_rms) {
  double sum = 0.0;
  for (double v : wave.samples) sum += v * v;
  const double rms = std::sqrt(sum / static_cast<double>(std::max<std::size_t>(
                                         wave.samples.size(), 1)));
  if (rms == 0.0) return {wave, true};
  NormalizeResult out{wave, false};
  const double gain = target_rms / rms;
  for (double& v : out.wave.samples) v = std::clamp(v * gain, -1.0, 1.0);
  return out;
}

Waveform mix(const Waveform& original, const Waveform& noise, NoiseLevel nl) {
  if (original.samples.size() != noise.samples.size())
    throw CorruptionError("mix: length mismatch (" + std::to_string(original.samples.size()) +
                          " vs " + std::to_string(noise.samples.size()) + ")");
  if (original.rate != noise.rate) throw CorruptionError("mix: sample rate mismatch");
  Waveform out;
  out.rate = original.rate;
  out.samples.resize(original.samples.size());
  const double w = nl.value;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    double v = (1.0 - w) * original.samples[i] + w * noise.samples[i];
    // Convexity keeps |v| <= 1 for normalized inputs; clamp only guards
    // numerically exceeded bounds.
    out.samples[i] = std::clamp(v, -1.0, 1.0);
  }
  return out;
}

std::string corrupted_file_name(std::uint64_t question_id, NoiseLevel level) {
  const int pct = static_cast<int>(std::lround(level.value * 100.0));
  return std::to_string(question_id) + "_" + std::to_string(pct) + ".wav";
}

void CorruptionPlan::save_jsonl(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw CorruptionError("cannot write plan: " + path);
  for (const auto& e : entries) {
    nlohmann::json j;
    j["question_id"] = e.question_id;
    j["noise_file"] = e.noise_file;
    j["category"] = e.category;
    j["levels"] = e.levels;
    os << j.dump() << "\n";
  }
}

CorruptionPlan corrupt_corpus(const std::vector<CorpusItem>& items, const NoiseBank& bank,
                              const std::vector<NoiseLevel>& levels, std::uint64_t seed,
                              const std::string& out_dir, NormalizationMode norm) {
  if (bank.entries.empty()) throw CorruptionError("corrupt_corpus: empty noise bank");
  fs::create_directories(out_dir);

  // The whole assignment is drawn up front so execution order cannot
  // change outputs.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> assignment(items.size());
  for (std::size_t i = 0; i < items.size(); ++i)
    assignment[i] = static_cast<std::size_t>(rng() % bank.entries.size());

  CorruptionPlan plan;
  plan.seed = seed;
  auto normalize = [norm](const Waveform& w) {
    return norm == NormalizationMode::kPeak ? peak_normalize(w) : rms_normalize(w);
  };

  for (std::size_t i = 0; i < items.size(); ++i) {
    const CorpusItem& item = items[i];
    const NoiseEntry& noise = bank.entries[assignment[i]];
    Waveform original = resample(read_wav(item.audio_path), kWorkingRate);
    const Waveform normalized_original = normalize(original).wave;
    const Waveform fitted =
        normalize(fit_noise_length(noise.wave, normalized_original.samples.size())).wave;

    PlanEntry pe;
    pe.question_id = item.question_id;
    pe.noise_file = noise.source;
    pe.category = noise.category;
    for (NoiseLevel level : levels) {
      const Waveform corrupted = mix(normalized_original, fitted, level);
      write_wav(corrupted, (fs::path(out_dir) / corrupted_file_name(item.question_id, level))
                               .string());
      pe.levels.push_back(level.value);
    }
    plan.entries.push_back(std::move(pe));
  }
  plan.save_jsonl((fs::path(out_dir) / "plan.jsonl").string());
  return plan;
}

}  // namespace sbvqa
