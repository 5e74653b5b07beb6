// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbvqa/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>

#include "json.hpp"
#include "sbvqa/audio.hpp"
#include "sbvqa/corruption.hpp"
#include "sbvqa/text.hpp"

namespace fs = std::filesystem;

namespace sbvqa {

std::string to_string(AnswerType t) {
  switch (t) {
    case AnswerType::kYesNo: return "yes/no";
    case AnswerType::kNumber: return "number";
    case AnswerType::kOther: return "other";
  }
  return "other";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTestDev: return "test-dev";
  }
  return "train";
}

AnswerType answer_type_from_string(const std::string& s) {
  if (s == "yes/no") return AnswerType::kYesNo;
  if (s == "number") return AnswerType::kNumber;
  if (s == "other") return AnswerType::kOther;
  throw DatasetError("unknown answer_type: " + s);
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test-dev") return Split::kTestDev;
  throw DatasetError("unknown split: " + s);
}

AnswerType infer_answer_type(const std::string& question_text) {
  const auto tokens = tokenize(question_text);
  if (tokens.size() >= 2 && tokens[0] == "how" && tokens[1] == "many")
    return AnswerType::kNumber;
  if (!tokens.empty() &&
      (tokens[0] == "is" || tokens[0] == "are" || tokens[0] == "does" || tokens[0] == "do"))
    return AnswerType::kYesNo;
  return AnswerType::kOther;
}

std::vector<QuestionRecord> load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DatasetError("cannot open manifest: " + path);
  std::vector<QuestionRecord> records;
  std::set<std::uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  bool inferred_any = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "manifest " + path + " line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(where + ": invalid JSON: " + e.what());
    }
    for (const char* field : {"question_id", "image_id", "question_text", "audio_path",
                              "answers", "split"})
      if (!j.contains(field)) throw DatasetError(where + ": missing field " + field);

    QuestionRecord r;
    r.question_id = j["question_id"].get<std::uint64_t>();
    r.image_id = j["image_id"].get<std::uint64_t>();
    r.question_text = j["question_text"].get<std::string>();
    r.audio_path = j["audio_path"].get<std::string>();
    for (const auto& a : j["answers"]) r.answers.push_back(a.get<std::string>());
    if (r.question_text.empty()) throw DatasetError(where + ": empty question_text");
    if (r.answers.empty()) throw DatasetError(where + ": empty answers");
    try {
      r.split = split_from_string(j["split"].get<std::string>());
      if (j.contains("answer_type")) {
        r.answer_type = answer_type_from_string(j["answer_type"].get<std::string>());
      } else {
        r.answer_type = infer_answer_type(r.question_text);
        inferred_any = true;
      }
    } catch (const DatasetError& e) {
      throw DatasetError(where + ": " + e.what());
    }
    if (!seen.insert(r.question_id).second)
      throw DatasetError(where + ": duplicate question_id " + std::to_string(r.question_id));
    records.push_back(std::move(r));
  }
  if (inferred_any)
    std::cerr << "note: manifest " << path
              << " lacks answer_type on some lines; types were inferred heuristically\n";
  return records;
}

void save_manifest(const std::vector<QuestionRecord>& records, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DatasetError("cannot write manifest: " + path);
  for (const auto& r : records) {
    nlohmann::json j;
    j["question_id"] = r.question_id;
    j["image_id"] = r.image_id;
    j["question_text"] = r.question_text;
    j["audio_path"] = r.audio_path;
    j["answers"] = r.answers;
    j["answer_type"] = to_string(r.answer_type);
    j["split"] = to_string(r.split);
    os << j.dump() << "\n";
  }
}

std::vector<QuestionRecord> records_of_split(const std::vector<QuestionRecord>& records,
                                             Split split) {
  std::vector<QuestionRecord> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(r);
  return out;
}

AnswerVocabulary AnswerVocabulary::build(const std::vector<QuestionRecord>& train_records,
                                         std::size_t k) {
  std::map<std::string, std::size_t> freq;  // ordered: lexicographic tie-break for free
  for (const auto& r : train_records) ++freq[r.primary_answer()];
  if (freq.size() < k)
    throw DatasetError("answer vocabulary needs " + std::to_string(k) +
                       " distinct answers, corpus has " + std::to_string(freq.size()));

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  AnswerVocabulary vocab;
  for (std::size_t i = 0; i < k; ++i) {
    vocab.index_[ranked[i].first] = i;
    vocab.classes_.push_back(ranked[i].first);
  }
  return vocab;
}

AnswerVocabulary AnswerVocabulary::from_classes(const std::vector<std::string>& classes) {
  AnswerVocabulary vocab;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (vocab.index_.count(classes[i]))
      throw DatasetError("duplicate answer class: " + classes[i]);
    vocab.index_[classes[i]] = i;
    vocab.classes_.push_back(classes[i]);
  }
  return vocab;
}

std::vector<QuestionRecord> filter_train(const std::vector<QuestionRecord>& records,
                                         const AnswerVocabulary& vocab) {
  std::vector<QuestionRecord> out;
  for (const auto& r : records)
    if (vocab.index_of(r.primary_answer())) out.push_back(r);
  if (out.empty() && !records.empty())
    std::cerr << "warning: filter_train dropped every record\n";
  return out;
}

SplitSpec zero_shot_split(const std::vector<QuestionRecord>& train_records,
                          const std::vector<QuestionRecord>& val_records) {
  std::set<std::string> train_texts;
  for (const auto& r : train_records) train_texts.insert(normalize_text(r.question_text));
  SplitSpec spec;
  for (const auto& r : val_records)
    if (!train_texts.count(normalize_text(r.question_text)))
      spec.zero_shot_ids.push_back(r.question_id);
  return spec;
}

// --------------------------------------------------------------------------
// FeatureStore

namespace {

void put_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw DatasetError("truncated feature store");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw DatasetError("truncated feature store");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

void FeatureStore::put(std::uint64_t image_id, const std::vector<float>& vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_)
    throw DatasetError("feature dim mismatch: store has " + std::to_string(dim_) +
                       ", vector has " + std::to_string(vec.size()));
  if (!feats_.count(image_id)) order_.push_back(image_id);
  feats_[image_id] = vec;
}

const std::vector<float>& FeatureStore::get(std::uint64_t image_id) const {
  auto it = feats_.find(image_id);
  if (it == feats_.end())
    throw DatasetError("unknown image_id in feature store: " + std::to_string(image_id));
  return it->second;
}

Tensor FeatureStore::get_tensor(std::uint64_t image_id) const {
  const auto& vec = get(image_id);
  Tensor t({vec.size()});
  for (std::size_t i = 0; i < vec.size(); ++i) t[i] = static_cast<double>(vec[i]);
  return t;
}

void FeatureStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DatasetError("cannot write feature store: " + path);
  os.write("VQAF", 4);
  put_u32le(os, kFeatureStoreVersion);
  put_u32le(os, static_cast<std::uint32_t>(order_.size()));
  put_u32le(os, static_cast<std::uint32_t>(dim_));
  for (std::uint64_t id : order_) {
    put_u64le(os, id);
    const auto& vec = feats_.at(id);
    for (float f : vec) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32le(os, bits);
    }
  }
  if (!os) throw DatasetError("write failure: " + path);
}

FeatureStore FeatureStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DatasetError("cannot open feature store: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "VQAF", 4) != 0)
    throw DatasetError("bad feature store magic in " + path);
  const std::uint32_t version = get_u32le(is);
  if (version != kFeatureStoreVersion)
    throw DatasetError("unsupported feature store version " + std::to_string(version));
  const std::uint32_t count = get_u32le(is);
  const std::uint32_t dim = get_u32le(is);
  FeatureStore store(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t id = get_u64le(is);
    std::vector<float> vec(dim);
    for (std::uint32_t j = 0; j < dim; ++j) {
      const std::uint32_t bits = get_u32le(is);
      std::memcpy(&vec[j], &bits, 4);
    }
    store.put(id, vec);
  }
  return store;
}

// --------------------------------------------------------------------------
// Synthetic dataset

std::vector<SynthTemplate> default_templates() {
  return {
      {"is it red", AnswerType::kYesNo, {"yes", "no"}},
      {"is it small", AnswerType::kYesNo, {"yes", "no"}},
      {"how many dots", AnswerType::kNumber, {"1", "2", "3", "4"}},
      {"what color here", AnswerType::kOther, {"red", "blue", "green", "black"}},
      {"what shape here", AnswerType::kOther, {"circle", "square", "triangle", "star"}},
  };
}

namespace {

std::vector<std::string> collect_global_answers(const std::vector<SynthTemplate>& templates) {
  std::vector<std::string> out;
  for (const auto& t : templates)
    for (const auto& a : t.answers)
      if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  return out;
}

std::size_t global_index(const std::vector<std::string>& global, const std::string& answer) {
  const auto it = std::find(global.begin(), global.end(), answer);
  if (it == global.end()) throw DatasetError("answer missing from global list: " + answer);
  return static_cast<std::size_t>(it - global.begin());
}

}  // namespace

SynthDataset generate_synthetic_dataset(const SynthDatasetSpec& spec,
                                        const std::string& out_dir) {
  if (spec.train_count < 1) throw DatasetError("synthetic dataset needs train_count >= 1");
  if (spec.templates.empty()) throw DatasetError("synthetic dataset needs templates");
  SynthDataset ds;
  ds.global_answers = collect_global_answers(spec.templates);
  const std::size_t block = ds.global_answers.size();
  if (spec.feature_dim < spec.templates.size() * block)
    throw DatasetError("feature_dim too small for planted blocks: need >= " +
                       std::to_string(spec.templates.size() * block));

  fs::create_directories(fs::path(out_dir) / "audio");
  ds.features = FeatureStore(spec.feature_dim);

  std::mt19937_64 rng(spec.seed);
  const std::size_t total = spec.train_count + spec.val_count;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t t = i % spec.templates.size();
    const SynthTemplate& tmpl = spec.templates[t];

    // Every image answers every template; the record's label reads the
    // asked block. Features are keyed by (image_id, seed).
    const std::uint64_t image_id = i + 1;
    std::mt19937_64 feat_rng(splitmix64(spec.seed ^ (image_id * 0x9e3779b97f4a7c15ull)));
    std::uniform_real_distribution<double> jitter(-0.01, 0.01);
    std::vector<float> feature(spec.feature_dim);
    for (auto& f : feature) f = static_cast<float>(jitter(feat_rng));

    std::string label;
    for (std::size_t tt = 0; tt < spec.templates.size(); ++tt) {
      const auto& cand = spec.templates[tt].answers;
      const std::size_t pick =
          spec.text_only ? tt % cand.size()
                         : static_cast<std::size_t>(rng() % cand.size());
      feature[tt * block + global_index(ds.global_answers, cand[pick])] = 1.0f;
      if (tt == t) label = cand[pick];
    }
    ds.features.put(image_id, feature);

    QuestionRecord r;
    r.question_id = i + 1;
    r.image_id = image_id;
    r.question_text = tmpl.text;
    r.answers = {label};
    r.answer_type = tmpl.type;
    r.split = i < spec.train_count ? Split::kTrain : Split::kVal;
    r.audio_path =
        (fs::path(out_dir) / "audio" / ("q" + std::to_string(r.question_id) + ".wav"))
            .string();
    write_wav(synth_speech(r.question_text, kWorkingRate, spec.seed), r.audio_path);
    ds.records.push_back(std::move(r));
  }

  save_manifest(ds.records, (fs::path(out_dir) / "manifest.jsonl").string());
  ds.features.save((fs::path(out_dir) / "features.bin").string());
  return ds;
}

std::string oracle_decode(const std::vector<SynthTemplate>& templates,
                          const std::vector<std::string>& global_answers,
                          const std::string& question_text,
                          const std::vector<float>& feature) {
  const std::string norm = normalize_text(question_text);
  const std::size_t block = global_answers.size();
  for (std::size_t t = 0; t < templates.size(); ++t) {
    if (normalize_text(templates[t].text) != norm) continue;
    std::size_t best = 0;
    float best_v = -1e30f;
    for (const auto& cand : templates[t].answers) {
      const std::size_t g = global_index(global_answers, cand);
      if (feature.at(t * block + g) > best_v) {
        best_v = feature[t * block + g];
        best = g;
      }
    }
    return global_answers[best];
  }
  throw DatasetError("oracle_decode: question matches no template: " + question_text);
}

void generate_noise_bank(const std::string& dir, std::size_t clips_per_category,
                         std::uint64_t seed, std::uint32_t rate, double clip_seconds) {
  if (clips_per_category < 1) throw DatasetError("noise bank needs >= 1 clip per category");
  fs::create_directories(dir);
  const std::size_t len = static_cast<std::size_t>(clip_seconds * rate);
  for (std::size_t c = 0; c < kUrban8kCategories.size(); ++c) {
    for (std::size_t k = 0; k < clips_per_category; ++k) {
      std::mt19937_64 rng(splitmix64(seed ^ (c * 1000 + k + 1)));
      std::uniform_real_distribution<double> uni(-1.0, 1.0);
      // Category-flavored texture: a tonal component plus white noise,
      // smoothed a little so categories get distinct spectra.
      const double tone_hz = 80.0 + 130.0 * static_cast<double>(c);
      const double tone_amp = 0.3 + 0.05 * static_cast<double>(c % 3);
      Waveform w;
      w.rate = rate;
      w.samples.resize(len);
      double smooth = 0.0;
      const double alpha = 0.1 + 0.08 * static_cast<double>(c % 5);
      for (std::size_t i = 0; i < len; ++i) {
        smooth = (1.0 - alpha) * smooth + alpha * uni(rng);
        w.samples[i] = tone_amp * std::sin(2.0 * M_PI * tone_hz * i / rate) + 0.7 * smooth;
      }
      const Waveform norm = peak_normalize(w).wave;
      Waveform scaled = norm;
      for (double& v : scaled.samples) v *= 0.95;
      write_wav(scaled,
                (fs::path(dir) / (kUrban8kCategories[c] + "_" + std::to_string(k) + ".wav"))
                    .string());
    }
  }
}

}  // namespace sbvqa
