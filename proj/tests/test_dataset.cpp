// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sbvqa/audio.hpp"
#include "sbvqa/dataset.hpp"
#include "sbvqa/text.hpp"

using namespace sbvqa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream os(p);
  for (const auto& l : lines) os << l << "\n";
}

QuestionRecord record(std::uint64_t qid, const std::string& text, const std::string& answer,
                      Split split = Split::kTrain) {
  QuestionRecord r;
  r.question_id = qid;
  r.image_id = qid;
  r.question_text = text;
  r.audio_path = "audio/q" + std::to_string(qid) + ".wav";
  r.answers = {answer};
  r.answer_type = infer_answer_type(text);
  r.split = split;
  return r;
}

}  // namespace

TEST_CASE("manifest save and load round trip") {
  TempDir dir("sbvqa_manifest_rt");
  const std::vector<QuestionRecord> records{
      record(1, "is it red", "yes"),
      record(2, "how many dogs", "2", Split::kVal),
      record(3, "what color here", "blue", Split::kTestDev),
  };
  const std::string path = (dir.path / "m.jsonl").string();
  save_manifest(records, path);
  const auto loaded = load_manifest(path);
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded[i].question_id == records[i].question_id);
    CHECK(loaded[i].question_text == records[i].question_text);
    CHECK(loaded[i].answers == records[i].answers);
    CHECK(loaded[i].answer_type == records[i].answer_type);
    CHECK(loaded[i].split == records[i].split);
  }
}

TEST_CASE("manifest errors name the offending line") {
  TempDir dir("sbvqa_manifest_err");
  const std::string good =
      R"({"question_id":1,"image_id":1,"question_text":"is it red","audio_path":"a.wav","answers":["yes"],"split":"train"})";

  auto expect_error = [&](const std::string& bad_line, const std::string& fragment) {
    const fs::path p = dir.path / "bad.jsonl";
    write_lines(p, {good, bad_line});
    try {
      load_manifest(p.string());
      FAIL("expected DatasetError for: " << bad_line);
    } catch (const DatasetError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };

  expect_error("{not json", "invalid JSON");
  expect_error(R"({"question_id":2,"image_id":2,"answers":["x"],"split":"train"})",
               "missing field");
  expect_error(good, "duplicate question_id");
  expect_error(
      R"({"question_id":2,"image_id":2,"question_text":"x","audio_path":"a.wav","answers":["x"],"split":"weird"})",
      "unknown split");
  expect_error(
      R"({"question_id":2,"image_id":2,"question_text":"x","audio_path":"a.wav","answers":[],"split":"train"})",
      "empty answers");
  expect_error(
      R"({"question_id":2,"image_id":2,"question_text":"x","audio_path":"a.wav","answers":["x"],"split":"train","answer_type":"maybe"})",
      "unknown answer_type");

  CHECK_THROWS_AS(load_manifest((dir.path / "missing.jsonl").string()), DatasetError);
}

TEST_CASE("answer type inference covers the three buckets") {
  CHECK(infer_answer_type("how many dots are there") == AnswerType::kNumber);
  CHECK(infer_answer_type("is it raining") == AnswerType::kYesNo);
  CHECK(infer_answer_type("are these wild") == AnswerType::kYesNo);
  CHECK(infer_answer_type("what color is the bus") == AnswerType::kOther);
}

TEST_CASE("answer vocabulary ranks by frequency with lexicographic ties") {
  std::vector<QuestionRecord> records;
  std::uint64_t qid = 0;
  for (int i = 0; i < 3; ++i) records.push_back(record(++qid, "q", "dog"));
  for (int i = 0; i < 2; ++i) records.push_back(record(++qid, "q", "zebra"));
  for (int i = 0; i < 2; ++i) records.push_back(record(++qid, "q", "cat"));
  records.push_back(record(++qid, "q", "ant"));

  const AnswerVocabulary vocab = AnswerVocabulary::build(records, 3);
  CHECK(vocab.size() == 3);
  CHECK(vocab.class_name(0) == "dog");
  CHECK(vocab.class_name(1) == "cat");    // ties broken lexicographically
  CHECK(vocab.class_name(2) == "zebra");
  CHECK(vocab.index_of("dog") == std::optional<std::size_t>(0));
  CHECK(!vocab.index_of("ant").has_value());

  CHECK_THROWS_AS(AnswerVocabulary::build(records, 10), DatasetError);

  const auto filtered = filter_train(records, vocab);
  CHECK(filtered.size() == 7);  // the lone "ant" answer drops out
}

TEST_CASE("answer vocabulary rebuilds from a class list") {
  const AnswerVocabulary vocab = AnswerVocabulary::from_classes({"b", "a", "c"});
  CHECK(vocab.size() == 3);
  CHECK(vocab.class_name(0) == "b");
  CHECK(vocab.index_of("c") == std::optional<std::size_t>(2));
  CHECK_THROWS_AS(AnswerVocabulary::from_classes({"a", "a"}), DatasetError);
}

TEST_CASE("zero-shot split compares normalized question text") {
  const std::vector<QuestionRecord> train{record(1, "Is it red?", "yes")};
  const std::vector<QuestionRecord> val{
      record(10, "is it red", "no", Split::kVal),        // seen after normalization
      record(11, "is it blue", "yes", Split::kVal),      // unseen
      record(12, "IS IT RED!", "yes", Split::kVal),      // seen
  };
  const SplitSpec spec = zero_shot_split(train, val);
  CHECK(spec.zero_shot_ids == std::vector<std::uint64_t>{11});
}

TEST_CASE("feature store round trips byte-exactly with the documented size") {
  TempDir dir("sbvqa_featstore");
  FeatureStore store(3);
  store.put(7, {1.5f, -2.25f, 0.0f});
  store.put(2, {0.125f, 3.0f, -1.0f});
  const std::string p1 = (dir.path / "f1.bin").string();
  const std::string p2 = (dir.path / "f2.bin").string();
  store.save(p1);

  // header: magic + version + count + dim = 16 bytes; 8 + 4*dim per record.
  CHECK(fs::file_size(p1) == 16 + 2 * (8 + 3 * 4));

  const FeatureStore loaded = FeatureStore::load(p1);
  CHECK(loaded.size() == 2);
  CHECK(loaded.dim() == 3);
  CHECK(loaded.get(7) == std::vector<float>{1.5f, -2.25f, 0.0f});
  CHECK(loaded.get(2) == std::vector<float>{0.125f, 3.0f, -1.0f});
  CHECK(loaded.ids() == store.ids());  // insertion order survives

  loaded.save(p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string s1((std::istreambuf_iterator<char>(f1)), {});
  const std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);

  CHECK(loaded.get_tensor(7).shape == std::vector<std::size_t>{3});
  CHECK(loaded.get_tensor(7)[1] == -2.25);
  CHECK_THROWS_AS(loaded.get(99), DatasetError);
  CHECK_THROWS_AS(store.put(9, {1.0f}), DatasetError);  // dim mismatch

  std::ofstream(dir.path / "junk.bin") << "XXXXGARBAGE";
  CHECK_THROWS_AS(FeatureStore::load((dir.path / "junk.bin").string()), DatasetError);
}

TEST_CASE("synthetic dataset is decodable by the independent oracle") {
  TempDir dir("sbvqa_synth");
  SynthDatasetSpec spec;
  spec.train_count = 25;
  spec.val_count = 10;
  spec.seed = 9;
  spec.feature_dim = 80;
  const SynthDataset ds = generate_synthetic_dataset(spec, dir.path.string());

  REQUIRE(ds.records.size() == 35);
  for (const auto& r : ds.records) {
    const std::string decoded = oracle_decode(spec.templates, ds.global_answers,
                                              r.question_text, ds.features.get(r.image_id));
    CHECK(decoded == r.primary_answer());
    CHECK(fs::exists(r.audio_path));
  }
  CHECK(fs::exists(dir.path / "manifest.jsonl"));
  CHECK(fs::exists(dir.path / "features.bin"));
  CHECK(load_manifest((dir.path / "manifest.jsonl").string()).size() == 35);
}

TEST_CASE("synthetic generation is deterministic in the seed") {
  TempDir d1("sbvqa_synth_d1"), d2("sbvqa_synth_d2"), d3("sbvqa_synth_d3");
  SynthDatasetSpec spec;
  spec.train_count = 8;
  spec.feature_dim = 80;
  spec.seed = 4;
  const SynthDataset a = generate_synthetic_dataset(spec, d1.path.string());
  const SynthDataset b = generate_synthetic_dataset(spec, d2.path.string());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].answers == b.records[i].answers);
    CHECK(a.features.get(a.records[i].image_id) == b.features.get(b.records[i].image_id));
  }
  spec.seed = 5;
  const SynthDataset c = generate_synthetic_dataset(spec, d3.path.string());
  bool differs = false;
  for (std::size_t i = 0; i < a.records.size(); ++i)
    differs = differs || a.features.get(a.records[i].image_id) !=
                             c.features.get(c.records[i].image_id);
  CHECK(differs);
}

TEST_CASE("text-only mode fixes the answer per template") {
  TempDir dir("sbvqa_synth_textonly");
  SynthDatasetSpec spec;
  spec.train_count = 30;
  spec.feature_dim = 80;
  spec.text_only = true;
  const SynthDataset ds = generate_synthetic_dataset(spec, dir.path.string());
  std::map<std::string, std::string> answer_of_question;
  for (const auto& r : ds.records) {
    auto [it, inserted] = answer_of_question.emplace(r.question_text, r.primary_answer());
    if (!inserted) CHECK(it->second == r.primary_answer());
  }
  CHECK(answer_of_question.size() == spec.templates.size());
}

TEST_CASE("feature_dim smaller than the planted blocks is rejected") {
  SynthDatasetSpec spec;
  spec.feature_dim = 10;
  CHECK_THROWS_AS(generate_synthetic_dataset(spec, "unused_dir"), DatasetError);
}

TEST_CASE("generated audio differs across templates but not across images") {
  TempDir dir("sbvqa_synth_audio");
  SynthDatasetSpec spec;
  spec.train_count = 10;  // two full passes over the 5 templates
  spec.feature_dim = 80;
  const SynthDataset ds = generate_synthetic_dataset(spec, dir.path.string());
  const Waveform q1 = read_wav(ds.records[0].audio_path);
  const Waveform q6 = read_wav(ds.records[5].audio_path);  // same template again
  CHECK(q1.samples == q6.samples);
  const Waveform q2 = read_wav(ds.records[1].audio_path);
  CHECK(q1.samples != q2.samples);
}
