// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "sbvqa/harness.hpp"

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

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), {});
}

// Predicts the class stowed in SampleInput::label; lets evaluation be
// tested against known-perfect and known-wrong behavior.
class StubAdapter : public VqaModelAdapter {
 public:
  explicit StubAdapter(std::size_t classes, int fixed = -1)
      : classes_(classes), fixed_(fixed) {
    params_.add("unused", Tensor({1}));
  }
  TracedTensor forward_logits(Tape*, const SampleInput& input) override {
    Tensor logits({classes_});
    logits[pick(input)] = 10.0;
    return TracedTensor::from(std::move(logits));
  }
  Prediction predict(const SampleInput& input) override {
    return predict_from_logits(Tensor({classes_}, [&] {
      std::vector<double> d(classes_, 0.0);
      d[pick(input)] = 10.0;
      return d;
    }()));
  }
  ParameterSet& params() override { return params_; }

 private:
  std::size_t pick(const SampleInput& input) const {
    return fixed_ >= 0 ? static_cast<std::size_t>(fixed_) : input.label;
  }
  std::size_t classes_;
  int fixed_;
  ParameterSet params_;
};

QuestionRecord record(std::uint64_t qid, const std::string& text, const std::string& answer,
                      AnswerType type) {
  QuestionRecord r;
  r.question_id = qid;
  r.image_id = qid;
  r.question_text = text;
  r.audio_path = "unused.wav";
  r.answers = {answer};
  r.answer_type = type;
  r.split = Split::kVal;
  return r;
}

// Tiny trainable model over the image feature alone: one dense layer.
class LinearAdapter : public VqaModelAdapter {
 public:
  LinearAdapter(std::size_t dim, std::size_t classes, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    Tensor w({dim, classes});
    for (auto& v : w.data) v = dist(rng);
    params_.add("w", std::move(w));
    params_.add("b", Tensor({classes}));
  }
  TracedTensor forward_logits(Tape* tape, const SampleInput& input) override {
    TracedTensor x = TracedTensor::from(input.image_feat);
    return dense(tape, x, *params_.find("w"), *params_.find("b"), Activation::kIdentity);
  }
  Prediction predict(const SampleInput& input) override {
    return predict_from_logits(*forward_logits(nullptr, input).value);
  }
  ParameterSet& params() override { return params_; }

 private:
  ParameterSet params_;
};

std::vector<SampleInput> linear_samples(std::size_t n, std::size_t dim, std::size_t classes) {
  std::vector<SampleInput> out;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  for (std::size_t i = 0; i < n; ++i) {
    SampleInput s;
    s.label = i % classes;
    s.image_feat = Tensor({dim});
    for (auto& v : s.image_feat.data) v = dist(rng);
    s.image_feat[s.label] = 1.0;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("accuracy: exact and consensus modes") {
  CHECK(accuracy("yes", {"yes"}, AccuracyMode::kExact) == 1.0);
  CHECK(accuracy("no", {"yes"}, AccuracyMode::kExact) == 0.0);
  // 10 annotators, all matching.
  const std::vector<std::string> all_yes(10, "yes");
  CHECK(accuracy("yes", all_yes, AccuracyMode::kConsensus) == 1.0);
  CHECK(accuracy("no", all_yes, AccuracyMode::kConsensus) == 0.0);
  // Exactly 2 of 10 match -> min(2/3, 1).
  std::vector<std::string> two_match(10, "no");
  two_match[3] = two_match[7] = "cat";
  CHECK(accuracy("cat", two_match, AccuracyMode::kConsensus) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(accuracy("x", {}, AccuracyMode::kExact), HarnessError);
}

TEST_CASE("evaluate: perfect stub scores 1.0 and report is self-consistent") {
  std::vector<QuestionRecord> records{
      record(1, "is it red", "yes", AnswerType::kYesNo),
      record(2, "is it big", "no", AnswerType::kYesNo),
      record(3, "how many", "2", AnswerType::kNumber),
      record(4, "what color", "blue", AnswerType::kOther),
      record(5, "what shape", "circle", AnswerType::kOther),
  };
  const AnswerVocabulary vocab =
      AnswerVocabulary::from_classes({"yes", "no", "2", "blue", "circle"});
  SamplePreparer prepare = [&](const QuestionRecord& r) -> std::optional<SampleInput> {
    SampleInput s;
    s.label = *vocab.index_of(r.primary_answer());
    return s;
  };

  StubAdapter perfect(5);
  const EvalReport report = evaluate(perfect, records, prepare, vocab, AccuracyMode::kExact,
                                     0.0, "val", "stub");
  CHECK(report.all == 1.0);
  CHECK(report.yes_no == 1.0);
  CHECK(report.number == 1.0);
  CHECK(report.other == 1.0);
  CHECK(report.missing == 0);
  CHECK(report.n_all == 5);

  // All * N == sum of per-category accuracy * count.
  const double lhs = report.all * static_cast<double>(report.n_all);
  const double rhs = report.yes_no * report.n_yes_no + report.number * report.n_number +
                     report.other * report.n_other;
  CHECK(std::abs(lhs - rhs) < 1e-9);

  const auto j = nlohmann::json::parse(report.to_json());
  CHECK(j["all"] == 1.0);
  CHECK(j["counts"]["yes_no"] == 2);
}

TEST_CASE("evaluate: constant stub on uniform labels scores the base rate") {
  std::vector<QuestionRecord> records;
  const std::vector<std::string> answers{"a", "b", "c", "d"};
  for (std::uint64_t i = 0; i < 40; ++i)
    records.push_back(record(i + 1, "q", answers[i % 4], AnswerType::kOther));
  const AnswerVocabulary vocab = AnswerVocabulary::from_classes(answers);
  SamplePreparer prepare = [&](const QuestionRecord& r) -> std::optional<SampleInput> {
    SampleInput s;
    s.label = *vocab.index_of(r.primary_answer());
    return s;
  };
  StubAdapter constant(4, /*fixed=*/2);
  const EvalReport report = evaluate(constant, records, prepare, vocab,
                                     AccuracyMode::kExact, 0.0, "val", "stub");
  CHECK(report.all == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("evaluate: unpreparable questions are counted and scored zero") {
  std::vector<QuestionRecord> records{
      record(1, "is it red", "yes", AnswerType::kYesNo),
      record(2, "is it big", "no", AnswerType::kYesNo),
  };
  const AnswerVocabulary vocab = AnswerVocabulary::from_classes({"yes", "no"});
  SamplePreparer prepare = [&](const QuestionRecord& r) -> std::optional<SampleInput> {
    if (r.question_id == 2) return std::nullopt;
    SampleInput s;
    s.label = *vocab.index_of(r.primary_answer());
    return s;
  };
  StubAdapter perfect(2);
  const EvalReport report = evaluate(perfect, records, prepare, vocab, AccuracyMode::kExact,
                                     0.0, "val", "stub");
  CHECK(report.missing == 1);
  CHECK(report.all == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("train reduces the loss and stays reproducible") {
  TempDir d1("sbvqa_train_a"), d2("sbvqa_train_b");
  const auto samples = linear_samples(24, 6, 3);

  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 8;
  cfg.seed = 5;
  cfg.out_dir = d1.path.string();

  LinearAdapter m1(6, 3, 11);
  const TrainResult r1 = train(m1, samples, cfg);
  CHECK(r1.epochs_run == 20);
  CHECK(r1.epoch_loss.back() < r1.epoch_loss.front());
  CHECK(fs::exists(r1.final_checkpoint));

  cfg.out_dir = d2.path.string();
  LinearAdapter m2(6, 3, 11);
  const TrainResult r2 = train(m2, samples, cfg);
  CHECK(r1.epoch_loss == r2.epoch_loss);          // identical loss curves
  CHECK(r1.epoch_accuracy == r2.epoch_accuracy);
  CHECK(slurp(r1.final_checkpoint) == slurp(r2.final_checkpoint));  // identical bytes

  // A different seed shuffles differently.
  cfg.seed = 6;
  LinearAdapter m3(6, 3, 11);
  const TrainResult r3 = train(m3, samples, cfg);
  CHECK(r1.epoch_loss != r3.epoch_loss);
}

TEST_CASE("train writes periodic checkpoints and tracks the best by selection") {
  TempDir dir("sbvqa_train_ckpt");
  const auto samples = linear_samples(12, 6, 3);
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 4;
  cfg.seed = 1;
  cfg.checkpoint_every = 2;
  cfg.out_dir = dir.path.string();

  LinearAdapter model(6, 3, 2);
  std::function<double(VqaModelAdapter&)> selection = [&](VqaModelAdapter& m) {
    std::size_t hits = 0;
    for (const auto& s : samples)
      if (m.predict(s).answer_index == s.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(samples.size());
  };
  const TrainResult r = train(model, samples, cfg, &selection);
  CHECK(fs::exists(dir.path / "epoch_2.ckpt"));
  CHECK(fs::exists(dir.path / "epoch_4.ckpt"));
  CHECK(fs::exists(dir.path / "epoch_6.ckpt"));
  CHECK(fs::exists(dir.path / "final.ckpt"));
  CHECK(fs::exists(dir.path / "loss_curve.csv"));
  CHECK(!r.best_checkpoint.empty());
  CHECK(r.best_selection_accuracy >= 0.0);
}

TEST_CASE("train early-stops once the accuracy target is met") {
  TempDir dir("sbvqa_train_early");
  const auto samples = linear_samples(12, 6, 3);
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.batch_size = 4;
  cfg.seed = 3;
  cfg.out_dir = dir.path.string();
  cfg.target_train_accuracy = 0.95;
  LinearAdapter model(6, 3, 4);
  const TrainResult r = train(model, samples, cfg);
  CHECK(r.epochs_run < 500);
  CHECK(r.final_train_accuracy >= 0.95);
}

TEST_CASE("train rejects an empty dataset") {
  LinearAdapter model(6, 3, 1);
  TrainConfig cfg;
  CHECK_THROWS_AS(train(model, {}, cfg), HarnessError);
}

TEST_CASE("speech adapter pads batches with trailing zeros") {
  std::vector<SampleInput> batch(2);
  batch[0].audio = {1.0, 2.0, 3.0};
  batch[1].audio = {4.0};
  SpeechModConfig cfg;
  cfg.conv = ConvStackSpec::toy();
  cfg.lstm_hidden = 4;
  cfg.image_dim = 4;
  cfg.fused_dim = 4;
  cfg.hidden_dense = 4;
  cfg.num_answers = 2;
  SpeechMod model(cfg, 1);
  SpeechAdapter adapter(model);
  adapter.prepare_batch(batch);
  CHECK(batch[0].audio.size() == 3);
  CHECK(batch[1].audio == std::vector<double>{4.0, 0.0, 0.0});
}

TEST_CASE("noise_sweep produces one row per level in ascending order") {
  std::vector<QuestionRecord> records{record(1, "is it red", "yes", AnswerType::kYesNo)};
  const AnswerVocabulary vocab = AnswerVocabulary::from_classes({"yes", "no"});
  StubAdapter perfect(2);
  auto preparer_for = [&](double) -> SamplePreparer {
    return [&](const QuestionRecord&) -> std::optional<SampleInput> {
      SampleInput s;
      s.label = 0;
      return s;
    };
  };
  const SweepReport report = noise_sweep(perfect, records, {0.5, 0.0, 0.25}, preparer_for,
                                         vocab, AccuracyMode::kExact, "val", "stub");
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].noise_level == 0.0);
  CHECK(report.rows[2].noise_level == 0.5);

  TempDir dir("sbvqa_sweep_csv");
  const std::string csv = (dir.path / "s.csv").string();
  report.write_csv(csv);
  std::ifstream is(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "noise_pct,all,yn,number,other");
  CHECK(lines[1].rfind("0,", 0) == 0);
  CHECK(lines[3].rfind("50,", 0) == 0);
}

TEST_CASE("run config parses key = value lines with flag-style overrides") {
  TempDir dir("sbvqa_runcfg");
  const fs::path p = dir.path / "run.cfg";
  std::ofstream(p) << "model = speech\n"
                   << "epochs = 12\n"
                   << "lr = 0.01  # inline comment\n"
                   << "\n"
                   << "# full-line comment\n"
                   << "blind = true\n"
                   << "seed = 99\n";
  const RunConfig cfg = RunConfig::load(p.string());
  CHECK(cfg.get_string("model", "") == "speech");
  CHECK(cfg.get_size("epochs", 0) == 12);
  CHECK(cfg.get_double("lr", 0.0) == doctest::Approx(0.01));
  CHECK(cfg.get_bool("blind", false) == true);
  CHECK(cfg.get_u64("seed", 0) == 99);
  CHECK(cfg.get_string("missing", "fallback") == "fallback");
  CHECK(!cfg.has("missing"));

  std::ofstream(dir.path / "bad.cfg") << "not a key value line\n";
  CHECK_THROWS_AS(RunConfig::load((dir.path / "bad.cfg").string()), HarnessError);
}

TEST_CASE("noise levels parse as fractions or percent literals") {
  CHECK(parse_noise_level("0.3") == doctest::Approx(0.3));
  CHECK(parse_noise_level("30%") == doctest::Approx(0.3));
  CHECK(parse_noise_level("0") == 0.0);
  CHECK(parse_noise_level("100%") == 1.0);
  CHECK_THROWS_AS(parse_noise_level("1.5"), HarnessError);
  CHECK_THROWS_AS(parse_noise_level("150%"), HarnessError);
  CHECK_THROWS_AS(parse_noise_level("abc"), HarnessError);
  CHECK_THROWS_AS(parse_noise_level("0.3x"), HarnessError);

  CHECK(parse_noise_levels("0,0.25,50%") == std::vector<double>{0.0, 0.25, 0.5});
  CHECK_THROWS_AS(parse_noise_levels(""), HarnessError);
}
