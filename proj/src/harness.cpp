// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbvqa/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "sbvqa/checkpoint.hpp"
#include "sbvqa/corruption.hpp"

namespace fs = std::filesystem;

namespace sbvqa {

void SpeechAdapter::prepare_batch(std::vector<SampleInput>& batch) {
  std::size_t max_len = 0;
  for (const auto& s : batch) max_len = std::max(max_len, s.audio.size());
  for (auto& s : batch) s.audio.resize(max_len, 0.0);  // trailing zeros
}

namespace {

double clean_pass_accuracy(VqaModelAdapter& model, const std::vector<SampleInput>& samples) {
  std::size_t hits = 0;
  for (const auto& s : samples)
    if (model.predict(s).answer_index == s.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace

TrainResult train(VqaModelAdapter& model, const std::vector<SampleInput>& samples,
                  const TrainConfig& cfg,
                  const std::function<double(VqaModelAdapter&)>* selection) {
  if (samples.empty()) throw HarnessError("train: empty dataset");
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw HarnessError("train: epochs and batch_size must be >= 1");
  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

  AdamState adam(cfg.adam);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  std::ofstream curve;
  if (!cfg.out_dir.empty()) {
    curve.open((fs::path(cfg.out_dir) / "loss_curve.csv").string());
    curve << "epoch,loss,train_accuracy\n";
  }

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t hits = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      std::vector<SampleInput> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(samples[order[i]]);
      model.prepare_batch(batch);

      Tape tape;
      std::vector<TracedTensor> losses;
      losses.reserve(batch.size());
      for (const auto& s : batch) {
        TracedTensor logits = model.forward_logits(&tape, s);
        SoftmaxXent sx = softmax_xent(&tape, logits, s.label);
        losses.push_back(sx.loss);
        const std::size_t argmax = static_cast<std::size_t>(
            std::max_element(sx.probs.data.begin(), sx.probs.data.end()) -
            sx.probs.data.begin());
        if (argmax == s.label) ++hits;
      }
      TracedTensor batch_loss = mean_of(&tape, losses);
      const double loss_value = batch_loss.value->data[0];
      if (!std::isfinite(loss_value)) {
        if (!cfg.out_dir.empty())
          save_checkpoint(model.params(), (fs::path(cfg.out_dir) / "diverged.ckpt").string());
        throw HarnessError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch + 1) +
                           (cfg.out_dir.empty() ? "" : "; state dumped to diverged.ckpt"));
      }
      loss_sum += loss_value * static_cast<double>(batch.size());

      model.params().zero_grad();
      tape.backward(batch_loss);
      adam.step(model.params());
    }

    result.epoch_loss.push_back(loss_sum / static_cast<double>(samples.size()));
    result.epoch_accuracy.push_back(static_cast<double>(hits) /
                                    static_cast<double>(samples.size()));
    result.epochs_run = epoch + 1;
    if (curve)
      curve << (epoch + 1) << "," << result.epoch_loss.back() << ","
            << result.epoch_accuracy.back() << "\n";

    const bool checkpoint_now =
        !cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0;
    if (checkpoint_now) {
      const std::string path =
          (fs::path(cfg.out_dir) / ("epoch_" + std::to_string(epoch + 1) + ".ckpt")).string();
      save_checkpoint(model.params(), path);
      if (selection) {
        const double score = (*selection)(model);
        if (score > result.best_selection_accuracy) {
          result.best_selection_accuracy = score;
          result.best_checkpoint = path;
        }
      }
    }

    if (cfg.target_train_accuracy > 0.0) {
      result.final_train_accuracy = clean_pass_accuracy(model, samples);
      if (result.final_train_accuracy >= cfg.target_train_accuracy) break;
    }
  }

  if (!cfg.out_dir.empty()) {
    result.final_checkpoint = (fs::path(cfg.out_dir) / "final.ckpt").string();
    save_checkpoint(model.params(), result.final_checkpoint);
    if (selection) {
      const double score = (*selection)(model);
      if (score > result.best_selection_accuracy) {
        result.best_selection_accuracy = score;
        result.best_checkpoint = result.final_checkpoint;
      }
    }
    if (result.best_checkpoint.empty()) result.best_checkpoint = result.final_checkpoint;
  }
  return result;
}

double accuracy(const std::string& predicted, const std::vector<std::string>& answers,
                AccuracyMode mode) {
  if (answers.empty()) throw HarnessError("accuracy: empty answer list");
  if (mode == AccuracyMode::kExact) return predicted == answers.front() ? 1.0 : 0.0;
  std::size_t matches = 0;
  for (const auto& a : answers)
    if (a == predicted) ++matches;
  return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["model"] = model_name;
  j["split"] = split;
  j["noise_level"] = noise_level;
  j["all"] = all;
  j["yes_no"] = yes_no;
  j["number"] = number;
  j["other"] = other;
  j["counts"] = {{"all", n_all}, {"yes_no", n_yes_no}, {"number", n_number},
                 {"other", n_other}};
  j["missing"] = missing;
  return j.dump();
}

SamplePreparer make_speech_preparer(const std::string& audio_dir, const FeatureStore& store,
                                    double noise_level) {
  return [audio_dir, &store, noise_level](
             const QuestionRecord& r) -> std::optional<SampleInput> {
    const fs::path path =
        fs::path(audio_dir) / corrupted_file_name(r.question_id, NoiseLevel(noise_level));
    if (!fs::exists(path)) return std::nullopt;
    SampleInput s;
    s.audio = scale_amplitude(resample(read_wav(path.string()), kWorkingRate)).samples;
    s.image_feat = store.get_tensor(r.image_id);
    return s;
  };
}

SamplePreparer make_text_preparer(const Transcriber* transcriber, const Vocabulary& vocab,
                                  std::size_t max_len, const FeatureStore& store,
                                  double noise_level, bool use_original_text) {
  return [transcriber, &vocab, max_len, &store, noise_level,
          use_original_text](const QuestionRecord& r) -> std::optional<SampleInput> {
    std::string text;
    if (use_original_text) {
      text = r.question_text;
    } else {
      if (!transcriber) return std::nullopt;
      auto got = transcriber->transcribe(r.question_id, noise_level);
      if (!got) return std::nullopt;
      text = *got;
    }
    EncodedQuestion q = encode(text, vocab, max_len);
    if (q.all_masked()) return std::nullopt;  // unanswerable by text
    SampleInput s;
    s.indices = q.indices;
    s.image_feat = store.get_tensor(r.image_id);
    return s;
  };
}

std::vector<SampleInput> prepare_training_samples(const std::vector<QuestionRecord>& records,
                                                  const AnswerVocabulary& vocab,
                                                  const SamplePreparer& prepare) {
  std::vector<SampleInput> out;
  std::size_t skipped = 0;
  for (const auto& r : records) {
    const auto label = vocab.index_of(r.primary_answer());
    if (!label)
      throw HarnessError("training record " + std::to_string(r.question_id) +
                         " has an answer outside the vocabulary; run filter_train first");
    auto input = prepare(r);
    if (!input) {
      ++skipped;
      continue;
    }
    input->label = *label;
    out.push_back(std::move(*input));
  }
  if (skipped)
    std::cerr << "warning: " << skipped << " training records had no usable input\n";
  return out;
}

EvalReport evaluate(VqaModelAdapter& model, const std::vector<QuestionRecord>& records,
                    const SamplePreparer& prepare, const AnswerVocabulary& vocab,
                    AccuracyMode mode, double noise_level, const std::string& split_name,
                    const std::string& model_name) {
  if (records.empty()) throw HarnessError("evaluate: no records");
  EvalReport report;
  report.model_name = model_name;
  report.split = split_name;
  report.noise_level = noise_level;

  double sum_yn = 0.0, sum_num = 0.0, sum_other = 0.0;
  for (const auto& r : records) {
    double score = 0.0;
    auto input = prepare(r);
    if (!input) {
      ++report.missing;
    } else {
      const Prediction pred = model.predict(*input);
      score = accuracy(vocab.class_name(pred.answer_index), r.answers, mode);
    }
    switch (r.answer_type) {
      case AnswerType::kYesNo:
        sum_yn += score;
        ++report.n_yes_no;
        break;
      case AnswerType::kNumber:
        sum_num += score;
        ++report.n_number;
        break;
      case AnswerType::kOther:
        sum_other += score;
        ++report.n_other;
        break;
    }
  }
  report.n_all = records.size();
  report.all = (sum_yn + sum_num + sum_other) / static_cast<double>(report.n_all);
  report.yes_no = report.n_yes_no ? sum_yn / static_cast<double>(report.n_yes_no) : 0.0;
  report.number = report.n_number ? sum_num / static_cast<double>(report.n_number) : 0.0;
  report.other = report.n_other ? sum_other / static_cast<double>(report.n_other) : 0.0;
  if (report.missing)
    std::cerr << "warning: " << report.missing << " questions had no input at level "
              << noise_level << " and were scored 0\n";
  return report;
}

void SweepReport::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw HarnessError("cannot write sweep csv: " + path);
  os << "noise_pct,all,yn,number,other\n";
  for (const auto& r : rows)
    os << static_cast<int>(std::lround(r.noise_level * 100.0)) << "," << r.all << ","
       << r.yes_no << "," << r.number << "," << r.other << "\n";
}

SweepReport noise_sweep(VqaModelAdapter& model, const std::vector<QuestionRecord>& records,
                        const std::vector<double>& levels,
                        const std::function<SamplePreparer(double)>& preparer_for_level,
                        const AnswerVocabulary& vocab, AccuracyMode mode,
                        const std::string& split_name, const std::string& model_name) {
  std::vector<double> ordered = levels;
  std::sort(ordered.begin(), ordered.end());
  SweepReport report;
  for (double level : ordered)
    report.rows.push_back(evaluate(model, records, preparer_for_level(level), vocab, mode,
                                   level, split_name, model_name));
  return report;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw HarnessError("cannot open config: " + path);
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw HarnessError("config " + path + " line " + std::to_string(line_no) +
                         ": expected key = value");
    cfg.values_[trim(trimmed.substr(0, eq))] = trim(trimmed.substr(eq + 1));
  }
  return cfg;
}

std::string RunConfig::get_string(const std::string& key, const std::string& def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

double RunConfig::get_double(const std::string& key, double def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : std::stod(it->second);
}

std::size_t RunConfig::get_size(const std::string& key, std::size_t def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : static_cast<std::size_t>(std::stoull(it->second));
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : std::stoull(it->second);
}

bool RunConfig::get_bool(const std::string& key, bool def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw HarnessError("config key " + key + " is not a boolean: " + it->second);
}

double parse_noise_level(const std::string& text) {
  std::string t = text;
  bool percent = false;
  if (!t.empty() && t.back() == '%') {
    percent = true;
    t.pop_back();
  }
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw HarnessError("cannot parse noise level: " + text);
  }
  if (used != t.size()) throw HarnessError("cannot parse noise level: " + text);
  if (percent) v /= 100.0;
  if (!(v >= 0.0 && v <= 1.0))
    throw HarnessError("noise level " + text + " outside the valid range [0, 1]");
  return v;
}

std::vector<double> parse_noise_levels(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(parse_noise_level(item));
  }
  if (out.empty()) throw HarnessError("no noise levels in: " + csv);
  return out;
}

}  // namespace sbvqa
