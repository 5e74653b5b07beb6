// Copyright 2026 The SBVQA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit codes: 0 success, 1 validation error
// (bad flags, malformed inputs), 2 runtime error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sbvqa/audio.hpp"
#include "sbvqa/checkpoint.hpp"
#include "sbvqa/corruption.hpp"
#include "sbvqa/dataset.hpp"
#include "sbvqa/harness.hpp"
#include "sbvqa/models.hpp"
#include "sbvqa/text.hpp"

namespace fs = std::filesystem;
using namespace sbvqa;

namespace {

constexpr int kOk = 0;
constexpr int kValidationError = 1;
constexpr int kRuntimeError = 2;

std::uint64_t env_seed() {
  const char* env = std::getenv("SBVQA_SEED");
  if (!env) return 0;
  try {
    return std::stoull(env);
  } catch (const std::exception&) {
    throw HarnessError(std::string("SBVQA_SEED is not an integer: ") + env);
  }
}

// Precedence: explicit flag > config file > SBVQA_SEED > 0.
std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value,
                           const RunConfig* cfg) {
  if (opt->count()) return flag_value;
  if (cfg && cfg->has("seed")) return cfg->get_u64("seed", 0);
  return env_seed();
}

void override_from_config(const RunConfig& cfg, const CLI::Option* opt, std::string& var,
                          const char* key) {
  if (!opt->count() && cfg.has(key)) var = cfg.get_string(key);
}
void override_from_config(const RunConfig& cfg, const CLI::Option* opt, double& var,
                          const char* key) {
  if (!opt->count() && cfg.has(key)) var = cfg.get_double(key, var);
}
void override_from_config(const RunConfig& cfg, const CLI::Option* opt, std::size_t& var,
                          const char* key) {
  if (!opt->count() && cfg.has(key)) var = cfg.get_size(key, var);
}
void override_from_config(const RunConfig& cfg, const CLI::Option* opt, bool& var,
                          const char* key) {
  if (!opt->count() && cfg.has(key)) var = cfg.get_bool(key, var);
}

// ---------------------------------------------------------------------------
// Model persistence: train writes <out>/model.json next to the checkpoints;
// evaluate and sweep rebuild the model from it.

struct ModelSpec {
  std::string kind;  // "speech" | "text"
  bool blind = false;
  std::string conv_preset = "default";  // speech only
  std::size_t lstm_hidden = 512;
  std::size_t embed_dim = 512;  // text only
  std::size_t fused_dim = 512;
  std::size_t hidden_dense = 1024;
  std::size_t image_dim = 4096;
  std::size_t max_question_len = kDefaultMaxQuestionLen;
  std::vector<std::string> answer_classes;
  std::vector<std::string> tokens;  // text only, index order 1..V
};

void save_model_spec(const ModelSpec& m, const std::string& path) {
  nlohmann::json j;
  j["model"] = m.kind;
  j["blind"] = m.blind;
  j["conv"] = m.conv_preset;
  j["lstm_hidden"] = m.lstm_hidden;
  j["embed_dim"] = m.embed_dim;
  j["fused_dim"] = m.fused_dim;
  j["hidden_dense"] = m.hidden_dense;
  j["image_dim"] = m.image_dim;
  j["max_question_len"] = m.max_question_len;
  j["answers"] = m.answer_classes;
  j["tokens"] = m.tokens;
  std::ofstream os(path);
  if (!os) throw HarnessError("cannot write " + path);
  os << j.dump(2) << "\n";
}

ModelSpec load_model_spec(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw HarnessError("cannot open model description: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw HarnessError(path + ": invalid JSON: " + e.what());
  }
  ModelSpec m;
  m.kind = j.at("model").get<std::string>();
  m.blind = j.at("blind").get<bool>();
  m.conv_preset = j.at("conv").get<std::string>();
  m.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
  m.embed_dim = j.at("embed_dim").get<std::size_t>();
  m.fused_dim = j.at("fused_dim").get<std::size_t>();
  m.hidden_dense = j.at("hidden_dense").get<std::size_t>();
  m.image_dim = j.at("image_dim").get<std::size_t>();
  m.max_question_len = j.at("max_question_len").get<std::size_t>();
  for (const auto& a : j.at("answers")) m.answer_classes.push_back(a.get<std::string>());
  for (const auto& t : j.at("tokens")) m.tokens.push_back(t.get<std::string>());
  return m;
}

ConvStackSpec conv_preset(const std::string& name) {
  if (name == "default") return ConvStackSpec::defaults();
  if (name == "toy") return ConvStackSpec::toy();
  throw HarnessError("unknown conv preset: " + name + " (expected default or toy)");
}

SpeechModConfig speech_config_of(const ModelSpec& m) {
  SpeechModConfig cfg;
  cfg.conv = conv_preset(m.conv_preset);
  cfg.lstm_hidden = m.lstm_hidden;
  cfg.image_dim = m.image_dim;
  cfg.fused_dim = m.fused_dim;
  cfg.hidden_dense = m.hidden_dense;
  cfg.num_answers = m.answer_classes.size();
  cfg.blind = m.blind;
  return cfg;
}

TextModConfig text_config_of(const ModelSpec& m) {
  TextModConfig cfg;
  cfg.vocab_size = m.tokens.size();
  cfg.embed_dim = m.embed_dim;
  cfg.lstm_hidden = m.lstm_hidden;
  cfg.image_dim = m.image_dim;
  cfg.fused_dim = m.fused_dim;
  cfg.hidden_dense = m.hidden_dense;
  cfg.num_answers = m.answer_classes.size();
  cfg.blind = m.blind;
  return cfg;
}

Vocabulary vocabulary_of(const ModelSpec& m) {
  // Vocabulary assigns indices in first-appearance order, so feeding the
  // persisted token list back one token per text restores indices 1..V.
  return Vocabulary::build(m.tokens);
}

AccuracyMode accuracy_mode_of(const std::string& name) {
  if (name == "exact") return AccuracyMode::kExact;
  if (name == "consensus") return AccuracyMode::kConsensus;
  throw HarnessError("unknown accuracy mode: " + name + " (expected exact or consensus)");
}

/// Reads the file named in the manifest record, resampled and scaled.
SamplePreparer manifest_audio_preparer(const FeatureStore& store) {
  return [&store](const QuestionRecord& r) -> std::optional<SampleInput> {
    if (!fs::exists(r.audio_path)) return std::nullopt;
    SampleInput s;
    s.audio = scale_amplitude(resample(read_wav(r.audio_path), kWorkingRate)).samples;
    s.image_feat = store.get_tensor(r.image_id);
    return s;
  };
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataArgs {
  std::string out;
  std::size_t train_count = 32;
  std::size_t val_count = 0;
  std::uint64_t seed = 0;
  std::size_t feature_dim = 4096;
  bool text_only = false;
  std::string noise_out;
  std::size_t noise_clips = 2;
  double noise_seconds = 1.0;
};

int run_gen_data(const GenDataArgs& a) {
  SynthDatasetSpec spec;
  spec.train_count = a.train_count;
  spec.val_count = a.val_count;
  spec.seed = a.seed;
  spec.feature_dim = a.feature_dim;
  spec.text_only = a.text_only;
  const SynthDataset ds = generate_synthetic_dataset(spec, a.out);
  std::cout << "wrote " << ds.records.size() << " questions (" << a.train_count
            << " train, " << a.val_count << " val), " << ds.features.size()
            << " image features of dim " << ds.features.dim() << " under " << a.out << "\n";
  if (!a.noise_out.empty()) {
    generate_noise_bank(a.noise_out, a.noise_clips, a.seed, kWorkingRate, a.noise_seconds);
    std::cout << "wrote noise bank (" << kUrban8kCategories.size() << " categories x "
              << a.noise_clips << " clips) under " << a.noise_out << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// corrupt

struct CorruptArgs {
  std::string manifest, noise_dir, out;
  std::vector<std::string> level_flags;
  std::string levels_csv;
  std::uint64_t seed = 0;
  std::string norm = "peak";
};

int run_corrupt(const CorruptArgs& a) {
  std::vector<NoiseLevel> levels;
  if (!a.level_flags.empty()) {
    for (const auto& l : a.level_flags) levels.emplace_back(parse_noise_level(l));
  } else if (!a.levels_csv.empty()) {
    for (double v : parse_noise_levels(a.levels_csv)) levels.emplace_back(v);
  } else {
    levels = default_noise_levels();
  }
  NormalizationMode mode;
  if (a.norm == "peak")
    mode = NormalizationMode::kPeak;
  else if (a.norm == "rms")
    mode = NormalizationMode::kRms;
  else
    throw HarnessError("unknown normalization: " + a.norm + " (expected peak or rms)");

  const auto records = load_manifest(a.manifest);
  std::vector<CorpusItem> items;
  items.reserve(records.size());
  for (const auto& r : records) items.push_back({r.question_id, r.audio_path});
  const NoiseBank bank = NoiseBank::load_dir(a.noise_dir);

  const CorruptionPlan plan = corrupt_corpus(items, bank, levels, a.seed, a.out, mode);
  std::cout << "corrupted " << items.size() << " questions at " << levels.size()
            << " levels into " << a.out << " (plan.jsonl records " << plan.entries.size()
            << " noise assignments)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  std::string model;
  bool blind = false;
  std::string manifest, features, audio_dir, transcripts, out;
  std::size_t epochs = 30, batch_size = 32;
  double lr = 0.001, beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8, decay = 0.0;
  std::uint64_t seed = 0;
  std::size_t answers = 0;  // 0: every distinct train answer
  std::size_t max_question_len = kDefaultMaxQuestionLen;
  std::size_t checkpoint_every = 0;
  std::string selection_split = "none";
  std::string accuracy_mode = "exact";
  double target_acc = 0.0;
  std::string conv = "default";
  std::size_t lstm_hidden = 512, embed_dim = 512, fused_dim = 512, hidden_dense = 1024;
  std::string level = "0";
};

int run_train(TrainArgs& a) {
  if (a.model != "speech" && a.model != "text")
    throw HarnessError("model must be speech or text, got: " + a.model);
  if (a.manifest.empty() || a.features.empty() || a.out.empty())
    throw HarnessError("train requires --manifest, --features and --out");
  const double level = parse_noise_level(a.level);
  const AccuracyMode acc_mode = accuracy_mode_of(a.accuracy_mode);

  const auto all_records = load_manifest(a.manifest);
  const auto train_records_full = records_of_split(all_records, Split::kTrain);
  if (train_records_full.empty()) throw HarnessError("manifest has no train records");
  const FeatureStore store = FeatureStore::load(a.features);

  std::size_t k = a.answers;
  if (k == 0) {
    std::set<std::string> distinct;
    for (const auto& r : train_records_full) distinct.insert(r.primary_answer());
    k = distinct.size();
  }
  const AnswerVocabulary answer_vocab = AnswerVocabulary::build(train_records_full, k);
  const auto train_records = filter_train(train_records_full, answer_vocab);

  ModelSpec mspec;
  mspec.kind = a.model;
  mspec.blind = a.blind;
  mspec.conv_preset = a.conv;
  mspec.lstm_hidden = a.lstm_hidden;
  mspec.embed_dim = a.embed_dim;
  mspec.fused_dim = a.fused_dim;
  mspec.hidden_dense = a.hidden_dense;
  mspec.image_dim = store.dim();
  mspec.max_question_len = a.max_question_len;
  for (std::size_t i = 0; i < answer_vocab.size(); ++i)
    mspec.answer_classes.push_back(answer_vocab.class_name(i));

  std::unique_ptr<SpeechMod> speech;
  std::unique_ptr<TextMod> text;
  std::unique_ptr<VqaModelAdapter> adapter;
  std::unique_ptr<FileTranscriber> transcriber;
  Vocabulary vocab;
  SamplePreparer preparer;

  if (a.model == "speech") {
    speech = std::make_unique<SpeechMod>(speech_config_of(mspec), a.seed);
    adapter = std::make_unique<SpeechAdapter>(*speech);
    preparer = a.audio_dir.empty() ? manifest_audio_preparer(store)
                                   : make_speech_preparer(a.audio_dir, store, level);
  } else {
    std::vector<std::string> texts;
    for (const auto& r : train_records) texts.push_back(r.question_text);
    vocab = Vocabulary::build(texts);
    for (std::size_t i = 1; i <= vocab.size(); ++i)
      mspec.tokens.push_back(vocab.token(static_cast<int>(i)));
    text = std::make_unique<TextMod>(text_config_of(mspec), a.seed);
    adapter = std::make_unique<TextAdapter>(*text);
    if (!a.transcripts.empty()) transcriber = std::make_unique<FileTranscriber>(a.transcripts);
    preparer = make_text_preparer(transcriber.get(), vocab, a.max_question_len, store, level,
                                  a.transcripts.empty());
  }

  const auto samples = prepare_training_samples(train_records, answer_vocab, preparer);
  if (samples.empty()) throw HarnessError("no usable training samples");

  TrainConfig tcfg;
  tcfg.epochs = a.epochs;
  tcfg.batch_size = a.batch_size;
  tcfg.adam = AdamConfig{a.lr, a.beta1, a.beta2, a.epsilon, a.decay};
  tcfg.seed = a.seed;
  tcfg.checkpoint_every = a.checkpoint_every;
  tcfg.out_dir = a.out;
  tcfg.target_train_accuracy = a.target_acc;

  std::function<double(VqaModelAdapter&)> selection;
  std::vector<QuestionRecord> selection_records;
  if (a.selection_split != "none") {
    selection_records = records_of_split(all_records, split_from_string(a.selection_split));
    if (selection_records.empty())
      throw HarnessError("selection split " + a.selection_split + " is empty");
    selection = [&](VqaModelAdapter& m) {
      return evaluate(m, selection_records, preparer, answer_vocab, acc_mode, level,
                      a.selection_split, a.model)
          .all;
    };
  }

  TrainResult result;
  try {
    result = train(*adapter, samples, tcfg, selection ? &selection : nullptr);
  } catch (const HarnessError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }

  save_model_spec(mspec, (fs::path(a.out) / "model.json").string());
  nlohmann::json summary;
  summary["model"] = a.model;
  summary["blind"] = a.blind;
  summary["epochs_run"] = result.epochs_run;
  summary["final_loss"] = result.epoch_loss.back();
  summary["final_epoch_accuracy"] = result.epoch_accuracy.back();
  summary["train_samples"] = samples.size();
  summary["final_checkpoint"] = result.final_checkpoint;
  summary["best_checkpoint"] = result.best_checkpoint;
  if (selection) summary["best_selection_accuracy"] = result.best_selection_accuracy;
  std::ofstream(fs::path(a.out) / "run_summary.json") << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// evaluate / sweep

struct EvalArgs {
  std::string config;
  std::string model_dir, checkpoint;
  std::string manifest, features, split = "val";
  std::string level = "0";
  std::string levels_csv;
  std::string audio_dir, transcripts;
  bool original_text = false;
  std::string accuracy_mode = "exact";
  std::string report, csv;
  std::size_t workers = 1;
};

struct LoadedModel {
  ModelSpec spec;
  std::unique_ptr<SpeechMod> speech;
  std::unique_ptr<TextMod> text;
  std::unique_ptr<VqaModelAdapter> adapter;
  Vocabulary vocab;
  AnswerVocabulary answers;
};

LoadedModel load_model(const std::string& model_dir, const std::string& checkpoint) {
  LoadedModel m;
  m.spec = load_model_spec((fs::path(model_dir) / "model.json").string());
  m.answers = AnswerVocabulary::from_classes(m.spec.answer_classes);
  const std::string ckpt =
      checkpoint.empty() ? (fs::path(model_dir) / "final.ckpt").string() : checkpoint;
  if (m.spec.kind == "speech") {
    m.speech = std::make_unique<SpeechMod>(speech_config_of(m.spec), 0);
    load_checkpoint(m.speech->params(), ckpt);
    m.adapter = std::make_unique<SpeechAdapter>(*m.speech);
  } else if (m.spec.kind == "text") {
    m.vocab = vocabulary_of(m.spec);
    m.text = std::make_unique<TextMod>(text_config_of(m.spec), 0);
    load_checkpoint(m.text->params(), ckpt);
    m.adapter = std::make_unique<TextAdapter>(*m.text);
  } else {
    throw HarnessError("model.json names unknown model kind: " + m.spec.kind);
  }
  return m;
}

SamplePreparer preparer_for(const LoadedModel& m, const EvalArgs& a, const FeatureStore& store,
                            const Transcriber* transcriber, double level) {
  if (m.spec.kind == "speech") {
    if (a.audio_dir.empty()) {
      if (level != 0.0)
        throw HarnessError("evaluating speech at noise level > 0 requires --audio-dir "
                           "with corrupted files");
      return manifest_audio_preparer(store);
    }
    return make_speech_preparer(a.audio_dir, store, level);
  }
  const bool use_original = a.original_text || (a.transcripts.empty() && level == 0.0);
  if (!use_original && !transcriber)
    throw HarnessError("evaluating text at noise level > 0 requires --transcripts");
  return make_text_preparer(transcriber, m.vocab, m.spec.max_question_len, store, level,
                            use_original);
}

int run_evaluate(const EvalArgs& a, bool sweep) {
  if (a.model_dir.empty() || a.manifest.empty() || a.features.empty())
    throw HarnessError("evaluate requires --model-dir, --manifest and --features");
  std::vector<double> levels;
  if (sweep) {
    levels = parse_noise_levels(a.levels_csv.empty() ? "0,0.1,0.2,0.3,0.4,0.5"
                                                     : a.levels_csv);
  } else {
    levels.push_back(parse_noise_level(a.level));
  }
  const AccuracyMode acc_mode = accuracy_mode_of(a.accuracy_mode);

  LoadedModel model = load_model(a.model_dir, a.checkpoint);
  const FeatureStore store = FeatureStore::load(a.features);
  const auto records = records_of_split(load_manifest(a.manifest), split_from_string(a.split));
  if (records.empty()) throw HarnessError("split " + a.split + " has no records");
  std::unique_ptr<FileTranscriber> transcriber;
  if (!a.transcripts.empty()) transcriber = std::make_unique<FileTranscriber>(a.transcripts);

  const std::string tag = model.spec.kind + (model.spec.blind ? " (blind)" : "");
  if (!sweep) {
    const EvalReport report =
        evaluate(*model.adapter, records,
                 preparer_for(model, a, store, transcriber.get(), levels[0]), model.answers,
                 acc_mode, levels[0], a.split, tag);
    std::cout << report.to_json() << "\n";
    if (!a.report.empty()) std::ofstream(a.report) << report.to_json() << "\n";
    return kOk;
  }

  const SweepReport report = noise_sweep(
      *model.adapter, records, levels,
      [&](double level) { return preparer_for(model, a, store, transcriber.get(), level); },
      model.answers, acc_mode, a.split, tag);
  for (const auto& row : report.rows) std::cout << row.to_json() << "\n";
  if (!a.csv.empty()) {
    report.write_csv(a.csv);
    std::cout << "wrote " << a.csv << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// wer

std::vector<std::pair<std::uint64_t, std::string>> read_transcript_file(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw HarnessError("cannot open " + path);
  std::vector<std::pair<std::uint64_t, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t synthetic_id = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[line.find_first_not_of(" \t\r")] == '{') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw HarnessError(path + " line " + std::to_string(line_no) + ": " + e.what());
      }
      out.emplace_back(j.at("question_id").get<std::uint64_t>(),
                       j.at("text").get<std::string>());
    } else {
      out.emplace_back(++synthetic_id, line);  // plain text: pair by line number
    }
  }
  return out;
}

int run_wer(const std::string& ref_path, const std::string& hyp_path) {
  const auto refs = read_transcript_file(ref_path);
  const auto hyps = read_transcript_file(hyp_path);
  std::unordered_map<std::uint64_t, std::string> hyp_by_id(hyps.begin(), hyps.end());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::size_t unmatched = 0;
  for (const auto& [id, text] : refs) {
    auto it = hyp_by_id.find(id);
    if (it == hyp_by_id.end()) {
      ++unmatched;
      continue;
    }
    pairs.emplace_back(text, it->second);
  }
  if (pairs.empty()) throw HarnessError("no reference/hypothesis pairs matched by id");
  if (unmatched)
    std::cerr << "warning: " << unmatched << " references had no hypothesis and were skipped\n";
  const WerBreakdown b = wer_corpus(pairs);
  std::cout << "WER " << b.wer() << " (S=" << b.substitutions << " D=" << b.deletions
            << " I=" << b.insertions << " N=" << b.ref_len << ", " << pairs.size()
            << " pairs)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// zs-split

int run_zs_split(const std::string& manifest, const std::string& out) {
  const auto records = load_manifest(manifest);
  const auto train = records_of_split(records, Split::kTrain);
  const auto val = records_of_split(records, Split::kVal);
  if (val.empty()) throw HarnessError("manifest has no val records");
  const SplitSpec spec = zero_shot_split(train, val);
  if (!out.empty()) {
    std::ofstream os(out);
    if (!os) throw HarnessError("cannot write " + out);
    for (std::uint64_t id : spec.zero_shot_ids) os << id << "\n";
  }
  std::cout << "val questions: " << val.size() << " -> zero-shot: "
            << spec.zero_shot_ids.size() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// inspect

int run_inspect(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    std::cerr << "error: cannot open " << path << "\n";
    return kValidationError;
  }
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  is.close();
  const std::string m(magic, 4);

  if (m == "RIFF") {
    const Waveform w = read_wav(path);
    double peak = 0.0;
    for (double v : w.samples) peak = std::max(peak, std::abs(v));
    std::cout << path << ": " << w.samples.size() << " samples, " << w.rate << " Hz, "
              << static_cast<double>(w.samples.size()) / w.rate << " s, peak " << peak
              << "\n";
    return kOk;
  }
  if (m == "SBVQ") {
    const auto entries = read_checkpoint(path);
    std::size_t total = 0;
    for (const auto& e : entries) {
      std::cout << e.name << " " << shape_string(e.shape) << " = " << e.values.size()
                << "\n";
      total += e.values.size();
    }
    std::cout << entries.size() << " tensors, " << total << " parameters\n";
    return kOk;
  }
  if (m == "VQAF") {
    const FeatureStore store = FeatureStore::load(path);
    std::cout << path << ": " << store.size() << " image features of dim " << store.dim()
              << "\n";
    return kOk;
  }
  if (m[0] == '{') {  // JSON-lines manifest
    const auto records = load_manifest(path);
    std::size_t train = 0, val = 0, test_dev = 0;
    for (const auto& r : records) {
      if (r.split == Split::kTrain) ++train;
      else if (r.split == Split::kVal) ++val;
      else ++test_dev;
    }
    std::cout << path << ": " << records.size() << " records (train " << train << ", val "
              << val << ", test-dev " << test_dev << ")\n";
    return kOk;
  }
  std::cerr << "error: " << path << " has no recognized magic (RIFF, SBVQ, VQAF or JSONL)\n";
  return kValidationError;
}

bool is_validation_error(const std::exception& e) {
  return dynamic_cast<const DatasetError*>(&e) || dynamic_cast<const CorruptionError*>(&e) ||
         dynamic_cast<const AudioError*>(&e) || dynamic_cast<const TextError*>(&e) ||
         dynamic_cast<const CheckpointError*>(&e) || dynamic_cast<const HarnessError*>(&e);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speech-based visual question answering laboratory"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--train-count", gen.train_count, "Training questions");
  gen_cmd->add_option("--val-count", gen.val_count, "Validation questions");
  auto* gen_seed = gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--feature-dim", gen.feature_dim, "Image feature dimension");
  gen_cmd->add_flag("--text-only", gen.text_only,
                    "Answers decidable from the question alone");
  gen_cmd->add_option("--noise-out", gen.noise_out, "Also write a noise bank here");
  gen_cmd->add_option("--noise-clips", gen.noise_clips, "Clips per noise category");
  gen_cmd->add_option("--noise-seconds", gen.noise_seconds, "Noise clip duration");

  CorruptArgs cor;
  auto* cor_cmd = app.add_subcommand("corrupt", "Mix noise into a spoken-question corpus");
  cor_cmd->add_option("--manifest", cor.manifest, "Dataset manifest (JSONL)")->required();
  cor_cmd->add_option("--noise-dir", cor.noise_dir, "Directory of noise WAVs")->required();
  cor_cmd->add_option("--out", cor.out, "Output directory")->required();
  cor_cmd->add_option("--level", cor.level_flags,
                      "Noise level, fraction or percent (repeatable)");
  cor_cmd->add_option("--levels", cor.levels_csv, "Comma-separated noise levels");
  auto* cor_seed = cor_cmd->add_option("--seed", cor.seed, "Noise-assignment seed");
  cor_cmd->add_option("--norm", cor.norm, "Normalization: peak or rms");

  TrainArgs tra;
  auto* tra_cmd = app.add_subcommand("train", "Train a model");
  tra_cmd->add_option("--config", tra.config, "key = value config file");
  auto* t_model = tra_cmd->add_option("--model", tra.model, "speech or text");
  auto* t_blind = tra_cmd->add_flag("--blind", tra.blind, "Drop the image branch");
  auto* t_manifest = tra_cmd->add_option("--manifest", tra.manifest, "Dataset manifest");
  auto* t_features = tra_cmd->add_option("--features", tra.features, "Feature store");
  auto* t_audio = tra_cmd->add_option("--audio-dir", tra.audio_dir,
                                      "Corrupted-audio dir (default: manifest audio)");
  auto* t_trans = tra_cmd->add_option("--transcripts", tra.transcripts,
                                      "Transcript JSONL (default: original text)");
  auto* t_out = tra_cmd->add_option("--out", tra.out, "Output directory");
  auto* t_epochs = tra_cmd->add_option("--epochs", tra.epochs, "Training epochs");
  auto* t_batch = tra_cmd->add_option("--batch-size", tra.batch_size, "Batch size");
  auto* t_lr = tra_cmd->add_option("--lr", tra.lr, "Adam learning rate");
  auto* t_b1 = tra_cmd->add_option("--beta1", tra.beta1, "Adam beta1");
  auto* t_b2 = tra_cmd->add_option("--beta2", tra.beta2, "Adam beta2");
  auto* t_eps = tra_cmd->add_option("--epsilon", tra.epsilon, "Adam epsilon");
  auto* t_decay = tra_cmd->add_option("--decay", tra.decay, "Adam lr decay");
  auto* t_seed = tra_cmd->add_option("--seed", tra.seed, "RNG seed");
  tra_cmd->add_option("--answers", tra.answers,
                      "Answer classes (0 = every distinct train answer)");
  auto* t_maxlen = tra_cmd->add_option("--max-question-len", tra.max_question_len,
                                       "Token-sequence length cap");
  tra_cmd->add_option("--checkpoint-every", tra.checkpoint_every,
                      "Checkpoint cadence in epochs (0 = final only)");
  auto* t_sel = tra_cmd->add_option("--selection-split", tra.selection_split,
                                    "Best-checkpoint selection split or none");
  auto* t_accm = tra_cmd->add_option("--accuracy-mode", tra.accuracy_mode,
                                     "exact or consensus");
  tra_cmd->add_option("--target-acc", tra.target_acc,
                      "Stop when train accuracy reaches this value");
  tra_cmd->add_option("--conv", tra.conv, "Conv stack preset: default or toy");
  tra_cmd->add_option("--lstm-hidden", tra.lstm_hidden, "LSTM hidden size");
  tra_cmd->add_option("--embed-dim", tra.embed_dim, "Token embedding size (text)");
  tra_cmd->add_option("--fused-dim", tra.fused_dim, "Fusion width");
  tra_cmd->add_option("--hidden-dense", tra.hidden_dense, "Pre-output dense width");
  tra_cmd->add_option("--level", tra.level, "Noise level of the training inputs");

  EvalArgs eva;
  auto* eva_cmd = app.add_subcommand("evaluate", "Evaluate a trained model");
  EvalArgs swe;
  auto* swe_cmd = app.add_subcommand("sweep", "Evaluate one model across noise levels");
  for (auto [cmd, args] : {std::pair{eva_cmd, &eva}, std::pair{swe_cmd, &swe}}) {
    cmd->add_option("--config", args->config, "key = value config file");
    cmd->add_option("--model-dir", args->model_dir, "Training output dir (model.json)");
    cmd->add_option("--checkpoint", args->checkpoint,
                    "Checkpoint path (default <model-dir>/final.ckpt)");
    cmd->add_option("--manifest", args->manifest, "Dataset manifest");
    cmd->add_option("--features", args->features, "Feature store");
    cmd->add_option("--split", args->split, "train, val or test-dev");
    cmd->add_option("--audio-dir", args->audio_dir, "Corrupted-audio dir (speech)");
    cmd->add_option("--transcripts", args->transcripts, "Transcript JSONL (text)");
    cmd->add_flag("--original-text", args->original_text,
                  "Use manifest question text instead of transcripts");
    cmd->add_option("--accuracy-mode", args->accuracy_mode, "exact or consensus");
    cmd->add_option("--workers", args->workers,
                    "Worker-pool cap; results are independent of it")
        ->check(CLI::PositiveNumber);
  }
  eva_cmd->add_option("--level", eva.level, "Noise level, fraction or percent");
  eva_cmd->add_option("--report", eva.report, "Write the JSON report here");
  swe_cmd->add_option("--levels", swe.levels_csv, "Comma-separated noise levels");
  swe_cmd->add_option("--csv", swe.csv, "Write the sweep CSV here");

  std::string wer_ref, wer_hyp;
  auto* wer_cmd = app.add_subcommand("wer", "Score hypotheses against references");
  wer_cmd->add_option("--ref", wer_ref, "References (JSONL or plain lines)")->required();
  wer_cmd->add_option("--hyp", wer_hyp, "Hypotheses (JSONL or plain lines)")->required();

  std::string zs_manifest, zs_out;
  auto* zs_cmd = app.add_subcommand("zs-split", "List val questions unseen in train");
  zs_cmd->add_option("--manifest", zs_manifest, "Dataset manifest")->required();
  zs_cmd->add_option("--out", zs_out, "Write question ids here, one per line");

  std::string inspect_path;
  auto* ins_cmd = app.add_subcommand("inspect", "Summarize a checkpoint, WAV or manifest");
  ins_cmd->add_option("file", inspect_path, "File to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidationError;
  }

  try {
    if (*gen_cmd) {
      gen.seed = resolve_seed(gen_seed, gen.seed, nullptr);
      return run_gen_data(gen);
    }
    if (*cor_cmd) {
      cor.seed = resolve_seed(cor_seed, cor.seed, nullptr);
      return run_corrupt(cor);
    }
    if (*tra_cmd) {
      RunConfig cfg;
      if (!tra.config.empty()) cfg = RunConfig::load(tra.config);
      override_from_config(cfg, t_model, tra.model, "model");
      override_from_config(cfg, t_blind, tra.blind, "blind");
      override_from_config(cfg, t_manifest, tra.manifest, "manifest");
      override_from_config(cfg, t_features, tra.features, "features");
      override_from_config(cfg, t_audio, tra.audio_dir, "audio_dir");
      override_from_config(cfg, t_trans, tra.transcripts, "transcripts");
      override_from_config(cfg, t_out, tra.out, "out_dir");
      override_from_config(cfg, t_epochs, tra.epochs, "epochs");
      override_from_config(cfg, t_batch, tra.batch_size, "batch_size");
      override_from_config(cfg, t_lr, tra.lr, "lr");
      override_from_config(cfg, t_b1, tra.beta1, "beta1");
      override_from_config(cfg, t_b2, tra.beta2, "beta2");
      override_from_config(cfg, t_eps, tra.epsilon, "epsilon");
      override_from_config(cfg, t_decay, tra.decay, "decay");
      override_from_config(cfg, t_maxlen, tra.max_question_len, "max_question_len");
      override_from_config(cfg, t_sel, tra.selection_split, "selection_split");
      override_from_config(cfg, t_accm, tra.accuracy_mode, "accuracy_mode");
      tra.seed = resolve_seed(t_seed, tra.seed, &cfg);
      return run_train(tra);
    }
    if (*eva_cmd || *swe_cmd) {
      EvalArgs& args = *eva_cmd ? eva : swe;
      if (!args.config.empty()) {
        const RunConfig cfg = RunConfig::load(args.config);
        // The eval flags mirror train config keys; flags always win.
        auto fill = [&](std::string& var, const char* key) {
          if (var.empty() && cfg.has(key)) var = cfg.get_string(key);
        };
        fill(args.model_dir, "out_dir");
        fill(args.manifest, "manifest");
        fill(args.features, "features");
        fill(args.audio_dir, "audio_dir");
        fill(args.transcripts, "transcripts");
        if (*swe_cmd) fill(args.levels_csv, "noise_levels");
      }
      return run_evaluate(args, swe_cmd->parsed());
    }
    if (*wer_cmd) return run_wer(wer_ref, wer_hyp);
    if (*zs_cmd) return run_zs_split(zs_manifest, zs_out);
    if (*ins_cmd) return run_inspect(inspect_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e) ? kValidationError : kRuntimeError;
  }
  return kValidationError;
}
