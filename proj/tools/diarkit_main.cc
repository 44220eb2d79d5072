// Copyright (c) 2026 The diarkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// diarkit command line.
//
//   diarkit synth     --config c.json --out corpus/
//   diarkit train     --config c.json --corpus corpus/ --out run/
//   diarkit infer     --checkpoint run/model.dkc --corpus corpus/ --out hyp.rttm
//   diarkit score     --hyp hyp.rttm --ref corpus/ [--collar 0.25]
//   diarkit scd-train --config c.json --corpus corpus/ --out scd.dkc
//   diarkit scd-infer --checkpoint scd.dkc --corpus corpus/
//
// Config files hold optional "synth", "model", "train", "scd" and
// "scd_train" sections; command-line flags override them.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "diarkit/checkpoint.h"
#include "diarkit/config_json.h"
#include "diarkit/corpus.h"
#include "diarkit/log.h"
#include "diarkit/model.h"
#include "diarkit/scd.h"
#include "diarkit/scoring.h"
#include "diarkit/synth.h"
#include "diarkit/training.h"

namespace fs = std::filesystem;
using namespace diarkit;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  double collar = 0.25;
  std::optional<double> threshold;

  std::string corpus;
  std::string checkpoint;
  std::optional<std::string> mode;
  std::optional<std::string> feature;
  std::optional<std::string> downsampling;
  std::optional<double> alpha;
  std::optional<int> epochs;
  std::string split = "test";
  std::string hyp;
  std::string ref;
  bool no_overlap = false;
  std::string transcript;
  std::optional<int> window;
  std::optional<int> overlap;
};

Json LoadConfig(const std::string& path) {
  if (path.empty()) return Json::object();
  Json j = ReadJsonFile(path);
  if (!j.is_object()) throw Error(path + ": config must be a JSON object");
  static const std::set<std::string> kSections = {"synth", "model", "train",
                                                  "scd", "scd_train"};
  for (const auto& [key, value] : j.items()) {
    if (!kSections.count(key)) {
      throw Error(path + ": unknown config section '" + key + "'");
    }
  }
  return j;
}

template <typename T>
T Section(const Json& doc, const char* name) {
  T c;
  if (doc.contains(name)) FromJson(doc.at(name), &c);
  return c;
}

void RequireDir(const std::string& path, const char* what) {
  if (path.empty()) throw Error(std::string("--") + what + " is required");
  if (!fs::is_directory(path)) throw Error(path + " is not a directory");
}

std::optional<ScdFeatures> LoadScdIfNeeded(const ModelConfig& m,
                                           const fs::path& dir,
                                           const std::string& id) {
  if (!m.asr_feature || !m.UsesAsrInput() ||
      m.asr_feature->kind() == FeatureKind::kCategorical) {
    return std::nullopt;
  }
  return ReadScdFeatures(dir, id);
}

std::vector<TrainingExample> Examples(const fs::path& dir, Split split,
                                      const ModelConfig& m) {
  std::vector<TrainingExample> out;
  for (const auto& rec : ReadCorpus(dir, split)) {
    const auto scd = LoadScdIfNeeded(m, dir, rec.id);
    out.push_back(MakeExample(rec, m, scd ? &*scd : nullptr));
  }
  return out;
}

int RunSynth(const Options& o) {
  if (o.out.empty()) throw Error("--out is required");
  const Json doc = LoadConfig(o.config);
  SynthConfig cfg = Section<SynthConfig>(doc, "synth");
  if (o.seed) cfg.seed = *o.seed;
  cfg.Validate();
  const auto recordings = SynthCorpus(cfg);
  WriteCorpus(o.out, recordings, cfg);
  spdlog::info("wrote {} recordings to {}", recordings.size(), o.out);
  return 0;
}

int RunTrain(const Options& o) {
  RequireDir(o.corpus, "corpus");
  if (o.out.empty()) throw Error("--out is required");
  const Json doc = LoadConfig(o.config);
  ModelConfig model = Section<ModelConfig>(doc, "model");
  TrainConfig train = Section<TrainConfig>(doc, "train");
  if (o.mode) model.mode = ParseMode(*o.mode);
  if (o.downsampling) model.downsampling = ParseDownsampling(*o.downsampling);
  if (o.feature) {
    const int sce_dim = model.asr_feature ? model.asr_feature->dim : 64;
    model.asr_feature =
        AsrFeatureSpec::For(ParseAsrFeatureName(*o.feature), sce_dim > 0 ? sce_dim : 64);
  }
  if (model.mode == Mode::kBaseline) model.asr_feature.reset();
  model.Validate();
  const bool alpha_in_config =
      doc.contains("train") && doc.at("train").contains("alpha");
  if (o.alpha) {
    train.alpha = *o.alpha;
  } else if (!alpha_in_config && model.AuxTarget()) {
    train.alpha = DefaultAlpha(model.AuxTarget()->name);
  }
  if (o.epochs) {
    train.epochs = *o.epochs;
    train.average_last_k = std::min(train.average_last_k, train.epochs);
  }
  if (o.seed) train.rng_seed = *o.seed;
  if (o.threshold) train.threshold = *o.threshold;
  train.collar = o.collar;
  train.Validate();

  const auto train_set = Examples(o.corpus, Split::kTrain, model);
  const auto dev_set = Examples(o.corpus, Split::kDev, model);
  if (train_set.empty()) throw Error(o.corpus + " has no train recordings");

  fs::create_directories(o.out);
  std::ofstream metrics(fs::path(o.out) / "metrics.jsonl");
  if (!metrics) throw Error("cannot write metrics to " + o.out);
  auto sink = [&metrics](const EpochMetrics& m) {
    Json line = {{"epoch", m.epoch},     {"step", m.step},
                 {"lr", m.lr},           {"loss_der", m.loss_der},
                 {"loss_aux", m.loss_aux}, {"dev_der", m.dev_der},
                 {"dev_loss", m.dev_loss}};
    metrics << line.dump() << '\n' << std::flush;
  };
  const TrainResult result = Train(model, train_set, dev_set, train, sink);
  const Json ckpt_config = {{"model", ToJson(model)}, {"train", ToJson(train)}};
  WriteCheckpoint(fs::path(o.out) / "model.dkc", ckpt_config.dump(),
                  result.params);
  spdlog::info("saved {}", (fs::path(o.out) / "model.dkc").string());
  return 0;
}

Checkpoint LoadCheckpoint(const std::string& path, const char* section) {
  if (path.empty()) throw Error("--checkpoint is required");
  if (!fs::exists(path)) throw Error("checkpoint " + path + " does not exist");
  Checkpoint ckpt = ReadCheckpoint(path);
  const Json j = Json::parse(ckpt.config_json);
  if (!j.contains(section)) {
    throw Error(path + " is not a " + section + " checkpoint");
  }
  return ckpt;
}

int RunInfer(const Options& o) {
  RequireDir(o.corpus, "corpus");
  if (o.out.empty()) throw Error("--out is required");
  const Checkpoint ckpt = LoadCheckpoint(o.checkpoint, "model");
  ModelConfig model;
  FromJson(Json::parse(ckpt.config_json).at("model"), &model);
  const EendModel eend(model);
  const std::string diff =
      eend.InitParameters(0).FirstLayoutDifference(ckpt.params);
  if (!diff.empty()) {
    throw Error("checkpoint does not match its model config at '" + diff + "'");
  }
  const double threshold = o.threshold.value_or(0.5);
  const Split split = ParseSplit(o.split);
  std::ofstream out(o.out);
  if (!out) throw Error("cannot write " + o.out);
  int n = 0;
  for (const auto& rec : ReadCorpus(o.corpus, split)) {
    const auto scd = LoadScdIfNeeded(model, o.corpus, rec.id);
    const TrainingExample ex = MakeExample(rec, model, scd ? &*scd : nullptr);
    const EncoderOutput enc =
        eend.Infer(ckpt.params, ex.features, ex.asr ? &*ex.asr : nullptr);
    WriteRttm(out, rec.id,
              ActivityToSegments(Binarize(enc.posteriors, threshold),
                                 kSubsamplingFactor * kFrameShiftMs / 1000.0));
    ++n;
  }
  spdlog::info("wrote hypotheses for {} recordings to {}", n, o.out);
  return 0;
}

std::map<std::string, SegmentSet> LoadRttm(const std::string& path,
                                           const std::string& split) {
  if (fs::is_directory(path)) {
    std::map<std::string, SegmentSet> all;
    const Manifest m = ReadManifest(path);
    for (const auto& e : m.recordings) {
      if (!split.empty() && ToString(e.split) != split) continue;
      std::ifstream in(fs::path(path) / (e.id + ".rttm"));
      if (!in) throw Error("cannot open reference for " + e.id);
      auto segs = ReadRttm(in);
      all[e.id] = segs[e.id];
    }
    return all;
  }
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return ReadRttm(in);
}

int RunScore(const Options& o) {
  if (o.hyp.empty() || o.ref.empty()) throw Error("--hyp and --ref are required");
  const auto hyp = LoadRttm(o.hyp, "");
  const auto ref = LoadRttm(o.ref, o.split);
  std::vector<std::string> missing;
  for (const auto& [id, segs] : ref) {
    if (!hyp.count(id)) missing.push_back("missing hypothesis: " + id);
  }
  for (const auto& [id, segs] : hyp) {
    if (!ref.count(id)) missing.push_back("no reference: " + id);
  }
  if (!missing.empty()) {
    std::string msg = "recording ids do not match:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw Error(msg);
  }
  DerOptions opts;
  opts.collar = o.collar;
  opts.score_overlap = !o.no_overlap;
  std::vector<DerResult> results;
  std::cout << std::fixed << std::setprecision(3);
  for (const auto& [id, segs] : ref) {
    const DerResult r = ComputeDer(hyp.at(id), segs, opts);
    results.push_back(r);
    std::cout << id << "  DER " << 100.0 * r.der << "%  (miss "
              << 100.0 * r.missed << "%, fa " << 100.0 * r.false_alarm
              << "%, conf " << 100.0 * r.confusion << "%)\n";
  }
  const DerResult total = AggregateDer(results);
  std::cout << "OVERALL  DER " << 100.0 * total.der << "%  (miss "
            << 100.0 * total.missed << "%, fa " << 100.0 * total.false_alarm
            << "%, conf " << 100.0 * total.confusion << "%)  scored "
            << total.scored_seconds << " s, collar " << opts.collar << " s\n";
  return 0;
}

void ApplyWindowFlags(const Options& o, ScdConfig* c) {
  if (o.window) c->window = *o.window;
  if (o.overlap) c->hop = c->window - *o.overlap;
}

int RunScdTrain(const Options& o) {
  RequireDir(o.corpus, "corpus");
  if (o.out.empty()) throw Error("--out is required");
  const Json doc = LoadConfig(o.config);
  ScdConfig cfg = Section<ScdConfig>(doc, "scd");
  ScdTrainConfig train = Section<ScdTrainConfig>(doc, "scd_train");
  ApplyWindowFlags(o, &cfg);
  if (o.seed) train.rng_seed = *o.seed;
  if (o.epochs) train.epochs = *o.epochs;

  std::vector<TokenSequence> transcripts;
  int max_id = 0;
  for (const auto& rec : ReadCorpus(o.corpus, Split::kTrain)) {
    for (const auto& t : rec.tokens.tokens) max_id = std::max(max_id, t.id);
    transcripts.push_back(rec.tokens);
  }
  // Unseen dev/test tokens still need rows, so size from the lexicon.
  const Manifest manifest = ReadManifest(o.corpus);
  if (!manifest.config.empty()) {
    SynthConfig synth;
    FromJson(manifest.config, &synth);
    max_id = std::max(max_id, BuildLexicon(synth).vocab_size - 1);
  }
  cfg.vocab_size = std::max(cfg.vocab_size, max_id + 1);
  cfg.Validate();
  const ScdTrainResult result = TrainScd(cfg, transcripts, train);
  const Json ckpt_config = {{"scd", ToJson(cfg)}, {"scd_train", ToJson(train)}};
  fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  WriteCheckpoint(out, ckpt_config.dump(), result.params);
  spdlog::info("saved {}", o.out);
  return 0;
}

int RunScdInfer(const Options& o) {
  const Checkpoint ckpt = LoadCheckpoint(o.checkpoint, "scd");
  ScdConfig cfg;
  FromJson(Json::parse(ckpt.config_json).at("scd"), &cfg);
  ApplyWindowFlags(o, &cfg);
  const ScdModel model(cfg);

  if (!o.transcript.empty()) {
    if (o.out.empty()) throw Error("--out is required with --transcript");
    std::ifstream in(o.transcript);
    if (!in) throw Error("cannot open " + o.transcript);
    const TokenSequence seq = ReadTokens(in);
    const ScdFeatures f = SlidingWindowInfer(model, ckpt.params, seq);
    std::ofstream out(o.out);
    if (!out) throw Error("cannot write " + o.out);
    out << std::setprecision(9);
    for (double p : f.posteriors) out << p << '\n';
    return 0;
  }
  RequireDir(o.corpus, "corpus");
  const fs::path out_dir = o.out.empty() ? fs::path(o.corpus) : fs::path(o.out);
  fs::create_directories(out_dir);
  int n = 0;
  for (const auto& rec : ReadCorpus(o.corpus)) {
    WriteScdFeatures(out_dir, rec.id,
                     SlidingWindowInfer(model, ckpt.params, rec.tokens));
    ++n;
  }
  spdlog::info("wrote speaker-change features for {} recordings", n);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  InitLoggingFromEnv();
  CLI::App app{"diarkit: end-to-end speaker diarization with ASR features"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override the random seed");
    sub->add_option("--out", o.out, "output path");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  common(synth);

  auto* train = app.add_subcommand("train", "train a diarization model");
  common(train);
  train->add_option("--corpus", o.corpus, "corpus directory")->required();
  train->add_option("--mode", o.mode,
                    "baseline|early_fusion|late_fusion|csa|multitask");
  train->add_option("--feature", o.feature,
                    "phones|position_in_word|word_boundaries|speech_activity|"
                    "scp|sce");
  train->add_option("--downsampling", o.downsampling, "simple|conv");
  train->add_option("--alpha", o.alpha, "auxiliary loss weight");
  train->add_option("--epochs", o.epochs, "number of epochs");
  train->add_option("--collar", o.collar, "dev scoring collar (s)");
  train->add_option("--threshold", o.threshold, "dev decision threshold");

  auto* infer = app.add_subcommand("infer", "write RTTM hypotheses");
  infer->add_option("--checkpoint", o.checkpoint, "model checkpoint")
      ->required();
  infer->add_option("--corpus", o.corpus, "corpus directory")->required();
  infer->add_option("--out", o.out, "output RTTM")->required();
  infer->add_option("--split", o.split, "train|dev|test");
  infer->add_option("--threshold", o.threshold, "decision threshold");

  auto* score = app.add_subcommand("score", "diarization error rate");
  score->add_option("--hyp", o.hyp, "hypothesis RTTM")->required();
  score->add_option("--ref", o.ref, "reference RTTM or corpus directory")
      ->required();
  score->add_option("--collar", o.collar, "collar in seconds");
  score->add_option("--split", o.split,
                    "split to score when --ref is a corpus directory");
  score->add_flag("--no-overlap", o.no_overlap,
                  "skip regions with overlapping reference speech");

  auto* scd_train =
      app.add_subcommand("scd-train", "train the speaker-change tagger");
  common(scd_train);
  scd_train->add_option("--corpus", o.corpus, "corpus directory")->required();
  scd_train->add_option("--epochs", o.epochs, "number of epochs");
  scd_train->add_option("--window", o.window, "tokens per window");
  scd_train->add_option("--overlap", o.overlap, "overlap between windows");

  auto* scd_infer =
      app.add_subcommand("scd-infer", "write speaker-change features");
  scd_infer->add_option("--checkpoint", o.checkpoint, "SCD checkpoint")
      ->required();
  scd_infer->add_option("--corpus", o.corpus, "corpus directory");
  scd_infer->add_option("--transcript", o.transcript,
                        "single token transcript");
  scd_infer->add_option("--out", o.out, "output directory or file");
  scd_infer->add_option("--window", o.window, "tokens per window (20)");
  scd_infer->add_option("--overlap", o.overlap, "window overlap (10)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return RunSynth(o);
    if (*train) return RunTrain(o);
    if (*infer) return RunInfer(o);
    if (*score) return RunScore(o);
    if (*scd_train) return RunScdTrain(o);
    if (*scd_infer) return RunScdInfer(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
