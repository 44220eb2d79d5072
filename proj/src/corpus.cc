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

#include "diarkit/corpus.h"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "diarkit/alignment_io.h"
#include "diarkit/feature_io.h"
#include "diarkit/scoring.h"

namespace diarkit {
namespace fs = std::filesystem;
namespace {

constexpr double kFrameSeconds = kFrameShiftMs / 1000.0;

std::ofstream OpenOut(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream OpenIn(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

fs::path File(const fs::path& dir, const std::string& id, const char* ext) {
  return dir / (id + ext);
}

}  // namespace

void WriteCorpus(const fs::path& dir, const std::vector<Recording>& recordings,
                 const SynthConfig& config) {
  fs::create_directories(dir);
  Json list = Json::array();
  for (const auto& rec : recordings) {
    WriteFrameMatrix(File(dir, rec.id, ".dkf"), rec.features);
    {
      auto out = OpenOut(File(dir, rec.id, ".words.ctm"));
      WriteWordCtm(out, rec.id, rec.alignment);
    }
    {
      auto out = OpenOut(File(dir, rec.id, ".phones.ctm"));
      WritePhoneCtm(out, rec.id, rec.alignment);
    }
    {
      auto out = OpenOut(File(dir, rec.id, ".tokens.txt"));
      WriteTokens(out, rec.tokens);
    }
    {
      auto out = OpenOut(File(dir, rec.id, ".rttm"));
      WriteRttm(out, rec.id,
                ActivityToSegments(rec.activity, kFrameSeconds, rec.speakers));
    }
    list.push_back({{"id", rec.id},
                    {"split", ToString(rec.split)},
                    {"frames", rec.num_frames()},
                    {"speakers", rec.speakers}});
  }
  Json manifest;
  manifest["recordings"] = std::move(list);
  manifest["seed"] = config.seed;
  manifest["config"] = ToJson(config);
  WriteJsonFile(dir / "manifest.json", manifest);
}

Manifest ReadManifest(const fs::path& dir) {
  const Json j = ReadJsonFile(dir / "manifest.json");
  Manifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config = j.value("config", Json::object());
    for (const auto& r : j.at("recordings")) {
      ManifestEntry e;
      e.id = r.at("id").get<std::string>();
      e.split = ParseSplit(r.at("split").get<std::string>());
      e.frames = r.at("frames").get<int>();
      e.speakers = r.at("speakers").get<std::vector<std::string>>();
      m.recordings.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed manifest in " + dir.string() + ": " + e.what());
  }
  return m;
}

void CheckSpeakerDisjoint(const Manifest& manifest) {
  std::map<std::string, Split> home;
  for (const auto& r : manifest.recordings) {
    for (const auto& s : r.speakers) {
      auto [it, inserted] = home.emplace(s, r.split);
      if (!inserted && it->second != r.split) {
        throw Error("speaker '" + s + "' appears in both " +
                    ToString(it->second) + " and " + ToString(r.split));
      }
    }
  }
}

Recording ReadRecording(const fs::path& dir, const ManifestEntry& entry) {
  Recording rec;
  rec.id = entry.id;
  rec.split = entry.split;
  rec.speakers = entry.speakers;
  rec.features = ReadFrameMatrix(File(dir, entry.id, ".dkf")).values;
  if (rec.num_frames() != entry.frames) {
    throw Error(entry.id + ": manifest says " + std::to_string(entry.frames) +
                " frames, features have " + std::to_string(rec.num_frames()));
  }
  rec.alignment = ReadAlignment(File(dir, entry.id, ".words.ctm"),
                                File(dir, entry.id, ".phones.ctm"),
                                entry.frames);
  {
    auto in = OpenIn(File(dir, entry.id, ".tokens.txt"));
    rec.tokens = ReadTokens(in);
  }
  auto in = OpenIn(File(dir, entry.id, ".rttm"));
  const auto segments = ReadRttm(in);
  auto it = segments.find(entry.id);
  rec.activity = SegmentsToActivity(
      it == segments.end() ? SegmentSet{} : it->second, entry.frames,
      kFrameSeconds, entry.speakers);
  return rec;
}

std::vector<Recording> ReadCorpus(const fs::path& dir,
                                  std::optional<Split> split) {
  const Manifest m = ReadManifest(dir);
  std::vector<Recording> out;
  for (const auto& e : m.recordings) {
    if (split && e.split != *split) continue;
    out.push_back(ReadRecording(dir, e));
  }
  return out;
}

void WriteScdFeatures(const fs::path& dir, const std::string& id,
                      const ScdFeatures& features) {
  auto out = OpenOut(File(dir, id, ".scp.txt"));
  out << std::setprecision(17);
  for (double p : features.posteriors) out << p << '\n';
  if (!out) throw Error("write failed for " + id + ".scp.txt");
  WriteFrameMatrix(File(dir, id, ".sce.dkf"), features.embeddings, 0);
}

ScdFeatures ReadScdFeatures(const fs::path& dir, const std::string& id) {
  ScdFeatures f;
  auto in = OpenIn(File(dir, id, ".scp.txt"));
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    try {
      f.posteriors.push_back(std::stod(line));
    } catch (const std::exception&) {
      throw Error("bad posterior '" + line + "' in " + id + ".scp.txt");
    }
  }
  f.embeddings = ReadFrameMatrix(File(dir, id, ".sce.dkf")).values;
  if (static_cast<Eigen::Index>(f.posteriors.size()) != f.embeddings.rows()) {
    throw Error(id + ": posterior and embedding counts differ");
  }
  return f;
}

CategoricalFrameSequence CategoricalFeature(const Recording& rec,
                                            AsrFeatureName name) {
  switch (name) {
    case AsrFeatureName::kPhones:
      return CollapsePhones(rec.alignment, PhoneTable::Default());
    case AsrFeatureName::kPositionInWord:
      return ExtractPositionInWord(rec.alignment);
    case AsrFeatureName::kWordBoundaries:
      return EncodeWordBoundaries(rec.alignment);
    case AsrFeatureName::kSpeechActivity:
      return DeriveSpeechActivity(rec.alignment);
    default:
      throw Error(ToString(name) + " is not a categorical feature");
  }
}

AsrInput BuildAsrInput(const Recording& rec, const AsrFeatureSpec& spec,
                       const ScdFeatures* scd) {
  if (spec.kind() == FeatureKind::kCategorical) {
    return CategoricalFeature(rec, spec.name);
  }
  if (scd == nullptr) {
    throw Error(rec.id + ": " + ToString(spec.name) +
                " needs speaker-change features (run scd-infer first)");
  }
  if (static_cast<int>(scd->posteriors.size()) != rec.tokens.size()) {
    throw Error(rec.id + ": speaker-change features cover " +
                std::to_string(scd->posteriors.size()) + " tokens, transcript has " +
                std::to_string(rec.tokens.size()));
  }
  const auto placement = PlaceTokens(rec.alignment, rec.tokens.WordIndices());
  if (spec.kind() == FeatureKind::kScp) {
    return BuildScpFrames(rec.alignment, placement, scd->posteriors);
  }
  if (scd->embeddings.cols() != spec.dim) {
    throw Error(rec.id + ": embeddings are " +
                std::to_string(scd->embeddings.cols()) +
                "-dimensional, model expects " + std::to_string(spec.dim));
  }
  return BuildSceFrames(rec.alignment, placement, scd->embeddings);
}

TrainingExample MakeExample(const Recording& rec, const ModelConfig& config,
                            const ScdFeatures* scd) {
  TrainingExample ex;
  ex.id = rec.id;
  ex.features = rec.features;
  ex.activity = rec.activity;
  if (ex.activity.cols() != config.num_speakers) {
    throw Error(rec.id + " has " + std::to_string(ex.activity.cols()) +
                " speakers, model expects " +
                std::to_string(config.num_speakers));
  }
  if (config.UsesAsrInput()) {
    ex.asr = BuildAsrInput(rec, *config.asr_feature, scd);
  }
  if (const AsrFeatureSpec* aux = config.AuxTarget()) {
    ex.aux_labels = CategoricalFeature(rec, aux->name);
  }
  return ex;
}

}  // namespace diarkit
