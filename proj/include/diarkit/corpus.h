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

#ifndef DIARKIT_CORPUS_H_
#define DIARKIT_CORPUS_H_

// On-disk corpus. Per recording <id>:
//
//   <id>.dkf          acoustic features (DKF1, T x 80)
//   <id>.words.ctm    word alignment with speaker field
//   <id>.phones.ctm   phone alignment
//   <id>.tokens.txt   sub-word transcript
//   <id>.rttm         reference segments
//
// plus manifest.json: {recordings: [{id, split, frames, speakers}], seed,
// config}. Speaker-change outputs live next to them as <id>.scp.txt (one
// posterior per token) and <id>.sce.dkf (tokens x D embeddings).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "diarkit/config_json.h"
#include "diarkit/model.h"
#include "diarkit/scd.h"
#include "diarkit/synth.h"
#include "diarkit/training.h"

namespace diarkit {

struct ManifestEntry {
  std::string id;
  Split split = Split::kTrain;
  int frames = 0;
  std::vector<std::string> speakers;
};

struct Manifest {
  std::vector<ManifestEntry> recordings;
  std::uint64_t seed = 0;
  Json config;
};

void WriteCorpus(const std::filesystem::path& dir,
                 const std::vector<Recording>& recordings,
                 const SynthConfig& config);

Manifest ReadManifest(const std::filesystem::path& dir);
// Throws Error naming a speaker that appears in two splits.
void CheckSpeakerDisjoint(const Manifest& manifest);

Recording ReadRecording(const std::filesystem::path& dir,
                        const ManifestEntry& entry);
// All recordings, or only those of `split`.
std::vector<Recording> ReadCorpus(const std::filesystem::path& dir,
                                  std::optional<Split> split = std::nullopt);

void WriteScdFeatures(const std::filesystem::path& dir, const std::string& id,
                      const ScdFeatures& features);
ScdFeatures ReadScdFeatures(const std::filesystem::path& dir,
                            const std::string& id);

// Frame-level categorical feature from the recording's alignment.
CategoricalFrameSequence CategoricalFeature(const Recording& rec,
                                            AsrFeatureName name);

// Model input for `spec`; SCP/SCE need the recording's speaker-change
// features.
AsrInput BuildAsrInput(const Recording& rec, const AsrFeatureSpec& spec,
                       const ScdFeatures* scd = nullptr);

// Everything the model config asks for: acoustics, reference, ASR input and
// auxiliary targets.
TrainingExample MakeExample(const Recording& rec, const ModelConfig& config,
                            const ScdFeatures* scd = nullptr);

}  // namespace diarkit

#endif  // DIARKIT_CORPUS_H_
