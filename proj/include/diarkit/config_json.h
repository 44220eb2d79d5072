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

#ifndef DIARKIT_CONFIG_JSON_H_
#define DIARKIT_CONFIG_JSON_H_

// JSON views of the configuration structs. Readers start from the struct's
// current values, so omitted keys keep their defaults; unknown keys are an
// error.

#include <filesystem>

#include "json.hpp"

#include "diarkit/model.h"
#include "diarkit/scd.h"
#include "diarkit/synth.h"
#include "diarkit/training.h"

namespace diarkit {

using Json = nlohmann::ordered_json;

Json ToJson(const ModelConfig& c);
Json ToJson(const TrainConfig& c);
Json ToJson(const SynthConfig& c);
Json ToJson(const ScdConfig& c);
Json ToJson(const ScdTrainConfig& c);

void FromJson(const Json& j, ModelConfig* c);
void FromJson(const Json& j, TrainConfig* c);
void FromJson(const Json& j, SynthConfig* c);
void FromJson(const Json& j, ScdConfig* c);
void FromJson(const Json& j, ScdTrainConfig* c);

// Parses a file; throws Error with the path on I/O or syntax errors.
Json ReadJsonFile(const std::filesystem::path& path);
void WriteJsonFile(const std::filesystem::path& path, const Json& j);

}  // namespace diarkit

#endif  // DIARKIT_CONFIG_JSON_H_
