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

#include "diarkit/log.h"

#include <cstdlib>
#include <string>

namespace diarkit {

void InitLoggingFromEnv() {
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  const char* env = std::getenv("DIARKIT_LOG");
  if (env == nullptr) {
    spdlog::set_level(spdlog::level::info);
    return;
  }
  auto level = spdlog::level::from_str(env);
  // from_str maps unknown names to "off"; only honour an explicit "off".
  if (level == spdlog::level::off && std::string(env) != "off") {
    level = spdlog::level::info;
  }
  spdlog::set_level(level);
}

}  // namespace diarkit
