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

#include "diarkit/config_json.h"

#include <fstream>

#include "doctest.h"
#include "test_util.h"

namespace diarkit {
namespace {

TEST_CASE("model config round trip") {
  ModelConfig c;
  c.mode = Mode::kLateFusion;
  c.downsampling = Downsampling::kConv;
  c.asr_feature = AsrFeatureSpec::For(AsrFeatureName::kSce, 32);
  c.aux_feature = AsrFeatureSpec::For(AsrFeatureName::kPhones);
  c.model_dim = 32;
  c.aux_layer_index = 2;
  const Json j = ToJson(c);
  CHECK(j["mode"] == "late_fusion");
  ModelConfig d;
  FromJson(j, &d);
  CHECK(ToJson(d) == j);
  CHECK(d.asr_feature->dim == 32);
  CHECK(d.aux_feature->num_classes == 54);

  ModelConfig base;
  FromJson(Json::parse(R"({"model_dim": 16})"), &base);
  CHECK(base.model_dim == 16);
  CHECK(base.encoder_layers == ModelConfig{}.encoder_layers);
  CHECK(!base.asr_feature.has_value());
}

TEST_CASE("unknown keys and bad values are errors") {
  ModelConfig m;
  CHECK_THROWS_WITH_AS(FromJson(Json::parse(R"({"model_dimm": 16})"), &m),
                       doctest::Contains("model_dimm"), Error);
  CHECK_THROWS_AS(FromJson(Json::parse(R"({"model_dim": "big"})"), &m), Error);
  CHECK_THROWS_AS(FromJson(Json::parse(R"({"mode": "fusion"})"), &m), Error);
  TrainConfig t;
  CHECK_THROWS_AS(FromJson(Json::parse(R"({"specaugment": {"x": 1}})"), &t),
                  Error);
  SynthConfig s;
  CHECK_THROWS_AS(FromJson(Json::parse("[1, 2]"), &s), Error);
}

TEST_CASE("other configs round trip") {
  TrainConfig t;
  t.alpha = 0.6;
  t.specaugment.time_mask_max = 7;
  t.rng_seed = 12345678901ull;
  TrainConfig t2;
  FromJson(ToJson(t), &t2);
  CHECK(ToJson(t2) == ToJson(t));
  CHECK(t2.rng_seed == 12345678901ull);
  SynthConfig s;
  s.num_train = 3;
  s.label_noise = 0.1;
  SynthConfig s2;
  FromJson(ToJson(s), &s2);
  CHECK(ToJson(s2) == ToJson(s));
  ScdConfig c;
  c.weight_change = 0.5;
  ScdConfig c2;
  FromJson(ToJson(c), &c2);
  CHECK(c2.weight_change == 0.5);
  ScdTrainConfig st;
  st.epochs = 3;
  ScdTrainConfig st2;
  FromJson(ToJson(st), &st2);
  CHECK(st2.epochs == 3);
}

TEST_CASE("JSON files") {
  const auto dir = testing::ScratchDir("json");
  WriteJsonFile(dir / "a.json", ToJson(SynthConfig{}));
  CHECK(ReadJsonFile(dir / "a.json") == ToJson(SynthConfig{}));
  {
    std::ofstream os(dir / "bad.json");
    os << "{not json";
  }
  CHECK_THROWS_WITH_AS(ReadJsonFile(dir / "bad.json"),
                       doctest::Contains("bad.json"), Error);
  CHECK_THROWS_AS(ReadJsonFile(dir / "none.json"), Error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace diarkit
