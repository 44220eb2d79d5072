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
#include <set>

namespace diarkit {
namespace {

// Reads fields from one JSON object and rejects keys nobody asked for.
class FieldReader {
 public:
  FieldReader(const Json& j, std::string what) : j_(j), what_(std::move(what)) {
    if (!j.is_object()) throw Error(what_ + " config must be a JSON object");
  }
  ~FieldReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw Error("unknown " + what_ + " config key '" + key + "'");
      }
    }
  }

  template <typename T>
  void operator()(const char* key, T* out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      *out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(what_ + " config key '" + std::string(key) +
                  "' has the wrong type");
    }
  }

  const Json* Find(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const Json& j_;
  std::string what_;
  std::set<std::string> seen_;
};

Json FeatureName(const std::optional<AsrFeatureSpec>& spec) {
  return spec ? Json(ToString(spec->name)) : Json(nullptr);
}

}  // namespace

Json ToJson(const ModelConfig& c) {
  Json j;
  j["num_speakers"] = c.num_speakers;
  j["input_dim"] = c.input_dim;
  j["encoder_layers"] = c.encoder_layers;
  j["model_dim"] = c.model_dim;
  j["attention_heads"] = c.attention_heads;
  j["ff_dim"] = c.ff_dim;
  j["conv_kernel"] = c.conv_kernel;
  j["subsampling_channels"] = c.subsampling_channels;
  j["mode"] = ToString(c.mode);
  j["downsampling"] = ToString(c.downsampling);
  j["asr_feature"] = FeatureName(c.asr_feature);
  j["aux_feature"] = FeatureName(c.aux_feature);
  j["sce_dim"] = c.asr_feature && c.asr_feature->kind() == FeatureKind::kSce
                     ? c.asr_feature->dim
                     : 64;
  j["embedding_dim"] = c.embedding_dim;
  j["sce_projection_dim"] = c.sce_projection_dim;
  j["aux_layer_index"] = c.aux_layer_index;
  j["aux_hidden_dim"] = c.aux_hidden_dim;
  return j;
}

void FromJson(const Json& j, ModelConfig* c) {
  FieldReader r(j, "model");
  r("num_speakers", &c->num_speakers);
  r("input_dim", &c->input_dim);
  r("encoder_layers", &c->encoder_layers);
  r("model_dim", &c->model_dim);
  r("attention_heads", &c->attention_heads);
  r("ff_dim", &c->ff_dim);
  r("conv_kernel", &c->conv_kernel);
  r("subsampling_channels", &c->subsampling_channels);
  r("embedding_dim", &c->embedding_dim);
  r("sce_projection_dim", &c->sce_projection_dim);
  r("aux_layer_index", &c->aux_layer_index);
  r("aux_hidden_dim", &c->aux_hidden_dim);
  if (const Json* v = r.Find("mode")) c->mode = ParseMode(v->get<std::string>());
  if (const Json* v = r.Find("downsampling")) {
    c->downsampling = ParseDownsampling(v->get<std::string>());
  }
  int sce_dim = c->asr_feature && c->asr_feature->kind() == FeatureKind::kSce
                    ? c->asr_feature->dim
                    : 64;
  r("sce_dim", &sce_dim);
  auto feature = [&](const char* key, std::optional<AsrFeatureSpec>* out) {
    const Json* v = r.Find(key);
    if (v == nullptr) return;
    if (v->is_null()) {
      out->reset();
    } else if (v->is_string()) {
      *out = AsrFeatureSpec::For(ParseAsrFeatureName(v->get<std::string>()),
                                 sce_dim);
    } else {
      throw Error("model config key '" + std::string(key) +
                  "' must be a feature name or null");
    }
  };
  feature("asr_feature", &c->asr_feature);
  feature("aux_feature", &c->aux_feature);
  if (c->asr_feature && c->asr_feature->kind() == FeatureKind::kSce) {
    c->asr_feature->dim = sce_dim;
  }
}

Json ToJson(const TrainConfig& c) {
  Json j;
  j["alpha"] = c.alpha;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["warmup_steps"] = c.warmup_steps;
  j["lr_scale"] = c.lr_scale;
  j["average_last_k"] = c.average_last_k;
  j["specaugment"] = {{"freq_masks", c.specaugment.freq_masks},
                      {"freq_mask_max", c.specaugment.freq_mask_max},
                      {"time_masks", c.specaugment.time_masks},
                      {"time_mask_max", c.specaugment.time_mask_max}};
  j["rng_seed"] = c.rng_seed;
  j["chunk_frames"] = c.chunk_frames;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["collar"] = c.collar;
  j["threshold"] = c.threshold;
  return j;
}

void FromJson(const Json& j, TrainConfig* c) {
  FieldReader r(j, "train");
  r("alpha", &c->alpha);
  r("epochs", &c->epochs);
  r("batch_size", &c->batch_size);
  r("warmup_steps", &c->warmup_steps);
  r("lr_scale", &c->lr_scale);
  r("average_last_k", &c->average_last_k);
  r("rng_seed", &c->rng_seed);
  r("chunk_frames", &c->chunk_frames);
  r("adam_beta1", &c->adam_beta1);
  r("adam_beta2", &c->adam_beta2);
  r("adam_epsilon", &c->adam_epsilon);
  r("collar", &c->collar);
  r("threshold", &c->threshold);
  if (const Json* v = r.Find("specaugment")) {
    FieldReader s(*v, "specaugment");
    s("freq_masks", &c->specaugment.freq_masks);
    s("freq_mask_max", &c->specaugment.freq_mask_max);
    s("time_masks", &c->specaugment.time_masks);
    s("time_mask_max", &c->specaugment.time_mask_max);
  }
}

#define DIARKIT_SYNTH_FIELDS(X)                                             \
  X(num_train) X(num_dev) X(num_test) X(train_speakers) X(dev_speakers)    \
  X(test_speakers) X(min_frames) X(max_frames) X(prototype_scale)          \
  X(phone_scale) X(silence_level) X(noise_scale) X(min_turn_frames)        \
  X(mean_turn_frames) X(overlap_probability) X(max_overlap_frames)         \
  X(mean_pause_frames) X(word_pause_probability) X(vocabulary_size)        \
  X(mean_word_phones) X(max_word_phones) X(min_phone_frames)               \
  X(max_phone_frames) X(phones_per_subword) X(num_openers)                 \
  X(opener_probability) X(noise_word_probability)                         \
  X(laugh_word_probability) X(label_noise) X(seed)

Json ToJson(const SynthConfig& c) {
  Json j;
#define X(name) j[#name] = c.name;
  DIARKIT_SYNTH_FIELDS(X)
#undef X
  return j;
}

void FromJson(const Json& j, SynthConfig* c) {
  FieldReader r(j, "synth");
#define X(name) r(#name, &c->name);
  DIARKIT_SYNTH_FIELDS(X)
#undef X
}

Json ToJson(const ScdConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"window", c.window},
          {"hop", c.hop},
          {"model_dim", c.model_dim},
          {"heads", c.heads},
          {"ff_dim", c.ff_dim},
          {"layers", c.layers},
          {"weight_no_change", c.weight_no_change},
          {"weight_change", c.weight_change}};
}

void FromJson(const Json& j, ScdConfig* c) {
  FieldReader r(j, "scd");
  r("vocab_size", &c->vocab_size);
  r("window", &c->window);
  r("hop", &c->hop);
  r("model_dim", &c->model_dim);
  r("heads", &c->heads);
  r("ff_dim", &c->ff_dim);
  r("layers", &c->layers);
  r("weight_no_change", &c->weight_no_change);
  r("weight_change", &c->weight_change);
}

Json ToJson(const ScdTrainConfig& c) {
  return {{"epochs", c.epochs},
          {"windows_per_sequence", c.windows_per_sequence},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"rng_seed", c.rng_seed}};
}

void FromJson(const Json& j, ScdTrainConfig* c) {
  FieldReader r(j, "scd_train");
  r("epochs", &c->epochs);
  r("windows_per_sequence", &c->windows_per_sequence);
  r("batch_size", &c->batch_size);
  r("learning_rate", &c->learning_rate);
  r("rng_seed", &c->rng_seed);
}

Json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad JSON in " + path.string() + ": " + e.what());
  }
}

void WriteJsonFile(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace diarkit
