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

#include "diarkit/model.h"

#include <array>
#include <utility>

namespace diarkit {
namespace {

constexpr std::array<std::pair<Mode, const char*>, 5> kModeNames{{
    {Mode::kBaseline, "baseline"},
    {Mode::kEarlyFusion, "early_fusion"},
    {Mode::kLateFusion, "late_fusion"},
    {Mode::kCsa, "csa"},
    {Mode::kMultitask, "multitask"},
}};

constexpr std::array<std::pair<AsrFeatureName, const char*>, 6>
    kFeatureNames{{
        {AsrFeatureName::kPhones, "phones"},
        {AsrFeatureName::kPositionInWord, "position_in_word"},
        {AsrFeatureName::kWordBoundaries, "word_boundaries"},
        {AsrFeatureName::kSpeechActivity, "speech_activity"},
        {AsrFeatureName::kScp, "scp"},
        {AsrFeatureName::kSce, "sce"},
    }};

// Kernel sizes of the two subsampling stages, (time, freq).
struct SubsamplingKernels {
  int time1, freq1, time2, freq2;
};
constexpr SubsamplingKernels kAcousticKernels{3, 3, 7, 7};
constexpr SubsamplingKernels kAsrKernels{3, 3, 7, 3};

int StrideTwo(int n, int kernel) {
  const int pad = (kernel - 1) / 2;
  return (n + 2 * pad - kernel) / 2 + 1;
}

int SubsampledFreq(int freq, const SubsamplingKernels& k) {
  return StrideTwo(StrideTwo(freq, k.freq1), k.freq2);
}

ag::Var ConvStack(ParamBinder& p, const std::string& prefix, ag::Var x,
                  int channels, const SubsamplingKernels& k) {
  const int T = static_cast<int>(x.rows());
  if (T < 2 * kSubsamplingFactor) {
    throw Error("sequence of " + std::to_string(T) +
                " frames is too short to subsample (need >= 8)");
  }
  const ag::MapShape in{1, T, static_cast<int>(x.cols())};
  const ag::Conv2dGeometry g1{channels, k.time1, k.freq1, 2, 2};
  const ag::MapShape s1 = ag::Conv2dOutputShape(in, g1);
  ag::Var h = ag::DepthwiseConv2d(x, in, g1, p(prefix + ".dw1.weight"),
                                  p(prefix + ".dw1.bias"));
  h = ag::Silu(ag::PointwiseConv2d(h, s1, p(prefix + ".pw1.weight"),
                                   p(prefix + ".pw1.bias")));
  const ag::Conv2dGeometry g2{1, k.time2, k.freq2, 2, 2};
  const ag::MapShape s2 = ag::Conv2dOutputShape(s1, g2);
  h = ag::DepthwiseConv2d(h, s1, g2, p(prefix + ".dw2.weight"),
                          p(prefix + ".dw2.bias"));
  h = ag::Silu(ag::PointwiseConv2d(h, s2, p(prefix + ".pw2.weight"),
                                   p(prefix + ".pw2.bias")));
  return ag::Linear(h, p(prefix + ".out.weight"), p(prefix + ".out.bias"));
}

void InitConvStack(ParameterBuilder& b, const std::string& prefix,
                   int in_freq, int channels, const SubsamplingKernels& k,
                   int out_dim) {
  const int k1 = k.time1 * k.freq1;
  const int k2 = k.time2 * k.freq2;
  b.Glorot(prefix + ".dw1.weight", channels, k1, k1, k1);
  b.Constant(prefix + ".dw1.bias", 1, channels, 0.0);
  b.Glorot(prefix + ".pw1.weight", channels, channels);
  b.Constant(prefix + ".pw1.bias", 1, channels, 0.0);
  b.Glorot(prefix + ".dw2.weight", channels, k2, k2, k2);
  b.Constant(prefix + ".dw2.bias", 1, channels, 0.0);
  b.Glorot(prefix + ".pw2.weight", channels, channels);
  b.Constant(prefix + ".pw2.bias", 1, channels, 0.0);
  const int flat = channels * SubsampledFreq(in_freq, k);
  b.Glorot(prefix + ".out.weight", flat, out_dim);
  b.Constant(prefix + ".out.bias", 1, out_dim, 0.0);
}

std::string LayerPrefix(int layer) {
  return "encoder.layer" + std::to_string(layer);
}

}  // namespace

std::string ToString(Mode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "?";
}

std::string ToString(Downsampling d) {
  return d == Downsampling::kSimple ? "simple" : "conv";
}

std::string ToString(AsrFeatureName name) {
  for (const auto& [n, s] : kFeatureNames) {
    if (n == name) return s;
  }
  return "?";
}

Mode ParseMode(const std::string& s) {
  for (const auto& [m, name] : kModeNames) {
    if (s == name) return m;
  }
  throw Error("unknown mode '" + s + "'");
}

Downsampling ParseDownsampling(const std::string& s) {
  if (s == "simple") return Downsampling::kSimple;
  if (s == "conv") return Downsampling::kConv;
  throw Error("unknown downsampling '" + s + "'");
}

AsrFeatureName ParseAsrFeatureName(const std::string& s) {
  for (const auto& [n, name] : kFeatureNames) {
    if (s == name) return n;
  }
  throw Error("unknown ASR feature '" + s + "'");
}

FeatureKind AsrFeatureSpec::kind() const {
  switch (name) {
    case AsrFeatureName::kScp: return FeatureKind::kScp;
    case AsrFeatureName::kSce: return FeatureKind::kSce;
    default: return FeatureKind::kCategorical;
  }
}

AsrFeatureSpec AsrFeatureSpec::For(AsrFeatureName name, int sce_dim) {
  switch (name) {
    case AsrFeatureName::kPhones: return {name, 54, 0};
    case AsrFeatureName::kPositionInWord:
      return {name, kNumPositionTags, 0};
    case AsrFeatureName::kWordBoundaries:
      return {name, kNumBoundaryClasses, 0};
    case AsrFeatureName::kSpeechActivity: return {name, 2, 0};
    case AsrFeatureName::kScp: return {name, 0, 2};
    case AsrFeatureName::kSce: return {name, 0, sce_dim};
  }
  throw Error("unhandled ASR feature");
}

void ModelConfig::Validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw Error("invalid model config: " + msg);
  };
  require(num_speakers >= 1, "num_speakers must be >= 1");
  require(input_dim >= 1, "input_dim must be >= 1");
  require(encoder_layers >= 1, "encoder_layers must be >= 1");
  require(model_dim >= 1 && attention_heads >= 1 &&
              model_dim % attention_heads == 0,
          "model_dim must be a positive multiple of attention_heads");
  require(ff_dim >= 1, "ff_dim must be >= 1");
  require(conv_kernel >= 1 && conv_kernel % 2 == 1,
          "conv_kernel must be odd");
  require(subsampling_channels >= 1, "subsampling_channels must be >= 1");
  require(embedding_dim >= 1 && sce_projection_dim >= 1 &&
              aux_hidden_dim >= 1,
          "feature widths must be >= 1");
  require(aux_layer_index >= 0 && aux_layer_index <= encoder_layers,
          "aux_layer_index must lie in [1, encoder_layers]");
  if (mode != Mode::kBaseline) {
    require(asr_feature.has_value(),
            "mode " + ToString(mode) + " needs an asr_feature");
    const auto kind = asr_feature->kind();
    if (kind == FeatureKind::kCategorical) {
      require(asr_feature->num_classes >= 1, "num_classes must be >= 1");
    } else {
      require(asr_feature->dim >= 1, "feature dim must be >= 1");
    }
    if (kind == FeatureKind::kScp) {
      require(asr_feature->dim == 2, "SCP features are 2-dimensional");
    }
  }
  if (mode == Mode::kMultitask) {
    require(asr_feature->kind() == FeatureKind::kCategorical,
            "multitask needs a categorical feature, not " +
                ToString(asr_feature->name));
    require(!aux_feature.has_value(),
            "multitask already predicts asr_feature; drop aux_feature");
  }
  if (UsesAsrInput() && downsampling == Downsampling::kConv) {
    require(asr_feature->kind() != FeatureKind::kScp,
            "SCP features do not support conv downsampling");
  }
  if (aux_feature.has_value()) {
    require(mode != Mode::kBaseline,
            "aux_feature needs a fusion or csa mode; use multitask instead");
    require(aux_feature->kind() == FeatureKind::kCategorical &&
                aux_feature->num_classes >= 1,
            "aux_feature must be categorical");
  }
}

bool ModelConfig::UsesAsrInput() const {
  return mode == Mode::kEarlyFusion || mode == Mode::kLateFusion ||
         mode == Mode::kCsa;
}

bool ModelConfig::HasAuxHead() const { return AuxTarget() != nullptr; }

const AsrFeatureSpec* ModelConfig::AuxTarget() const {
  if (mode == Mode::kMultitask && asr_feature) return &*asr_feature;
  if (aux_feature) return &*aux_feature;
  return nullptr;
}

int ModelConfig::AuxLayer() const {
  return aux_layer_index == 0 ? encoder_layers : aux_layer_index;
}

int ModelConfig::TransformedAsrDim() const {
  if (!asr_feature) return 0;
  switch (asr_feature->kind()) {
    case FeatureKind::kCategorical: return embedding_dim;
    case FeatureKind::kSce: return sce_projection_dim;
    case FeatureKind::kScp: return asr_feature->dim;
  }
  return 0;
}

int AsrInputFrames(const AsrInput& input) {
  return std::visit([](const auto& s) { return s.num_frames(); }, input);
}

int SubsampledLength(int frames) {
  return (frames + kSubsamplingFactor - 1) / kSubsamplingFactor;
}

ag::Var ConvSubsampleAcoustic(ParamBinder& p, const ModelConfig& cfg,
                              ag::Var frames) {
  if (frames.cols() != cfg.input_dim) {
    throw Error("acoustic input has " + std::to_string(frames.cols()) +
                " bins, config expects " + std::to_string(cfg.input_dim));
  }
  return ConvStack(p, "subsample.acoustic", frames, cfg.subsampling_channels,
                   kAcousticKernels);
}

ag::Var ConvSubsampleAsr(ParamBinder& p, const ModelConfig& cfg,
                         ag::Var features) {
  if (features.cols() != cfg.TransformedAsrDim()) {
    throw Error("ASR features have width " + std::to_string(features.cols()) +
                ", expected " + std::to_string(cfg.TransformedAsrDim()));
  }
  return ConvStack(p, "subsample.asr", features, cfg.subsampling_channels,
                   kAsrKernels);
}

ag::Var TransformAsrFeatures(ParamBinder& p, const ModelConfig& cfg,
                             const AsrInput& raw) {
  if (!cfg.asr_feature) throw Error("config has no ASR feature");
  const AsrFeatureSpec& spec = *cfg.asr_feature;
  ag::Tape& tape = p.tape();
  switch (spec.kind()) {
    case FeatureKind::kCategorical: {
      const auto* seq = std::get_if<CategoricalFrameSequence>(&raw);
      if (seq == nullptr) {
        throw Error("feature " + ToString(spec.name) +
                    " expects categorical input");
      }
      if (seq->num_classes != spec.num_classes) {
        throw Error("feature has " + std::to_string(seq->num_classes) +
                    " classes, config expects " +
                    std::to_string(spec.num_classes));
      }
      return ag::Embedding(p("asr_transform.embedding"), seq->labels);
    }
    case FeatureKind::kScp: {
      const auto* seq = std::get_if<ScpFrameSequence>(&raw);
      if (seq == nullptr) throw Error("feature scp expects SCP input");
      Matrix m(seq->num_frames(), 2);
      for (int t = 0; t < seq->num_frames(); ++t) {
        m(t, 0) = seq->frames[t].posterior;
        m(t, 1) = seq->frames[t].non_speech;
      }
      return tape.Constant(std::move(m));
    }
    case FeatureKind::kSce: {
      const auto* seq = std::get_if<SceFrameSequence>(&raw);
      if (seq == nullptr) throw Error("feature sce expects SCE input");
      if (seq->values.cols() != spec.dim) {
        throw Error("SCE input width " + std::to_string(seq->values.cols()) +
                    " != configured " + std::to_string(spec.dim));
      }
      ag::Var x = tape.Constant(seq->values);
      return ag::Relu(ag::Linear(x, p("asr_transform.sce.weight"),
                                 p("asr_transform.sce.bias")));
    }
  }
  throw Error("unhandled feature kind");
}

ag::Var PrepareAsrFeatures(ParamBinder& p, const ModelConfig& cfg,
                           const AsrInput& raw) {
  ag::Var x = TransformAsrFeatures(p, cfg, raw);
  if (cfg.downsampling == Downsampling::kSimple) {
    return ag::StrideRows(x, kSubsamplingFactor);
  }
  return ConvSubsampleAsr(p, cfg, x);
}

ag::Var ConformerLayer(ParamBinder& p, const ModelConfig& cfg, int layer,
                       ag::Var input, ag::Var context,
                       std::vector<Matrix>* attention_trace) {
  const std::string pre = LayerPrefix(layer);
  ag::Var qk_input = input;
  if (context.valid()) {
    if (context.rows() != input.rows()) {
      throw Error("attention context has " + std::to_string(context.rows()) +
                  " frames, layer input has " + std::to_string(input.rows()));
    }
    qk_input = ag::ConcatCols(context, input);
  }
  ag::Var q = ag::Linear(qk_input, p(pre + ".attn.query.weight"),
                         p(pre + ".attn.query.bias"));
  ag::Var k = ag::Linear(qk_input, p(pre + ".attn.key.weight"),
                         p(pre + ".attn.key.bias"));
  ag::Var v = ag::Linear(input, p(pre + ".attn.value.weight"),
                         p(pre + ".attn.value.bias"));
  ag::Var att = ag::MultiHeadAttention(q, k, v, cfg.attention_heads, {},
                                       attention_trace);
  att = ag::Linear(att, p(pre + ".attn.output.weight"),
                   p(pre + ".attn.output.bias"));
  ag::Var h1 = ag::LayerNorm(ag::Add(input, att), p(pre + ".norm1.gain"),
                             p(pre + ".norm1.shift"));

  ag::Var conv = ag::DepthwiseConv1d(h1, p(pre + ".conv.depthwise.weight"),
                                     p(pre + ".conv.depthwise.bias"));
  conv = ag::Linear(ag::Silu(conv), p(pre + ".conv.pointwise.weight"),
                    p(pre + ".conv.pointwise.bias"));
  ag::Var h2 = ag::LayerNorm(ag::Add(h1, conv), p(pre + ".norm2.gain"),
                             p(pre + ".norm2.shift"));

  ag::Var ff = ag::Silu(
      ag::Linear(h2, p(pre + ".ffn.in.weight"), p(pre + ".ffn.in.bias")));
  ff = ag::Linear(ff, p(pre + ".ffn.out.weight"), p(pre + ".ffn.out.bias"));
  return ag::LayerNorm(ag::Add(h2, ff), p(pre + ".norm3.gain"),
                       p(pre + ".norm3.shift"));
}

ForwardGraph EncoderForward(ParamBinder& p, const ModelConfig& cfg,
                            ag::Var acoustic, ag::Var asr,
                            const ForwardOptions& opts) {
  if (cfg.UsesAsrInput() != asr.valid()) {
    throw Error(cfg.UsesAsrInput()
                    ? "mode " + ToString(cfg.mode) + " needs ASR features"
                    : "mode " + ToString(cfg.mode) + " takes no ASR input");
  }
  if (acoustic.cols() != cfg.model_dim) {
    throw Error("acoustic embedding width mismatch");
  }
  if (asr.valid() && asr.rows() != acoustic.rows()) {
    throw Error("ASR features have " + std::to_string(asr.rows()) +
                " frames after downsampling, acoustics have " +
                std::to_string(acoustic.rows()));
  }
  ForwardGraph g;
  g.acoustic = acoustic;
  g.asr = asr;
  ag::Var x = acoustic;
  if (cfg.mode == Mode::kEarlyFusion) {
    x = ag::Linear(ag::ConcatCols(acoustic, asr), p("fusion.weight"),
                   p("fusion.bias"));
  }
  const ag::Var context = cfg.mode == Mode::kCsa ? asr : ag::Var{};
  for (int i = 0; i < cfg.encoder_layers; ++i) {
    x = ConformerLayer(p, cfg, i, x, context, opts.attention_trace);
    g.layers.push_back(x);
  }
  g.embeddings = x;
  ag::Var head_in =
      cfg.mode == Mode::kLateFusion ? ag::ConcatCols(x, asr) : x;
  g.posteriors = ag::Sigmoid(
      ag::Linear(head_in, p("head.weight"), p("head.bias")));
  if (cfg.HasAuxHead()) {
    g.aux_logits = AuxHead(p, cfg, g.layers[cfg.AuxLayer() - 1]);
  }
  return g;
}

ag::Var AuxHead(ParamBinder& p, const ModelConfig&, ag::Var layer_output) {
  ag::Var h = ag::Relu(ag::Linear(layer_output, p("aux.hidden.weight"),
                                  p("aux.hidden.bias")));
  return ag::Linear(h, p("aux.out.weight"), p("aux.out.bias"));
}

EendModel::EendModel(ModelConfig config) : config_(std::move(config)) {
  config_.Validate();
}

ParameterSet EendModel::InitParameters(std::uint64_t seed) const {
  const ModelConfig& c = config_;
  const int D = c.model_dim;
  const int d = c.TransformedAsrDim();
  ParameterBuilder b(seed);
  InitConvStack(b, "subsample.acoustic", c.input_dim, c.subsampling_channels,
                kAcousticKernels, D);
  if (c.UsesAsrInput()) {
    const AsrFeatureSpec& spec = *c.asr_feature;
    if (spec.kind() == FeatureKind::kCategorical) {
      b.Normal("asr_transform.embedding", spec.num_classes, c.embedding_dim,
               1.0);
    } else if (spec.kind() == FeatureKind::kSce) {
      b.Glorot("asr_transform.sce.weight", spec.dim, c.sce_projection_dim);
      b.Constant("asr_transform.sce.bias", 1, c.sce_projection_dim, 0.0);
    }
    if (c.downsampling == Downsampling::kConv) {
      InitConvStack(b, "subsample.asr", d, c.subsampling_channels,
                    kAsrKernels, d);
    }
  }
  if (c.mode == Mode::kEarlyFusion) {
    b.Glorot("fusion.weight", D + d, D);
    b.Constant("fusion.bias", 1, D, 0.0);
  }
  const int qk_in = c.mode == Mode::kCsa ? D + d : D;
  for (int i = 0; i < c.encoder_layers; ++i) {
    const std::string pre = LayerPrefix(i);
    for (const char* name : {"query", "key"}) {
      b.Glorot(pre + ".attn." + name + ".weight", qk_in, D);
      b.Constant(pre + ".attn." + name + ".bias", 1, D, 0.0);
    }
    for (const char* name : {"value", "output"}) {
      b.Glorot(pre + ".attn." + name + ".weight", D, D);
      b.Constant(pre + ".attn." + name + ".bias", 1, D, 0.0);
    }
    b.Glorot(pre + ".conv.depthwise.weight", c.conv_kernel, D, c.conv_kernel,
             c.conv_kernel);
    b.Constant(pre + ".conv.depthwise.bias", 1, D, 0.0);
    b.Glorot(pre + ".conv.pointwise.weight", D, D);
    b.Constant(pre + ".conv.pointwise.bias", 1, D, 0.0);
    b.Glorot(pre + ".ffn.in.weight", D, c.ff_dim);
    b.Constant(pre + ".ffn.in.bias", 1, c.ff_dim, 0.0);
    b.Glorot(pre + ".ffn.out.weight", c.ff_dim, D);
    b.Constant(pre + ".ffn.out.bias", 1, D, 0.0);
    for (const char* norm : {".norm1", ".norm2", ".norm3"}) {
      b.Constant(pre + norm + ".gain", 1, D, 1.0);
      b.Constant(pre + norm + ".shift", 1, D, 0.0);
    }
  }
  const int head_in = c.mode == Mode::kLateFusion ? D + d : D;
  b.Glorot("head.weight", head_in, c.num_speakers);
  b.Constant("head.bias", 1, c.num_speakers, 0.0);
  if (const AsrFeatureSpec* aux = c.AuxTarget()) {
    b.Glorot("aux.hidden.weight", D, c.aux_hidden_dim);
    b.Constant("aux.hidden.bias", 1, c.aux_hidden_dim, 0.0);
    b.Glorot("aux.out.weight", c.aux_hidden_dim, aux->num_classes);
    b.Constant("aux.out.bias", 1, aux->num_classes, 0.0);
  }
  return std::move(b).Build();
}

ForwardGraph EendModel::Forward(ParamBinder& p, const Matrix& frames,
                                const AsrInput* asr,
                                const ForwardOptions& opts) const {
  ag::Var acoustic =
      ConvSubsampleAcoustic(p, config_, p.tape().Constant(frames));
  ag::Var asr_var;
  if (config_.UsesAsrInput()) {
    if (asr == nullptr) {
      throw Error("mode " + ToString(config_.mode) + " needs ASR features");
    }
    if (AsrInputFrames(*asr) != frames.rows()) {
      throw Error("ASR features have " + std::to_string(AsrInputFrames(*asr)) +
                  " frames, acoustics have " + std::to_string(frames.rows()));
    }
    asr_var = PrepareAsrFeatures(p, config_, *asr);
  }
  return EncoderForward(p, config_, acoustic, asr_var, opts);
}

EncoderOutput EendModel::Infer(const ParameterSet& params, const Matrix& frames,
                               const AsrInput* asr,
                               const ForwardOptions& opts) const {
  ag::Tape tape(/*record_gradients=*/false);
  ParamBinder binder(tape, params);
  ForwardGraph g = Forward(binder, frames, asr, opts);
  EncoderOutput out;
  out.embeddings = g.embeddings.value();
  for (const auto& layer : g.layers) out.layer_outputs.push_back(layer.value());
  out.posteriors = g.posteriors.value();
  if (g.aux_logits.valid()) out.aux_logits = g.aux_logits.value();
  return out;
}

}  // namespace diarkit
