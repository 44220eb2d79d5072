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

#ifndef DIARKIT_MODEL_H_
#define DIARKIT_MODEL_H_

// Conformer-based end-to-end diarization encoder.
//
// Acoustic frames (T x 80, 10 ms) go through two depthwise-separable 2-D
// convolution stages (stride 2 each) to T' = ceil(T / 4) frames of width D,
// then through n Conformer layers and a sigmoid head giving per-speaker
// activity posteriors. ASR-derived features enter in one of four ways:
//
//   early_fusion  concatenated with the subsampled acoustics, projected to D
//   late_fusion   concatenated with the encoder output before the head
//   csa           concatenated with the query/key input of every layer
//   multitask     not an input; predicted by an auxiliary head from layer i

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "diarkit/autograd.h"
#include "diarkit/features.h"
#include "diarkit/parameters.h"
#include "diarkit/types.h"

namespace diarkit {

enum class Mode { kBaseline, kEarlyFusion, kLateFusion, kCsa, kMultitask };
enum class Downsampling { kSimple, kConv };
enum class FeatureKind { kCategorical, kScp, kSce };
enum class AsrFeatureName {
  kPhones,
  kPositionInWord,
  kWordBoundaries,
  kSpeechActivity,
  kScp,
  kSce,
};

std::string ToString(Mode mode);
std::string ToString(Downsampling d);
std::string ToString(AsrFeatureName name);
Mode ParseMode(const std::string& s);
Downsampling ParseDownsampling(const std::string& s);
AsrFeatureName ParseAsrFeatureName(const std::string& s);

struct AsrFeatureSpec {
  AsrFeatureName name = AsrFeatureName::kPositionInWord;
  int num_classes = 0;  // categorical features
  int dim = 0;          // raw width: 2 for SCP, D_sce for SCE

  FeatureKind kind() const;
  // Standard class counts / widths (54 phones, 5 positions, 5 boundary
  // classes, 2 SAD classes, 2-dim SCP, `sce_dim` for SCE).
  static AsrFeatureSpec For(AsrFeatureName name, int sce_dim = 64);
};

struct ModelConfig {
  int num_speakers = 2;
  int input_dim = kAcousticDim;
  int encoder_layers = 4;
  int model_dim = 256;
  int attention_heads = 4;
  int ff_dim = 1024;
  int conv_kernel = 7;
  int subsampling_channels = 16;
  Mode mode = Mode::kBaseline;
  Downsampling downsampling = Downsampling::kSimple;
  std::optional<AsrFeatureSpec> asr_feature;
  // Extra auxiliary target for a fusion/CSA model (the combined late-fusion
  // plus multi-task configuration). Must be categorical.
  std::optional<AsrFeatureSpec> aux_feature;
  int embedding_dim = 16;
  int sce_projection_dim = 64;
  int aux_layer_index = 0;  // 1-based; 0 selects the last layer
  int aux_hidden_dim = 256;

  // Throws Error describing the first violated constraint.
  void Validate() const;

  bool UsesAsrInput() const;
  bool HasAuxHead() const;
  // Categorical feature predicted by the auxiliary head, or nullptr.
  const AsrFeatureSpec* AuxTarget() const;
  int AuxLayer() const;
  // Width of the ASR features after the transformation layer.
  int TransformedAsrDim() const;
};

using AsrInput =
    std::variant<CategoricalFrameSequence, ScpFrameSequence, SceFrameSequence>;

int AsrInputFrames(const AsrInput& input);

// Subsampled length shared by the acoustic and ASR paths.
int SubsampledLength(int frames);

// Posteriors and intermediate outputs of one forward pass.
struct EncoderOutput {
  Matrix embeddings;                 // T' x D (last layer)
  std::vector<Matrix> layer_outputs; // E^1 .. E^n
  Matrix posteriors;                 // T' x S
  Matrix aux_logits;                 // T' x C, empty without an aux head
};

struct ForwardOptions {
  // Receives every head's T' x T' attention matrix, layer by layer.
  std::vector<Matrix>* attention_trace = nullptr;
};

struct ForwardGraph {
  ag::Var acoustic;  // T' x D subsampled acoustic input
  ag::Var asr;       // T' x d subsampled ASR features (may be invalid)
  std::vector<ag::Var> layers;
  ag::Var embeddings;
  ag::Var posteriors;
  ag::Var aux_logits;  // may be invalid
};

// Building blocks, exposed for testing.
ag::Var ConvSubsampleAcoustic(ParamBinder& p, const ModelConfig& cfg,
                              ag::Var frames);
ag::Var ConvSubsampleAsr(ParamBinder& p, const ModelConfig& cfg,
                         ag::Var features);
ag::Var TransformAsrFeatures(ParamBinder& p, const ModelConfig& cfg,
                             const AsrInput& raw);
// Transformation followed by simple or convolutional downsampling.
ag::Var PrepareAsrFeatures(ParamBinder& p, const ModelConfig& cfg,
                           const AsrInput& raw);
// `context` may be invalid (plain self-attention).
ag::Var ConformerLayer(ParamBinder& p, const ModelConfig& cfg, int layer,
                       ag::Var input, ag::Var context,
                       std::vector<Matrix>* attention_trace = nullptr);
// `acoustic` is T' x D; `asr` is T' x d or invalid.
ForwardGraph EncoderForward(ParamBinder& p, const ModelConfig& cfg,
                            ag::Var acoustic, ag::Var asr,
                            const ForwardOptions& opts = {});
ag::Var AuxHead(ParamBinder& p, const ModelConfig& cfg, ag::Var layer_output);

class EendModel {
 public:
  explicit EendModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  ParameterSet InitParameters(std::uint64_t seed) const;

  // Full graph from 10 ms frames. `asr` must be non-null exactly when the
  // mode takes ASR input, and have the same frame count as `frames`.
  ForwardGraph Forward(ParamBinder& p, const Matrix& frames,
                       const AsrInput* asr,
                       const ForwardOptions& opts = {}) const;

  EncoderOutput Infer(const ParameterSet& params, const Matrix& frames,
                      const AsrInput* asr,
                      const ForwardOptions& opts = {}) const;

 private:
  ModelConfig config_;
};

}  // namespace diarkit

#endif  // DIARKIT_MODEL_H_
