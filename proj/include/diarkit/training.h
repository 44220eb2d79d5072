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

#ifndef DIARKIT_TRAINING_H_
#define DIARKIT_TRAINING_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "diarkit/autograd.h"
#include "diarkit/features.h"
#include "diarkit/model.h"
#include "diarkit/parameters.h"
#include "diarkit/scoring.h"

namespace diarkit {

inline constexpr double kBceEpsilon = 1e-7;

struct SpecAugmentConfig {
  int freq_masks = 2;
  int freq_mask_max = 2;
  int time_masks = 2;
  int time_mask_max = 40;
};

struct TrainConfig {
  double alpha = 0.2;
  int epochs = 20;
  int batch_size = 8;
  int warmup_steps = 500;
  // Multiplies the inverse-square-root schedule.
  double lr_scale = 1.0;
  int average_last_k = 10;
  SpecAugmentConfig specaugment;
  std::uint64_t rng_seed = 0;
  // Random crop length in 10 ms frames; 0 trains on whole recordings.
  int chunk_frames = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_epsilon = 1e-9;
  // Dev scoring.
  double collar = 0.25;
  double threshold = 0.5;

  void Validate() const;
};

// 0.2 for position-in-word, 0.6 otherwise.
double DefaultAlpha(AsrFeatureName feature);

struct PitResult {
  double loss = 0.0;
  std::vector<int> permutation;  // output s is matched to reference perm[s]
};

// Mean BCE over frames and speakers for one column assignment.
double MeanBce(const Matrix& posteriors, const SpeakerActivity& reference,
               std::span<const int> permutation);
// Minimum over all reference column permutations; ties go to the
// lexicographically smallest permutation. Posteriors are clamped to
// [eps, 1 - eps].
PitResult PitBceLoss(const Matrix& posteriors,
                     const SpeakerActivity& reference);
ag::Var PitBceLoss(ag::Var posteriors, const SpeakerActivity& reference,
                   std::vector<int>* permutation = nullptr);

// Mean over frames of -log softmax(logits)[label].
double AuxCeLoss(const Matrix& logits, std::span<const int> labels);
ag::Var AuxCeLoss(ag::Var logits, std::span<const int> labels);

double CombinedLoss(double der_loss, double aux_loss, double alpha);
ag::Var CombinedLoss(ag::Var der_loss, ag::Var aux_loss, double alpha);

// Masks acoustic frames in place of a copy; masked entries become 0.
Matrix SpecAugment(const Matrix& frames, const SpecAugmentConfig& cfg,
                   std::mt19937_64& rng);

// D^-0.5 * min(step^-0.5, step * warmup^-1.5), step >= 1.
double NoamLearningRate(int step, int model_dim, int warmup_steps);

// Element-wise mean. Throws Error naming the first differing key.
ParameterSet AverageCheckpoints(std::span<const ParameterSet> sets);

class Adam {
 public:
  Adam(double beta1, double beta2, double epsilon)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void Step(ParameterSet& params, const ParameterSet& grads, double lr);
  int steps() const { return steps_; }

 private:
  double beta1_, beta2_, epsilon_;
  int steps_ = 0;
  ParameterSet m_, v_;
};

// One recording ready for training or evaluation. All sequences are at the
// 10 ms rate.
struct TrainingExample {
  std::string id;
  Matrix features;                  // T x 80
  SpeakerActivity activity;         // T x S reference
  std::optional<AsrInput> asr;      // model input for fusion / CSA
  std::optional<CategoricalFrameSequence> aux_labels;  // multi-task target
};

// Crops frames [start, start + length) of every sequence in the example.
TrainingExample CropExample(const TrainingExample& ex, int start, int length);

struct LossBreakdown {
  double der = 0.0;
  double aux = 0.0;
  double total = 0.0;
};

// Builds the loss graph for one example on the binder's tape and returns the
// scalar total. `breakdown` receives the component values and `posteriors`
// the T' x S head output.
ag::Var ExampleLoss(const EendModel& model, ParamBinder& binder,
                    const TrainingExample& ex, double alpha,
                    LossBreakdown* breakdown = nullptr,
                    Matrix* posteriors = nullptr);

struct EvalResult {
  double loss = 0.0;  // mean combined loss
  DerResult der;      // time-weighted over recordings
};

// Full-length inference on every example, scored at the given collar.
EvalResult Evaluate(const EendModel& model, const ParameterSet& params,
                    std::span<const TrainingExample> examples, double alpha,
                    double collar, double threshold);

struct EpochMetrics {
  int epoch = 0;
  int step = 0;
  double lr = 0.0;
  double loss_der = 0.0;
  double loss_aux = 0.0;
  double dev_loss = 0.0;
  double dev_der = 0.0;
};

struct TrainResult {
  ParameterSet params;  // average of the last k epoch snapshots
  std::vector<EpochMetrics> metrics;
};

using MetricsSink = std::function<void(const EpochMetrics&)>;

// Adam on the combined loss under the warmup schedule. Throws Error naming
// the step if the loss stops being finite.
TrainResult Train(const ModelConfig& model_config,
                  std::span<const TrainingExample> train,
                  std::span<const TrainingExample> dev,
                  const TrainConfig& config, const MetricsSink& sink = {});

}  // namespace diarkit

#endif  // DIARKIT_TRAINING_H_
