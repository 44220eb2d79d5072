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

#ifndef DIARKIT_SCD_H_
#define DIARKIT_SCD_H_

// Lexical speaker-change detection over sub-word token sequences. A small
// transformer labels each token as starting a speaker turn or not; its
// per-token change posterior and pre-classifier activation feed the
// diarization model as SCP / SCE features.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "diarkit/autograd.h"
#include "diarkit/parameters.h"
#include "diarkit/types.h"

namespace diarkit {

inline constexpr int kPadToken = 0;
inline constexpr int kNoiseToken = 1;
inline constexpr int kLaughToken = 2;
inline constexpr int kFirstRegularToken = 3;

struct Token {
  int id = kPadToken;
  int word_index = 0;
  int subword_index = 0;
  std::string speaker;
};

struct TokenSequence {
  std::vector<Token> tokens;

  int size() const { return static_cast<int>(tokens.size()); }
  // Throws Error if word indices decrease or sub-word indices are not
  // 0..n-1 within each word.
  void Validate() const;
  // Word index of every token.
  std::vector<int> WordIndices() const;
};

// One line per token: <token-id> <word-index> <subword-index> <speaker-id>.
TokenSequence ReadTokens(std::istream& is);
void WriteTokens(std::ostream& os, const TokenSequence& seq);

// 1 on the first token of every speaker turn, including the first token.
std::vector<int> BuildScdTargets(const TokenSequence& seq);

// Mean over unmasked tokens of weight[y] * -log softmax(logits)[y].
// `mask` may be empty (all tokens count); masked tokens have mask 0.
double WeightedCeLoss(const Matrix& logits, std::span<const int> targets,
                      std::span<const double> class_weights,
                      std::span<const std::uint8_t> mask = {});
ag::Var WeightedCeLoss(ag::Var logits, std::span<const int> targets,
                       std::span<const double> class_weights,
                       std::span<const std::uint8_t> mask = {});

// A fixed-length training window; positions past the sequence hold
// kPadToken with mask 0.
struct TokenWindow {
  int start = 0;
  std::vector<int> ids;
  std::vector<int> targets;
  std::vector<std::uint8_t> mask;
};

TokenWindow MakeWindow(const TokenSequence& seq,
                       std::span<const int> targets, int start, int window);

// `count` windows with starts uniform in [0, T - window] (one padded window
// when T < window).
std::vector<TokenWindow> SampleTrainingWindows(const TokenSequence& seq,
                                               int window, int count,
                                               std::mt19937_64& rng);

struct ScdConfig {
  int vocab_size = 512;
  int window = 20;
  int hop = 10;
  int model_dim = 64;
  int heads = 4;
  int ff_dim = 128;
  int layers = 2;
  // Loss weights for class 0 (no change) and class 1 (change).
  double weight_no_change = 0.935;
  double weight_change = 0.065;

  void Validate() const;
};

struct ScdOutput {
  Matrix logits;      // L x 2
  Matrix embeddings;  // L x model_dim, input to the classifier
};

class ScdModel {
 public:
  explicit ScdModel(ScdConfig config);
  const ScdConfig& config() const { return config_; }

  ParameterSet InitParameters(std::uint64_t seed) const;

  // `ids` has at most `window` entries; pad keys are ignored by attention.
  // Writes the pre-classifier activations to `embeddings` when non-null.
  ag::Var Forward(ParamBinder& p, std::span<const int> ids,
                  std::span<const std::uint8_t> mask,
                  ag::Var* embeddings = nullptr) const;
  ScdOutput Infer(const ParameterSet& params, std::span<const int> ids,
                  std::span<const std::uint8_t> mask) const;

 private:
  ScdConfig config_;
};

// Which tokens of which window are kept during sliding-window inference.
struct WindowPlan {
  int start = 0;  // first token of the window
  int keep_begin = 0;
  int keep_end = 0;  // exclusive; absolute token indices
};

// Windows start at 0, hop, 2 hop, ... while start + window < T, plus a final
// window ending at T. Each window keeps its middle `hop` tokens; the first
// window also keeps its head and the final window everything after the
// previous window's kept range. Every token is kept exactly once.
std::vector<WindowPlan> PlanWindows(int num_tokens, int window, int hop);

struct ScdFeatures {
  std::vector<double> posteriors;  // P(change) per token
  Matrix embeddings;               // T x model_dim
};

ScdFeatures SlidingWindowInfer(const ScdModel& model,
                               const ParameterSet& params,
                               const TokenSequence& seq);

struct ScdTrainConfig {
  int epochs = 10;
  int windows_per_sequence = 4;
  int batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t rng_seed = 0;
};

struct ScdEpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;  // token accuracy on the sampled windows
};

struct ScdTrainResult {
  ParameterSet params;
  std::vector<ScdEpochMetrics> metrics;
};

ScdTrainResult TrainScd(const ScdConfig& config,
                        std::span<const TokenSequence> transcripts,
                        const ScdTrainConfig& train_config);

}  // namespace diarkit

#endif  // DIARKIT_SCD_H_
