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

#include "diarkit/scd.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "diarkit/training.h"

namespace diarkit {
namespace {

std::string LayerPrefix(int layer) {
  return "scd.layer" + std::to_string(layer);
}

Matrix LogSoftmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    out.row(t) = logits.row(t).array() - m -
                 std::log((logits.row(t).array() - m).exp().sum());
  }
  return out;
}

void CheckCeArgs(const Matrix& logits, std::span<const int> targets,
                 std::span<const double> weights,
                 std::span<const std::uint8_t> mask) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    throw Error("target count does not match logits");
  }
  if (static_cast<Eigen::Index>(weights.size()) != logits.cols()) {
    throw Error("need one class weight per class");
  }
  for (double w : weights) {
    if (!(w > 0.0)) throw Error("class weights must be positive");
  }
  if (!mask.empty() && mask.size() != targets.size()) {
    throw Error("mask length does not match targets");
  }
  for (int y : targets) {
    if (y < 0 || y >= logits.cols()) throw Error("target out of range");
  }
}

bool Counts(std::span<const std::uint8_t> mask, std::size_t i) {
  return mask.empty() || mask[i] != 0;
}

}  // namespace

void TokenSequence::Validate() const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const Token& t = tokens[i];
    if (t.id < 0) throw Error("negative token id at " + std::to_string(i));
    if (i == 0) {
      if (t.subword_index != 0) {
        throw Error("first token must start a word");
      }
      continue;
    }
    const Token& prev = tokens[i - 1];
    if (t.word_index < prev.word_index) {
      throw Error("word index decreases at token " + std::to_string(i));
    }
    const int expected =
        t.word_index == prev.word_index ? prev.subword_index + 1 : 0;
    if (t.subword_index != expected) {
      throw Error("sub-word index " + std::to_string(t.subword_index) +
                  " at token " + std::to_string(i) + ", expected " +
                  std::to_string(expected));
    }
  }
}

std::vector<int> TokenSequence::WordIndices() const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.word_index);
  return out;
}

TokenSequence ReadTokens(std::istream& is) {
  TokenSequence seq;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    Token t;
    if (!(fields >> t.id >> t.word_index >> t.subword_index >> t.speaker)) {
      throw Error("malformed token line " + std::to_string(line_no));
    }
    seq.tokens.push_back(std::move(t));
  }
  seq.Validate();
  return seq;
}

void WriteTokens(std::ostream& os, const TokenSequence& seq) {
  for (const auto& t : seq.tokens) {
    os << t.id << ' ' << t.word_index << ' ' << t.subword_index << ' '
       << t.speaker << '\n';
  }
}

std::vector<int> BuildScdTargets(const TokenSequence& seq) {
  std::vector<int> y(seq.tokens.size(), 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = i == 0 || seq.tokens[i].speaker != seq.tokens[i - 1].speaker;
  }
  return y;
}

double WeightedCeLoss(const Matrix& logits, std::span<const int> targets,
                      std::span<const double> class_weights,
                      std::span<const std::uint8_t> mask) {
  CheckCeArgs(logits, targets, class_weights, mask);
  const Matrix ls = LogSoftmax(logits);
  double total = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!Counts(mask, i)) continue;
    total -= class_weights[targets[i]] * ls(i, targets[i]);
    ++n;
  }
  if (n == 0) throw Error("every token is masked");
  return total / n;
}

ag::Var WeightedCeLoss(ag::Var logits, std::span<const int> targets,
                       std::span<const double> class_weights,
                       std::span<const std::uint8_t> mask) {
  Matrix value(1, 1);
  value(0, 0) = WeightedCeLoss(logits.value(), targets, class_weights, mask);
  ag::Tape& tape = *logits.tape();
  if (!tape.recording()) return tape.Constant(std::move(value));
  // Per-row coefficient weight[y] / n, zero for masked rows.
  std::vector<double> coef(targets.size(), 0.0);
  int n = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) n += Counts(mask, i);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (Counts(mask, i)) coef[i] = class_weights[targets[i]] / n;
  }
  std::vector<int> y(targets.begin(), targets.end());
  return tape.Record(
      std::move(value), {logits},
      [logits, y, coef](ag::Tape& t, const Matrix&, const Matrix& g) {
        Matrix d = LogSoftmax(t.Value(logits)).array().exp();
        for (std::size_t i = 0; i < y.size(); ++i) {
          d(i, y[i]) -= 1.0;
          d.row(i) *= coef[i];
        }
        t.Accumulate(logits, d * g(0, 0));
      });
}

TokenWindow MakeWindow(const TokenSequence& seq, std::span<const int> targets,
                       int start, int window) {
  TokenWindow w;
  w.start = start;
  w.ids.assign(window, kPadToken);
  w.targets.assign(window, 0);
  w.mask.assign(window, 0);
  for (int i = 0; i < window && start + i < seq.size(); ++i) {
    w.ids[i] = seq.tokens[start + i].id;
    w.targets[i] = targets[start + i];
    w.mask[i] = 1;
  }
  return w;
}

std::vector<TokenWindow> SampleTrainingWindows(const TokenSequence& seq,
                                               int window, int count,
                                               std::mt19937_64& rng) {
  if (window < 1) throw Error("window must be positive");
  if (seq.size() == 0) throw Error("cannot sample windows from no tokens");
  const std::vector<int> targets = BuildScdTargets(seq);
  const int last_start = std::max(0, seq.size() - window);
  std::uniform_int_distribution<int> dist(0, last_start);
  std::vector<TokenWindow> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(MakeWindow(seq, targets, dist(rng), window));
  }
  return out;
}

void ScdConfig::Validate() const {
  if (vocab_size <= kFirstRegularToken) {
    throw Error("vocab_size must exceed the special tokens");
  }
  if (window < 2 || hop < 1 || hop > window || (window - hop) % 2 != 0) {
    throw Error("window and hop must satisfy 1 <= hop <= window with an "
                "even difference");
  }
  if (model_dim < 1 || heads < 1 || model_dim % heads != 0) {
    throw Error("model_dim must be a positive multiple of heads");
  }
  if (ff_dim < 1 || layers < 1) throw Error("ff_dim and layers must be positive");
  if (!(weight_change > 0.0) || !(weight_no_change > 0.0)) {
    throw Error("class weights must be positive");
  }
}

ScdModel::ScdModel(ScdConfig config) : config_(config) { config_.Validate(); }

ParameterSet ScdModel::InitParameters(std::uint64_t seed) const {
  const ScdConfig& c = config_;
  const int D = c.model_dim;
  ParameterBuilder b(seed);
  b.Normal("scd.token_embedding", c.vocab_size, D, 1.0);
  b.Normal("scd.position_embedding", c.window, D, 0.1);
  for (int i = 0; i < c.layers; ++i) {
    const std::string pre = LayerPrefix(i);
    for (const char* name : {"query", "key", "value", "output"}) {
      b.Glorot(pre + ".attn." + name + ".weight", D, D);
      b.Constant(pre + ".attn." + name + ".bias", 1, D, 0.0);
    }
    b.Glorot(pre + ".ffn.in.weight", D, c.ff_dim);
    b.Constant(pre + ".ffn.in.bias", 1, c.ff_dim, 0.0);
    b.Glorot(pre + ".ffn.out.weight", c.ff_dim, D);
    b.Constant(pre + ".ffn.out.bias", 1, D, 0.0);
    for (const char* norm : {".norm1", ".norm2"}) {
      b.Constant(pre + norm + ".gain", 1, D, 1.0);
      b.Constant(pre + norm + ".shift", 1, D, 0.0);
    }
  }
  b.Glorot("scd.classifier.weight", D, 2);
  b.Constant("scd.classifier.bias", 1, 2, 0.0);
  return std::move(b).Build();
}

ag::Var ScdModel::Forward(ParamBinder& p, std::span<const int> ids,
                          std::span<const std::uint8_t> mask,
                          ag::Var* embeddings) const {
  const ScdConfig& c = config_;
  const int L = static_cast<int>(ids.size());
  if (L < 1 || L > c.window) {
    throw Error("SCD input must have 1.." + std::to_string(c.window) +
                " tokens, got " + std::to_string(L));
  }
  if (!mask.empty() && static_cast<int>(mask.size()) != L) {
    throw Error("mask length does not match tokens");
  }
  for (int id : ids) {
    if (id < 0 || id >= c.vocab_size) {
      throw Error("token id " + std::to_string(id) + " outside vocabulary of " +
                  std::to_string(c.vocab_size));
    }
  }
  std::vector<int> positions(L);
  std::iota(positions.begin(), positions.end(), 0);
  ag::Var x = ag::Add(ag::Embedding(p("scd.token_embedding"), ids),
                      ag::Embedding(p("scd.position_embedding"), positions));
  for (int i = 0; i < c.layers; ++i) {
    const std::string pre = LayerPrefix(i);
    auto proj = [&](const char* name, ag::Var in) {
      return ag::Linear(in, p(pre + ".attn." + name + ".weight"),
                        p(pre + ".attn." + name + ".bias"));
    };
    ag::Var att = ag::MultiHeadAttention(proj("query", x), proj("key", x),
                                         proj("value", x), c.heads, mask);
    att = proj("output", att);
    x = ag::LayerNorm(ag::Add(x, att), p(pre + ".norm1.gain"),
                      p(pre + ".norm1.shift"));
    ag::Var ff = ag::Relu(
        ag::Linear(x, p(pre + ".ffn.in.weight"), p(pre + ".ffn.in.bias")));
    ff = ag::Linear(ff, p(pre + ".ffn.out.weight"), p(pre + ".ffn.out.bias"));
    x = ag::LayerNorm(ag::Add(x, ff), p(pre + ".norm2.gain"),
                      p(pre + ".norm2.shift"));
  }
  if (embeddings) *embeddings = x;
  return ag::Linear(x, p("scd.classifier.weight"), p("scd.classifier.bias"));
}

ScdOutput ScdModel::Infer(const ParameterSet& params, std::span<const int> ids,
                          std::span<const std::uint8_t> mask) const {
  ag::Tape tape(/*record_gradients=*/false);
  ParamBinder binder(tape, params);
  ag::Var emb;
  ag::Var logits = Forward(binder, ids, mask, &emb);
  return {logits.value(), emb.value()};
}

std::vector<WindowPlan> PlanWindows(int num_tokens, int window, int hop) {
  if (num_tokens < 1) throw Error("no tokens to plan windows over");
  if (window < 1 || hop < 1 || hop > window || (window - hop) % 2 != 0) {
    throw Error("invalid window/hop");
  }
  if (num_tokens <= window) return {{0, 0, num_tokens}};
  const int margin = (window - hop) / 2;
  std::vector<WindowPlan> plan;
  for (int s = 0; s + window < num_tokens; s += hop) {
    plan.push_back({s, plan.empty() ? 0 : s + margin, s + margin + hop});
  }
  plan.push_back({num_tokens - window, plan.back().keep_end, num_tokens});
  return plan;
}

ScdFeatures SlidingWindowInfer(const ScdModel& model,
                               const ParameterSet& params,
                               const TokenSequence& seq) {
  const ScdConfig& c = model.config();
  const int T = seq.size();
  ScdFeatures out;
  out.posteriors.assign(T, 0.0);
  out.embeddings = Matrix::Zero(T, c.model_dim);
  if (T == 0) return out;
  const std::vector<int> targets(T, 0);
  for (const WindowPlan& w : PlanWindows(T, c.window, c.hop)) {
    const TokenWindow win = MakeWindow(seq, targets, w.start, c.window);
    const ScdOutput o = model.Infer(params, win.ids, win.mask);
    const Matrix ls = LogSoftmax(o.logits);
    for (int t = w.keep_begin; t < w.keep_end; ++t) {
      out.posteriors[t] = std::exp(ls(t - w.start, 1));
      out.embeddings.row(t) = o.embeddings.row(t - w.start);
    }
  }
  return out;
}

ScdTrainResult TrainScd(const ScdConfig& config,
                        std::span<const TokenSequence> transcripts,
                        const ScdTrainConfig& train_config) {
  if (transcripts.empty()) throw Error("no transcripts to train on");
  if (train_config.epochs < 1 || train_config.windows_per_sequence < 1 ||
      train_config.batch_size < 1 || !(train_config.learning_rate > 0.0)) {
    throw Error("SCD training needs positive epochs, windows, batch and rate");
  }
  const ScdModel model(config);
  ScdTrainResult result;
  result.params = model.InitParameters(train_config.rng_seed);
  Adam adam(0.9, 0.98, 1e-9);
  std::mt19937_64 rng(train_config.rng_seed ^ 0x5cd5cd5cd5cd5cdULL);
  const double weights[2] = {config.weight_no_change, config.weight_change};

  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    std::vector<TokenWindow> windows;
    for (const auto& seq : transcripts) {
      if (seq.size() == 0) continue;
      auto w = SampleTrainingWindows(seq, config.window,
                                     train_config.windows_per_sequence, rng);
      windows.insert(windows.end(), w.begin(), w.end());
    }
    std::shuffle(windows.begin(), windows.end(), rng);
    double loss_sum = 0.0;
    long correct = 0, counted = 0;
    for (std::size_t b = 0; b < windows.size();
         b += train_config.batch_size) {
      const std::size_t end = std::min(
          windows.size(), b + static_cast<std::size_t>(train_config.batch_size));
      ParameterSet grads = result.params.ZerosLike();
      for (std::size_t i = b; i < end; ++i) {
        const TokenWindow& w = windows[i];
        ag::Tape tape;
        ParamBinder binder(tape, result.params);
        ag::Var logits = model.Forward(binder, w.ids, w.mask);
        ag::Var loss = WeightedCeLoss(logits, w.targets, weights, w.mask);
        const double l = loss.value()(0, 0);
        if (!std::isfinite(l)) {
          throw Error("SCD loss is not finite in epoch " +
                      std::to_string(epoch));
        }
        loss_sum += l;
        for (std::size_t t = 0; t < w.ids.size(); ++t) {
          if (!w.mask[t]) continue;
          const int pred = logits.value()(t, 1) > logits.value()(t, 0);
          correct += pred == w.targets[t];
          ++counted;
        }
        tape.Backward(loss);
        const ParameterSet g = binder.Gradients();
        for (auto& [key, value] : grads.tensors()) value += g.at(key);
      }
      for (auto& [key, value] : grads.tensors()) {
        value /= static_cast<double>(end - b);
      }
      adam.Step(result.params, grads, train_config.learning_rate);
    }
    ScdEpochMetrics m;
    m.epoch = epoch;
    m.loss = windows.empty() ? 0.0 : loss_sum / windows.size();
    m.accuracy = counted ? static_cast<double>(correct) / counted : 0.0;
    spdlog::info("scd epoch {} loss {:.4f} accuracy {:.4f}", epoch, m.loss,
                 m.accuracy);
    result.metrics.push_back(m);
  }
  return result;
}

}  // namespace diarkit
