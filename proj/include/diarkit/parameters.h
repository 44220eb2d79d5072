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

#ifndef DIARKIT_PARAMETERS_H_
#define DIARKIT_PARAMETERS_H_

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "diarkit/autograd.h"
#include "diarkit/types.h"

namespace diarkit {

// Learnable weights keyed by a stable path such as
// "encoder.layer0.attn.query.weight". Keys iterate in sorted order.
class ParameterSet {
 public:
  void Add(const std::string& key, Matrix value);
  bool contains(const std::string& key) const;
  const Matrix& at(const std::string& key) const;
  Matrix& at(const std::string& key);
  const std::map<std::string, Matrix>& tensors() const { return tensors_; }
  std::map<std::string, Matrix>& tensors() { return tensors_; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t NumScalars() const;

  // Same keys with the same shapes.
  bool SameLayout(const ParameterSet& other) const;
  // Returns the first key present in one set but not the other, or with a
  // different shape; empty if layouts match.
  std::string FirstLayoutDifference(const ParameterSet& other) const;

  // Zero-valued set with this layout.
  ParameterSet ZerosLike() const;

  bool operator==(const ParameterSet& other) const;

 private:
  std::map<std::string, Matrix> tensors_;
};

// Binds parameters to a tape on first use and collects their gradients.
class ParamBinder {
 public:
  ParamBinder(ag::Tape& tape, const ParameterSet& params)
      : tape_(tape), params_(params) {}

  ag::Var operator()(const std::string& key);
  ag::Tape& tape() { return tape_; }
  const ParameterSet& params() const { return params_; }

  // Gradient for every key in the set (zeros for unused keys); call after
  // Tape::Backward().
  ParameterSet Gradients() const;

 private:
  ag::Tape& tape_;
  const ParameterSet& params_;
  std::map<std::string, ag::Var> bound_;
};

// Deterministic initialisation; draws happen in call order.
class ParameterBuilder {
 public:
  explicit ParameterBuilder(std::uint64_t seed) : rng_(seed) {}

  // Glorot-uniform over [-a, a], a = sqrt(6 / (fan_in + fan_out)).
  void Glorot(const std::string& key, int rows, int cols, int fan_in,
              int fan_out);
  void Glorot(const std::string& key, int rows, int cols) {
    Glorot(key, rows, cols, rows, cols);
  }
  void Normal(const std::string& key, int rows, int cols, double stddev);
  void Constant(const std::string& key, int rows, int cols, double value);

  ParameterSet Build() && { return std::move(params_); }

 private:
  std::mt19937_64 rng_;
  ParameterSet params_;
};

}  // namespace diarkit

#endif  // DIARKIT_PARAMETERS_H_
