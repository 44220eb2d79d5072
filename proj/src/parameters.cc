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

#include "diarkit/parameters.h"

#include <cmath>

namespace diarkit {

void ParameterSet::Add(const std::string& key, Matrix value) {
  if (!tensors_.emplace(key, std::move(value)).second) {
    throw Error("duplicate parameter key '" + key + "'");
  }
}

bool ParameterSet::contains(const std::string& key) const {
  return tensors_.count(key) != 0;
}

const Matrix& ParameterSet::at(const std::string& key) const {
  auto it = tensors_.find(key);
  if (it == tensors_.end()) throw Error("missing parameter '" + key + "'");
  return it->second;
}

Matrix& ParameterSet::at(const std::string& key) {
  auto it = tensors_.find(key);
  if (it == tensors_.end()) throw Error("missing parameter '" + key + "'");
  return it->second;
}

std::size_t ParameterSet::NumScalars() const {
  std::size_t n = 0;
  for (const auto& [key, m] : tensors_) n += static_cast<std::size_t>(m.size());
  return n;
}

std::string ParameterSet::FirstLayoutDifference(
    const ParameterSet& other) const {
  auto a = tensors_.begin();
  auto b = other.tensors_.begin();
  while (a != tensors_.end() && b != other.tensors_.end()) {
    if (a->first != b->first) return std::min(a->first, b->first);
    if (a->second.rows() != b->second.rows() ||
        a->second.cols() != b->second.cols()) {
      return a->first;
    }
    ++a;
    ++b;
  }
  if (a != tensors_.end()) return a->first;
  if (b != other.tensors_.end()) return b->first;
  return {};
}

bool ParameterSet::SameLayout(const ParameterSet& other) const {
  return FirstLayoutDifference(other).empty();
}

ParameterSet ParameterSet::ZerosLike() const {
  ParameterSet out;
  for (const auto& [key, m] : tensors_) {
    out.Add(key, Matrix::Zero(m.rows(), m.cols()));
  }
  return out;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (!SameLayout(other)) return false;
  for (const auto& [key, m] : tensors_) {
    if (m != other.at(key)) return false;
  }
  return true;
}

ag::Var ParamBinder::operator()(const std::string& key) {
  auto it = bound_.find(key);
  if (it != bound_.end()) return it->second;
  ag::Var v = tape_.Leaf(params_.at(key));
  bound_.emplace(key, v);
  return v;
}

ParameterSet ParamBinder::Gradients() const {
  ParameterSet grads;
  for (const auto& [key, m] : params_.tensors()) {
    auto it = bound_.find(key);
    grads.Add(key, it == bound_.end() ? Matrix::Zero(m.rows(), m.cols())
                                      : tape_.Grad(it->second));
  }
  return grads;
}

void ParameterBuilder::Glorot(const std::string& key, int rows, int cols,
                              int fan_in, int fan_out) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng_);
  params_.Add(key, std::move(m));
}

void ParameterBuilder::Normal(const std::string& key, int rows, int cols,
                              double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng_);
  params_.Add(key, std::move(m));
}

void ParameterBuilder::Constant(const std::string& key, int rows, int cols,
                                double value) {
  params_.Add(key, Matrix::Constant(rows, cols, value));
}

}  // namespace diarkit
