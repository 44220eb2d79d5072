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

#ifndef DIARKIT_AUTOGRAD_H_
#define DIARKIT_AUTOGRAD_H_

// A small reverse-mode differentiation tape over row-major matrices.
//
// Every op appends a node holding its value and a closure that maps the
// node's output gradient to gradients of its parents. Backward() walks the
// nodes in reverse creation order, which is a valid topological order
// because parents always precede children.

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "diarkit/types.h"

namespace diarkit::ag {

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  // (tape, output value, gradient w.r.t. output)
  using BackwardFn =
      std::function<void(Tape&, const Matrix&, const Matrix&)>;

  // With record_gradients = false no closures are kept; useful for
  // inference.
  explicit Tape(bool record_gradients = true)
      : recording_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Constant(Matrix value);
  Var Leaf(Matrix value);
  Var Record(Matrix value, std::initializer_list<Var> parents,
             BackwardFn backward);

  bool recording() const { return recording_; }
  bool RequiresGrad(Var v) const { return nodes_[v.id()].requires_grad; }
  const Matrix& Value(Var v) const { return nodes_[v.id()].value; }

  template <typename Derived>
  void Accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  // Seeds d(scalar)/d(scalar) = 1 and propagates to every node.
  void Backward(Var scalar);

  // Gradient of the last Backward() target w.r.t. v; zeros if v did not
  // contribute.
  Matrix Grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
  bool recording_;
};

// Geometry of a 2-D feature map stored as a T x (channels * freq) matrix,
// column index = channel * freq + f.
struct MapShape {
  int channels = 1;
  int time = 0;
  int freq = 0;
};

Var MatMul(Var a, Var b);
// x * w + b; `bias` may be an invalid Var.
Var Linear(Var x, Var w, Var bias);
Var Add(Var a, Var b);
Var Scale(Var a, double s);
Var Relu(Var x);
Var Silu(Var x);
Var Sigmoid(Var x);
// Row-wise normalisation with learned gain/shift (both 1 x D).
Var LayerNorm(Var x, Var gain, Var shift, double eps = 1e-5);
Var ConcatCols(Var a, Var b);
// Keeps rows 0, step, 2 * step, ...
Var StrideRows(Var x, int step);
// Row `indices[i]` of `table` becomes output row i.
Var Embedding(Var table, std::span<const int> indices);

// Scaled dot-product attention with `heads` heads over the column blocks of
// q, k, v (all T x D). Keys whose mask entry is 0 receive zero weight; an
// empty mask means no masking. When `probs_out` is non-null the per-head
// T x T attention matrices are appended to it.
Var MultiHeadAttention(Var q, Var k, Var v, int heads,
                       std::span<const std::uint8_t> key_mask = {},
                       std::vector<Matrix>* probs_out = nullptr);

// Per-channel convolution along time with symmetric zero padding that keeps
// the length. weight: K x D (K odd), bias: 1 x D.
Var DepthwiseConv1d(Var x, Var weight, Var bias);

// Depthwise 2-D convolution. Output channel o reads input channel
// o / multiplier. weight: (C_in * multiplier) x (kt * kf), bias 1 x C_out.
// Padding is (k - 1) / 2 on both sides of each axis.
struct Conv2dGeometry {
  int multiplier = 1;
  int kernel_time = 3;
  int kernel_freq = 3;
  int stride_time = 2;
  int stride_freq = 2;
};
MapShape Conv2dOutputShape(const MapShape& in, const Conv2dGeometry& g);
Var DepthwiseConv2d(Var x, const MapShape& in, const Conv2dGeometry& g,
                    Var weight, Var bias);

// 1x1 convolution mixing channels: weight C_in x C_out, bias 1 x C_out.
Var PointwiseConv2d(Var x, const MapShape& in, Var weight, Var bias);

}  // namespace diarkit::ag

#endif  // DIARKIT_AUTOGRAD_H_
