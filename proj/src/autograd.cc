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

#include "diarkit/autograd.h"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace diarkit::ag {
namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

void RequireSameTape(Var a, Var b) {
  if (a.tape() != b.tape()) throw Error("vars belong to different tapes");
}

Matrix SigmoidOf(const Matrix& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

const Matrix& Var::value() const { return tape_->Value(*this); }

Var Tape::Constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, false, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Leaf(Matrix value) {
  nodes_.push_back({std::move(value), {}, recording_, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Record(Matrix value, std::initializer_list<Var> parents,
                 BackwardFn backward) {
  bool needs_grad = false;
  if (recording_) {
    for (Var p : parents) {
      if (p.valid() && nodes_[p.id()].requires_grad) needs_grad = true;
    }
  }
  nodes_.push_back({std::move(value), {}, needs_grad,
                    needs_grad ? std::move(backward) : BackwardFn{}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::Backward(Var scalar) {
  if (!recording_) throw Error("Backward() on a tape that does not record");
  const Matrix& v = Value(scalar);
  if (v.rows() != 1 || v.cols() != 1) {
    throw Error("Backward() needs a 1x1 scalar");
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[scalar.id()].grad = Matrix::Ones(1, 1);
  for (int i = scalar.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, n.value, n.grad);
  }
}

Matrix Tape::Grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var MatMul(Var a, Var b) {
  RequireSameTape(a, b);
  if (a.cols() != b.rows()) throw Error("MatMul shape mismatch");
  Tape& tape = *a.tape();
  return tape.Record(a.value() * b.value(), {a, b},
                     [a, b](Tape& t, const Matrix&, const Matrix& g) {
                       if (t.RequiresGrad(a)) {
                         t.Accumulate(a, g * t.Value(b).transpose());
                       }
                       if (t.RequiresGrad(b)) {
                         t.Accumulate(b, t.Value(a).transpose() * g);
                       }
                     });
}

Var Linear(Var x, Var w, Var bias) {
  RequireSameTape(x, w);
  if (x.cols() != w.rows()) {
    throw Error("Linear: input width " + std::to_string(x.cols()) +
                " != weight rows " + std::to_string(w.rows()));
  }
  Matrix out = x.value() * w.value();
  if (bias.valid()) {
    if (bias.rows() != 1 || bias.cols() != w.cols()) {
      throw Error("Linear: bias shape mismatch");
    }
    out.rowwise() += bias.value().row(0);
  }
  Tape& tape = *x.tape();
  return tape.Record(
      std::move(out), {x, w, bias},
      [x, w, bias](Tape& t, const Matrix&, const Matrix& g) {
        if (t.RequiresGrad(x)) t.Accumulate(x, g * t.Value(w).transpose());
        if (t.RequiresGrad(w)) t.Accumulate(w, t.Value(x).transpose() * g);
        if (bias.valid() && t.RequiresGrad(bias)) {
          t.Accumulate(bias, g.colwise().sum());
        }
      });
}

Var Add(Var a, Var b) {
  RequireSameTape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error("Add shape mismatch");
  }
  return a.tape()->Record(a.value() + b.value(), {a, b},
                          [a, b](Tape& t, const Matrix&, const Matrix& g) {
                            t.Accumulate(a, g);
                            t.Accumulate(b, g);
                          });
}

Var Scale(Var a, double s) {
  return a.tape()->Record(a.value() * s, {a},
                          [a, s](Tape& t, const Matrix&, const Matrix& g) {
                            t.Accumulate(a, g * s);
                          });
}

Var Relu(Var x) {
  return x.tape()->Record(
      x.value().cwiseMax(0.0), {x},
      [x](Tape& t, const Matrix&, const Matrix& g) {
        const Matrix& in = t.Value(x);
        t.Accumulate(x, g.cwiseProduct(
                            (in.array() > 0.0).cast<double>().matrix()));
      });
}

Var Silu(Var x) {
  const Matrix s = SigmoidOf(x.value());
  Matrix out = x.value().cwiseProduct(s);
  return x.tape()->Record(
      std::move(out), {x}, [x](Tape& t, const Matrix&, const Matrix& g) {
        const Matrix& in = t.Value(x);
        const Matrix sig = SigmoidOf(in);
        const Matrix d = (sig.array() *
                          (1.0 + in.array() * (1.0 - sig.array())))
                             .matrix();
        t.Accumulate(x, g.cwiseProduct(d));
      });
}

Var Sigmoid(Var x) {
  return x.tape()->Record(
      SigmoidOf(x.value()), {x},
      [x](Tape& t, const Matrix& out, const Matrix& g) {
        t.Accumulate(x, (g.array() * out.array() * (1.0 - out.array()))
                            .matrix());
      });
}

Var LayerNorm(Var x, Var gain, Var shift, double eps) {
  const Matrix& in = x.value();
  const Eigen::Index D = in.cols();
  if (gain.cols() != D || shift.cols() != D) {
    throw Error("LayerNorm parameter width mismatch");
  }
  auto xhat = std::make_shared<Matrix>(in.rows(), D);
  auto inv_std = std::make_shared<Eigen::VectorXd>(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mean = in.row(r).mean();
    const double var = (in.row(r).array() - mean).square().mean();
    (*inv_std)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (in.row(r).array() - mean) * (*inv_std)(r);
  }
  Matrix out = xhat->array().rowwise() * gain.value().row(0).array();
  out.rowwise() += shift.value().row(0);
  return x.tape()->Record(
      std::move(out), {x, gain, shift},
      [x, gain, shift, xhat, inv_std](Tape& t, const Matrix&,
                                      const Matrix& g) {
        if (t.RequiresGrad(gain)) {
          t.Accumulate(gain, g.cwiseProduct(*xhat).colwise().sum());
        }
        if (t.RequiresGrad(shift)) t.Accumulate(shift, g.colwise().sum());
        if (!t.RequiresGrad(x)) return;
        const Matrix dxhat =
            g.array().rowwise() * t.Value(gain).row(0).array();
        Matrix dx(g.rows(), g.cols());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const double mean_d = dxhat.row(r).mean();
          const double mean_dx = dxhat.row(r).dot(xhat->row(r)) /
                                 static_cast<double>(g.cols());
          dx.row(r) = (*inv_std)(r) * (dxhat.row(r).array() - mean_d -
                                       xhat->row(r).array() * mean_dx);
        }
        t.Accumulate(x, dx);
      });
}

Var ConcatCols(Var a, Var b) {
  RequireSameTape(a, b);
  if (a.rows() != b.rows()) {
    throw Error("ConcatCols row mismatch: " + std::to_string(a.rows()) +
                " vs " + std::to_string(b.rows()));
  }
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ca = a.cols();
  const Eigen::Index cb = b.cols();
  return a.tape()->Record(
      std::move(out), {a, b},
      [a, b, ca, cb](Tape& t, const Matrix&, const Matrix& g) {
        t.Accumulate(a, g.leftCols(ca));
        t.Accumulate(b, g.rightCols(cb));
      });
}

Var StrideRows(Var x, int step) {
  if (step < 1) throw Error("StrideRows step must be >= 1");
  const Eigen::Index T = x.rows();
  const Eigen::Index kept = (T + step - 1) / step;
  Matrix out(kept, x.cols());
  for (Eigen::Index i = 0; i < kept; ++i) out.row(i) = x.value().row(i * step);
  return x.tape()->Record(
      std::move(out), {x}, [x, step](Tape& t, const Matrix&, const Matrix& g) {
        Matrix dx = Matrix::Zero(t.Value(x).rows(), g.cols());
        for (Eigen::Index i = 0; i < g.rows(); ++i) dx.row(i * step) = g.row(i);
        t.Accumulate(x, dx);
      });
}

Var Embedding(Var table, std::span<const int> indices) {
  const Matrix& tab = table.value();
  Matrix out(static_cast<Eigen::Index>(indices.size()), tab.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= tab.rows()) {
      throw Error("embedding index " + std::to_string(indices[i]) +
                  " outside table of " + std::to_string(tab.rows()));
    }
    out.row(static_cast<Eigen::Index>(i)) = tab.row(indices[i]);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return table.tape()->Record(
      std::move(out), {table},
      [table, idx = std::move(idx)](Tape& t, const Matrix&, const Matrix& g) {
        Matrix d = Matrix::Zero(t.Value(table).rows(), g.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
          d.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
        }
        t.Accumulate(table, d);
      });
}

Var MultiHeadAttention(Var q, Var k, Var v, int heads,
                       std::span<const std::uint8_t> key_mask,
                       std::vector<Matrix>* probs_out) {
  const Eigen::Index Tq = q.rows();
  const Eigen::Index Tk = k.rows();
  const Eigen::Index D = q.cols();
  if (k.cols() != D || v.cols() != D || v.rows() != Tk) {
    throw Error("attention q/k/v shape mismatch");
  }
  if (heads < 1 || D % heads != 0) {
    throw Error("model width " + std::to_string(D) +
                " not divisible by heads " + std::to_string(heads));
  }
  if (!key_mask.empty() && static_cast<Eigen::Index>(key_mask.size()) != Tk) {
    throw Error("attention key mask length mismatch");
  }
  const Eigen::Index dh = D / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool keep = q.tape()->recording();
  auto probs = std::make_shared<std::vector<Matrix>>();
  Matrix out(Tq, D);
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.value().middleCols(h * dh, dh);
    const auto kh = k.value().middleCols(h * dh, dh);
    const auto vh = v.value().middleCols(h * dh, dh);
    Matrix p = (qh * kh.transpose()) * scale;
    for (Eigen::Index r = 0; r < Tq; ++r) {
      double max_logit = -std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < Tk; ++c) {
        if (key_mask.empty() || key_mask[c]) {
          max_logit = std::max(max_logit, p(r, c));
        }
      }
      if (!std::isfinite(max_logit)) throw Error("attention row fully masked");
      double sum = 0.0;
      for (Eigen::Index c = 0; c < Tk; ++c) {
        const double e = (key_mask.empty() || key_mask[c])
                             ? std::exp(p(r, c) - max_logit)
                             : 0.0;
        p(r, c) = e;
        sum += e;
      }
      p.row(r) /= sum;
    }
    out.middleCols(h * dh, dh).noalias() = p * vh;
    if (probs_out != nullptr) probs_out->push_back(p);
    if (keep) probs->push_back(std::move(p));
  }
  return q.tape()->Record(
      std::move(out), {q, k, v},
      [q, k, v, heads, dh, scale, probs](Tape& t, const Matrix&,
                                         const Matrix& g) {
        const Matrix& qv = t.Value(q);
        const Matrix& kv = t.Value(k);
        const Matrix& vv = t.Value(v);
        Matrix dq = Matrix::Zero(qv.rows(), qv.cols());
        Matrix dk = Matrix::Zero(kv.rows(), kv.cols());
        Matrix dv = Matrix::Zero(vv.rows(), vv.cols());
        for (int h = 0; h < heads; ++h) {
          const Matrix& p = (*probs)[h];
          const auto gh = g.middleCols(h * dh, dh);
          dv.middleCols(h * dh, dh).noalias() = p.transpose() * gh;
          const Matrix dp = gh * vv.middleCols(h * dh, dh).transpose();
          // softmax backward, row by row
          const Eigen::VectorXd row_dot =
              (dp.cwiseProduct(p)).rowwise().sum();
          const Matrix ds =
              (p.array() * (dp.colwise() - row_dot).array()).matrix() * scale;
          dq.middleCols(h * dh, dh).noalias() = ds * kv.middleCols(h * dh, dh);
          dk.middleCols(h * dh, dh).noalias() =
              ds.transpose() * qv.middleCols(h * dh, dh);
        }
        t.Accumulate(q, dq);
        t.Accumulate(k, dk);
        t.Accumulate(v, dv);
      });
}

Var DepthwiseConv1d(Var x, Var weight, Var bias) {
  const Matrix& in = x.value();
  const Matrix& w = weight.value();
  const Eigen::Index T = in.rows();
  const Eigen::Index K = w.rows();
  if (w.cols() != in.cols() || bias.cols() != in.cols() || K % 2 == 0) {
    throw Error("DepthwiseConv1d shape mismatch (kernel must be odd)");
  }
  const Eigen::Index pad = (K - 1) / 2;
  Matrix out(T, in.cols());
  out.rowwise() = bias.value().row(0);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index j = 0; j < K; ++j) {
      const Eigen::Index src = t + j - pad;
      if (src < 0 || src >= T) continue;
      out.row(t).array() += in.row(src).array() * w.row(j).array();
    }
  }
  return x.tape()->Record(
      std::move(out), {x, weight, bias},
      [x, weight, bias, pad](Tape& t, const Matrix&, const Matrix& g) {
        const Matrix& in = t.Value(x);
        const Matrix& w = t.Value(weight);
        const Eigen::Index T = in.rows();
        Matrix dx = Matrix::Zero(T, in.cols());
        Matrix dw = Matrix::Zero(w.rows(), w.cols());
        for (Eigen::Index tt = 0; tt < T; ++tt) {
          for (Eigen::Index j = 0; j < w.rows(); ++j) {
            const Eigen::Index src = tt + j - pad;
            if (src < 0 || src >= T) continue;
            dx.row(src).array() += g.row(tt).array() * w.row(j).array();
            dw.row(j).array() += g.row(tt).array() * in.row(src).array();
          }
        }
        t.Accumulate(x, dx);
        t.Accumulate(weight, dw);
        t.Accumulate(bias, g.colwise().sum());
      });
}

MapShape Conv2dOutputShape(const MapShape& in, const Conv2dGeometry& g) {
  const int pt = (g.kernel_time - 1) / 2;
  const int pf = (g.kernel_freq - 1) / 2;
  return {in.channels * g.multiplier,
          (in.time + 2 * pt - g.kernel_time) / g.stride_time + 1,
          (in.freq + 2 * pf - g.kernel_freq) / g.stride_freq + 1};
}

Var DepthwiseConv2d(Var x, const MapShape& in, const Conv2dGeometry& geo,
                    Var weight, Var bias) {
  if (x.rows() != in.time || x.cols() != in.channels * in.freq) {
    throw Error("DepthwiseConv2d input does not match its map shape");
  }
  const MapShape out_shape = Conv2dOutputShape(in, geo);
  if (out_shape.time < 1 || out_shape.freq < 1) {
    throw Error("DepthwiseConv2d input too small for its kernel");
  }
  if (weight.rows() != out_shape.channels ||
      weight.cols() != geo.kernel_time * geo.kernel_freq ||
      bias.cols() != out_shape.channels) {
    throw Error("DepthwiseConv2d weight shape mismatch");
  }
  const int pt = (geo.kernel_time - 1) / 2;
  const int pf = (geo.kernel_freq - 1) / 2;
  // Visits every (output, input, weight) triple of the convolution.
  auto for_each_tap = [in, out_shape, geo, pt, pf](auto&& fn) {
    for (int o = 0; o < out_shape.channels; ++o) {
      const int ci = o / geo.multiplier;
      for (int to = 0; to < out_shape.time; ++to) {
        for (int a = 0; a < geo.kernel_time; ++a) {
          const int ti = to * geo.stride_time - pt + a;
          if (ti < 0 || ti >= in.time) continue;
          for (int fo = 0; fo < out_shape.freq; ++fo) {
            for (int b = 0; b < geo.kernel_freq; ++b) {
              const int fi = fo * geo.stride_freq - pf + b;
              if (fi < 0 || fi >= in.freq) continue;
              fn(to, o * out_shape.freq + fo, ti, ci * in.freq + fi, o,
                 a * geo.kernel_freq + b);
            }
          }
        }
      }
    }
  };
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  Matrix out(out_shape.time, out_shape.channels * out_shape.freq);
  for (int o = 0; o < out_shape.channels; ++o) {
    out.middleCols(o * out_shape.freq, out_shape.freq)
        .setConstant(bias.value()(0, o));
  }
  for_each_tap([&](int to, int oc, int ti, int ic, int o, int k) {
    out(to, oc) += xv(ti, ic) * wv(o, k);
  });
  return x.tape()->Record(
      std::move(out), {x, weight, bias},
      [x, weight, bias, out_shape, for_each_tap](Tape& t, const Matrix&,
                                                 const Matrix& g) {
        const Matrix& xv = t.Value(x);
        const Matrix& wv = t.Value(weight);
        Matrix dx = Matrix::Zero(xv.rows(), xv.cols());
        Matrix dw = Matrix::Zero(wv.rows(), wv.cols());
        for_each_tap([&](int to, int oc, int ti, int ic, int o, int k) {
          const double go = g(to, oc);
          dx(ti, ic) += go * wv(o, k);
          dw(o, k) += go * xv(ti, ic);
        });
        Matrix db(1, out_shape.channels);
        for (int o = 0; o < out_shape.channels; ++o) {
          db(0, o) = g.middleCols(o * out_shape.freq, out_shape.freq).sum();
        }
        t.Accumulate(x, dx);
        t.Accumulate(weight, dw);
        t.Accumulate(bias, db);
      });
}

Var PointwiseConv2d(Var x, const MapShape& in, Var weight, Var bias) {
  if (x.rows() != in.time || x.cols() != in.channels * in.freq ||
      weight.rows() != in.channels) {
    throw Error("PointwiseConv2d shape mismatch");
  }
  const int cout = static_cast<int>(weight.cols());
  if (bias.cols() != cout) throw Error("PointwiseConv2d bias shape mismatch");
  const int F = in.freq;
  const int cin = in.channels;
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  const Eigen::VectorXd b = bias.value().row(0).transpose();
  Matrix out(in.time, cout * F);
  for (int t = 0; t < in.time; ++t) {
    ConstMap xt(xv.row(t).data(), cin, F);
    MutMap yt(out.row(t).data(), cout, F);
    yt.noalias() = wv.transpose() * xt;
    yt.colwise() += b;
  }
  return x.tape()->Record(
      std::move(out), {x, weight, bias},
      [x, weight, bias, cin, cout, F](Tape& t, const Matrix&,
                                      const Matrix& g) {
        const Matrix& xv = t.Value(x);
        const Matrix& wv = t.Value(weight);
        Matrix dx(xv.rows(), xv.cols());
        Matrix dw = Matrix::Zero(cin, cout);
        Matrix db = Matrix::Zero(1, cout);
        for (Eigen::Index r = 0; r < xv.rows(); ++r) {
          ConstMap xt(xv.row(r).data(), cin, F);
          ConstMap gt(g.row(r).data(), cout, F);
          MutMap dxt(dx.row(r).data(), cin, F);
          dxt.noalias() = wv * gt;
          dw.noalias() += xt * gt.transpose();
          db.row(0) += gt.rowwise().sum().transpose();
        }
        t.Accumulate(x, dx);
        t.Accumulate(weight, dw);
        t.Accumulate(bias, db);
      });
}

}  // namespace diarkit::ag
