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

#ifndef DIARKIT_TESTS_GRADCHECK_H_
#define DIARKIT_TESTS_GRADCHECK_H_

// Central finite differences against tape gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "diarkit/autograd.h"
#include "diarkit/parameters.h"

namespace diarkit::testing {

// Relative error with a floor on the denominator so that two gradients that
// are both ~0 do not blow up the ratio.
inline double RelativeError(double analytic, double numeric,
                            double floor = 1e-6) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
  double max_rel = 0.0;
  std::string worst;  // "<name>[i]"
  std::size_t checked = 0;
};

// sum(x .* r) as a scalar, to turn any op output into a loss.
inline ag::Var WeightedSum(ag::Var x, const Matrix& r) {
  ag::Tape& tape = *x.tape();
  Matrix v(1, 1);
  v(0, 0) = x.value().cwiseProduct(r).sum();
  return tape.Record(std::move(v), {x},
                     [x, r](ag::Tape& t, const Matrix&, const Matrix& g) {
                       t.Accumulate(x, r * g(0, 0));
                     });
}

using LeafLoss = std::function<ag::Var(ag::Tape&, std::vector<ag::Var>&)>;

inline GradCheck CheckLeafGradients(const std::vector<Matrix>& inputs,
                                    const LeafLoss& loss, double h = 1e-5) {
  std::vector<Matrix> analytic;
  {
    ag::Tape tape;
    std::vector<ag::Var> leaves;
    for (const auto& m : inputs) leaves.push_back(tape.Leaf(m));
    ag::Var l = loss(tape, leaves);
    tape.Backward(l);
    for (auto v : leaves) analytic.push_back(tape.Grad(v));
  }
  auto eval = [&](const std::vector<Matrix>& xs) {
    ag::Tape tape(false);
    std::vector<ag::Var> leaves;
    for (const auto& m : xs) leaves.push_back(tape.Leaf(m));
    return loss(tape, leaves).value()(0, 0);
  };
  GradCheck res;
  std::vector<Matrix> xs = inputs;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    for (Eigen::Index i = 0; i < xs[k].size(); ++i) {
      const double x0 = xs[k].data()[i];
      xs[k].data()[i] = x0 + h;
      const double up = eval(xs);
      xs[k].data()[i] = x0 - h;
      const double down = eval(xs);
      xs[k].data()[i] = x0;
      const double err =
          RelativeError(analytic[k].data()[i], (up - down) / (2 * h));
      ++res.checked;
      if (err > res.max_rel) {
        res.max_rel = err;
        res.worst = "input" + std::to_string(k) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

using ParamLoss = std::function<ag::Var(ParamBinder&)>;

inline GradCheck CheckParamGradients(const ParameterSet& params,
                                     const ParamLoss& loss, double h = 1e-5) {
  ParameterSet analytic;
  {
    ag::Tape tape;
    ParamBinder binder(tape, params);
    ag::Var l = loss(binder);
    tape.Backward(l);
    analytic = binder.Gradients();
  }
  ParameterSet p = params;
  auto eval = [&]() {
    ag::Tape tape(false);
    ParamBinder binder(tape, p);
    return loss(binder).value()(0, 0);
  };
  GradCheck res;
  for (auto& [key, value] : p.tensors()) {
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double x0 = value.data()[i];
      value.data()[i] = x0 + h;
      const double up = eval();
      value.data()[i] = x0 - h;
      const double down = eval();
      value.data()[i] = x0;
      const double err =
          RelativeError(analytic.at(key).data()[i], (up - down) / (2 * h));
      ++res.checked;
      if (err > res.max_rel) {
        res.max_rel = err;
        res.worst = key + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace diarkit::testing

#endif  // DIARKIT_TESTS_GRADCHECK_H_
