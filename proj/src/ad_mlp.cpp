// Copyright 2026 The avgflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "avgflow/ad/mlp.hpp"

#include <cmath>

#include "avgflow/core/errors.hpp"

namespace avgflow::ad {

Eigen::Index MlpSpec::param_count() const {
  Eigen::Index n = 0;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) n += static_cast<Eigen::Index>(widths[k]) * widths[k + 1] + widths[k + 1];
  return n;
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ConfigError("mlp: need at least input and output widths");
  for (std::size_t k = 0; k < widths.size(); ++k) {
    if (widths[k] < 0) throw ConfigError("mlp: negative width");
    if (k > 0 && k + 1 < widths.size() && widths[k] == 0) throw ConfigError("mlp: hidden width must be positive");
  }
}

Var mlp_apply(const MlpSpec& spec, const Var& params, Eigen::Index offset, const Var& input) {
  if (input.cols() != spec.input_dim())
    throw ConfigError("mlp: input has " + std::to_string(input.cols()) + " columns, spec expects " +
                      std::to_string(spec.input_dim()));
  if (offset + spec.param_count() > params.rows()) throw ConfigError("mlp: parameter vector too short");
  Var h = input;
  Eigen::Index at = offset;
  const std::size_t layers = spec.widths.size() - 1;
  for (std::size_t k = 0; k < layers; ++k) {
    const int in = spec.widths[k];
    const int out = spec.widths[k + 1];
    // row-major (out x in) W is column-major (in x out) W^T
    Var wt = block(params, at, in, out);
    at += static_cast<Eigen::Index>(in) * out;
    Var b = transpose(block(params, at, out, 1));
    at += out;
    h = add_row(matmul(h, wt), b);
    if (k + 1 < layers) h = activate(h, spec.activation);
  }
  return h;
}

Matrix mlp_apply(const MlpSpec& spec, const Eigen::VectorXd& params, const Matrix& input) {
  Tape tape(false);
  Var p = tape.constant(params);
  Var x = tape.constant(input);
  return mlp_apply(spec, p, 0, x).value();
}

void init_mlp_params(const MlpSpec& spec, Eigen::Ref<Eigen::VectorXd> params, Stream& rng, bool zero_last) {
  Eigen::Index at = 0;
  const std::size_t layers = spec.widths.size() - 1;
  for (std::size_t k = 0; k < layers; ++k) {
    const int in = spec.widths[k];
    const int out = spec.widths[k + 1];
    const bool last = k + 1 == layers;
    const double limit = (in + out) > 0 ? std::sqrt(6.0 / (in + out)) : 0.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(in) * out; ++i)
      params(at + i) = (last && zero_last) ? 0.0 : limit * (2.0 * rng.uniform() - 1.0);
    at += static_cast<Eigen::Index>(in) * out;
    params.segment(at, out).setZero();
    at += out;
  }
}

}  // namespace avgflow::ad
