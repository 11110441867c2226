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

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "avgflow/ad/tape.hpp"
#include "avgflow/core/rng.hpp"

namespace avgflow::ad {

/// Fully connected network: widths = (input, hidden..., output), activation
/// after every hidden layer, linear output.
///
/// Parameter layout, per layer in order: the (w_out x w_in) weight matrix
/// row-major, then the w_out bias entries.
struct MlpSpec {
  std::vector<int> widths;
  Activation activation = Activation::Tanh;

  Eigen::Index param_count() const;
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  void validate() const;
};

/// Applies the network stored at params[offset, offset + param_count) to the rows of input.
Var mlp_apply(const MlpSpec& spec, const Var& params, Eigen::Index offset, const Var& input);

/// Plain evaluation (non-recording tape, same primitives).
Matrix mlp_apply(const MlpSpec& spec, const Eigen::VectorXd& params, const Matrix& input);

/// Glorot-uniform weights, zero biases; the last layer is zeroed when zero_last is set.
void init_mlp_params(const MlpSpec& spec, Eigen::Ref<Eigen::VectorXd> params, Stream& rng, bool zero_last);

}  // namespace avgflow::ad
