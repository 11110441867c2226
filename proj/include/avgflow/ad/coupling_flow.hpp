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

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "avgflow/ad/mlp.hpp"
#include "avgflow/ad/tape.hpp"
#include "avgflow/core/rng.hpp"

namespace avgflow::ad {

/// Coordinates read by the conditioner nets and coordinates rescaled/shifted.
struct CouplingMask {
  std::vector<int> conditioner;
  std::vector<int> transformed;
};

/// Stack of affine coupling layers on R^dim,
///   y_b <- y_b * exp(clamp(s(y_a))) + t(y_a),   y_a unchanged,
/// with a standard normal reference law.
///
/// Parameters are laid out layer by layer: scale net s_k, then translation
/// net t_k, each in the MlpSpec layout.
struct CouplingFlowSpec {
  int dim = 1;
  std::vector<CouplingMask> masks;  // one per layer
  std::vector<int> hidden{5};
  Activation activation = Activation::Tanh;
  double scale_clamp = 5.0;

  /// Layer k conditions on the first floor(dim/2) coordinates when k is even
  /// and on the rest when k is odd.
  static CouplingFlowSpec alternating(int dim, int layers, std::vector<int> hidden,
                                      Activation activation = Activation::Tanh);

  int layers() const { return static_cast<int>(masks.size()); }
  MlpSpec scale_net(int layer) const;
  MlpSpec translation_net(int layer) const;
  Eigen::Index layer_offset(int layer) const;
  Eigen::Index param_count() const;
  void validate() const;
};

struct FlowResult {
  Var y;
  Var logdet;  // rows x 1
};

/// Pushes the rows of z through the flow; logdet is log|det dy/dz| per row.
FlowResult flow_forward(const CouplingFlowSpec& spec, const Var& params, const Var& z);

/// Plain forward: (y, logdet).
std::pair<Matrix, Eigen::VectorXd> flow_forward(const CouplingFlowSpec& spec, const Eigen::VectorXd& params,
                                                const Matrix& z);

/// Exact layer-by-layer inverse: (z, log|det dz/dy|).
std::pair<Matrix, Eigen::VectorXd> flow_inverse(const CouplingFlowSpec& spec, const Eigen::VectorXd& params,
                                                const Matrix& y);

/// Log-density of the pushforward law at the rows of y.
Eigen::VectorXd flow_log_density(const CouplingFlowSpec& spec, const Eigen::VectorXd& params, const Matrix& y);

/// Glorot weights, zero biases, zero output layers: the identity map.
Eigen::VectorXd init_flow_params(const CouplingFlowSpec& spec, Stream& rng);

/// Standard normal log-density of each row.
Eigen::VectorXd standard_normal_log_density(const Matrix& z);

}  // namespace avgflow::ad
