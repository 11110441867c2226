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

#include "avgflow/ad/coupling_flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "avgflow/core/errors.hpp"

namespace avgflow::ad {

CouplingFlowSpec CouplingFlowSpec::alternating(int dim, int layers, std::vector<int> hidden, Activation activation) {
  CouplingFlowSpec spec;
  spec.dim = dim;
  spec.hidden = std::move(hidden);
  spec.activation = activation;
  const int split = dim / 2;
  for (int k = 0; k < layers; ++k) {
    CouplingMask m;
    for (int i = 0; i < dim; ++i) {
      const bool first_half = i < split;
      ((k % 2 == 0) == first_half ? m.conditioner : m.transformed).push_back(i);
    }
    spec.masks.push_back(std::move(m));
  }
  spec.validate();
  return spec;
}

MlpSpec CouplingFlowSpec::scale_net(int layer) const {
  const auto& m = masks[static_cast<std::size_t>(layer)];
  MlpSpec net;
  net.activation = activation;
  net.widths.push_back(static_cast<int>(m.conditioner.size()));
  net.widths.insert(net.widths.end(), hidden.begin(), hidden.end());
  net.widths.push_back(static_cast<int>(m.transformed.size()));
  return net;
}

MlpSpec CouplingFlowSpec::translation_net(int layer) const { return scale_net(layer); }

Eigen::Index CouplingFlowSpec::layer_offset(int layer) const {
  Eigen::Index off = 0;
  for (int k = 0; k < layer; ++k) off += scale_net(k).param_count() + translation_net(k).param_count();
  return off;
}

Eigen::Index CouplingFlowSpec::param_count() const { return layer_offset(layers()); }

void CouplingFlowSpec::validate() const {
  if (dim < 1) throw ConfigError("coupling flow: dim must be >= 1");
  if (masks.empty()) throw ConfigError("coupling flow: at least one layer required");
  if (!(scale_clamp > 0)) throw ConfigError("coupling flow: scale clamp must be > 0");
  for (int h : hidden)
    if (h < 1) throw ConfigError("coupling flow: hidden widths must be positive");
  for (const auto& m : masks) {
    std::vector<int> all = m.conditioner;
    all.insert(all.end(), m.transformed.begin(), m.transformed.end());
    std::sort(all.begin(), all.end());
    if (static_cast<int>(all.size()) != dim) throw ConfigError("coupling flow: mask does not partition coordinates");
    for (int i = 0; i < dim; ++i)
      if (all[static_cast<std::size_t>(i)] != i) throw ConfigError("coupling flow: mask does not partition coordinates");
  }
}

FlowResult flow_forward(const CouplingFlowSpec& spec, const Var& params, const Var& z) {
  if (z.cols() != spec.dim)
    throw ConfigError("flow_forward: input has " + std::to_string(z.cols()) + " columns, flow dim is " +
                      std::to_string(spec.dim));
  if (params.rows() != spec.param_count() || params.cols() != 1)
    throw ConfigError("flow_forward: expected " + std::to_string(spec.param_count()) + " parameters");
  Tape& tape = z.tape();
  Var y = z;
  Var logdet = tape.constant(Matrix::Zero(z.rows(), 1));
  for (int k = 0; k < spec.layers(); ++k) {
    const auto& mask = spec.masks[static_cast<std::size_t>(k)];
    if (mask.transformed.empty()) continue;
    const Eigen::Index off = spec.layer_offset(k);
    const MlpSpec s_net = spec.scale_net(k);
    Var ya = select_cols(y, mask.conditioner);
    Var yb = select_cols(y, mask.transformed);
    Var s = clamp(mlp_apply(s_net, params, off, ya), -spec.scale_clamp, spec.scale_clamp);
    Var t = mlp_apply(spec.translation_net(k), params, off + s_net.param_count(), ya);
    Var yb_new = add(cwise_mul(yb, exp(s)), t);
    y = merge_cols(ya, mask.conditioner, yb_new, mask.transformed, spec.dim);
    logdet = add(logdet, row_sums(s));
    if (!y.value().allFinite())
      throw NumericError("coupling layer " + std::to_string(k) + " produced a non-finite output");
  }
  return {y, logdet};
}

std::pair<Matrix, Eigen::VectorXd> flow_forward(const CouplingFlowSpec& spec, const Eigen::VectorXd& params,
                                                const Matrix& z) {
  Tape tape(false);
  auto r = flow_forward(spec, tape.constant(params), tape.constant(z));
  return {r.y.value(), r.logdet.value().col(0)};
}

std::pair<Matrix, Eigen::VectorXd> flow_inverse(const CouplingFlowSpec& spec, const Eigen::VectorXd& params,
                                                const Matrix& y_in) {
  if (y_in.cols() != spec.dim) throw ConfigError("flow_inverse: wrong input dimension");
  if (params.size() != spec.param_count()) throw ConfigError("flow_inverse: wrong parameter count");
  Matrix y = y_in;
  Eigen::VectorXd logdet = Eigen::VectorXd::Zero(y.rows());
  for (int k = spec.layers(); k-- > 0;) {
    const auto& mask = spec.masks[static_cast<std::size_t>(k)];
    if (mask.transformed.empty()) continue;
    const Eigen::Index off = spec.layer_offset(k);
    const MlpSpec s_net = spec.scale_net(k);
    Matrix ya(y.rows(), static_cast<Eigen::Index>(mask.conditioner.size()));
    for (std::size_t j = 0; j < mask.conditioner.size(); ++j) ya.col(static_cast<Eigen::Index>(j)) = y.col(mask.conditioner[j]);
    const Eigen::VectorXd s_params = params.segment(off, s_net.param_count());
    const Eigen::VectorXd t_params = params.segment(off + s_net.param_count(), s_net.param_count());
    const Matrix s = mlp_apply(s_net, s_params, ya).cwiseMax(-spec.scale_clamp).cwiseMin(spec.scale_clamp);
    const Matrix t = mlp_apply(spec.translation_net(k), t_params, ya);
    for (std::size_t j = 0; j < mask.transformed.size(); ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      y.col(mask.transformed[j]) = ((y.col(mask.transformed[j]) - t.col(c)).array() * (-s.col(c)).array().exp()).matrix();
    }
    logdet -= s.rowwise().sum();
    if (!y.allFinite()) throw NumericError("coupling layer " + std::to_string(k) + " inverse produced a non-finite output");
  }
  return {y, logdet};
}

Eigen::VectorXd standard_normal_log_density(const Matrix& z) {
  const double c = -0.5 * static_cast<double>(z.cols()) * std::log(2.0 * std::numbers::pi);
  return (c - 0.5 * z.rowwise().squaredNorm().array()).matrix();
}

Eigen::VectorXd flow_log_density(const CouplingFlowSpec& spec, const Eigen::VectorXd& params, const Matrix& y) {
  auto [z, logdet_inv] = flow_inverse(spec, params, y);
  return standard_normal_log_density(z) + logdet_inv;
}

Eigen::VectorXd init_flow_params(const CouplingFlowSpec& spec, Stream& rng) {
  spec.validate();
  Eigen::VectorXd p = Eigen::VectorXd::Zero(spec.param_count());
  for (int k = 0; k < spec.layers(); ++k) {
    const Eigen::Index off = spec.layer_offset(k);
    const MlpSpec s_net = spec.scale_net(k);
    const MlpSpec t_net = spec.translation_net(k);
    init_mlp_params(s_net, p.segment(off, s_net.param_count()), rng, true);
    init_mlp_params(t_net, p.segment(off + s_net.param_count(), t_net.param_count()), rng, true);
  }
  return p;
}

}  // namespace avgflow::ad
