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

#include <Eigen/Dense>

#include "avgflow/ad/coupling_flow.hpp"
#include "avgflow/ad/mlp.hpp"
#include "avgflow/drift/kernel.hpp"
#include "avgflow/drift/model.hpp"
#include "avgflow/sim/trajectory.hpp"
#include "avgflow/train/optim.hpp"

namespace avgflow {

/// Penalized maximum likelihood for the latent flow. Iteration i draws the
/// minibatch from Stream(seed, "mle_batch", {i}) and L fresh latents from
/// Stream(seed, "mle_latent", {i}); the minibatch log-likelihood is scaled by
/// M0 / B. full_loss in the history is the full-data loss at the same latents.
/// Starts from init when given, else from the identity flow.
TrainResult fit_penalized_mle(const DriftKernel& kernel, const ad::CouplingFlowSpec& flow, const Trajectory& traj,
                              const Eigen::MatrixXd& sigma, const PenaltyConfig& penalty, Eigen::Index L,
                              const OptimizerConfig& opt, const Eigen::VectorXd* init = nullptr);

/// Glorot initialisation of every layer from Stream(seed, "baseline_init").
Eigen::VectorXd init_baseline_params(const ad::MlpSpec& spec, std::uint64_t seed);

/// Maximum likelihood with the drift modelled directly as beta(x) = mlp(x).
TrainResult fit_unstructured_baseline(const ad::MlpSpec& spec, const Trajectory& traj, const Eigen::MatrixXd& sigma,
                                      const OptimizerConfig& opt, const Eigen::VectorXd* init = nullptr);

}  // namespace avgflow
