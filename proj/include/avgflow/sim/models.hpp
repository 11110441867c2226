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

#include <variant>

#include <Eigen/Dense>

#include "avgflow/drift/kernel.hpp"
#include "avgflow/sim/solvent.hpp"

namespace avgflow {

/// beta(y) = -rate * y, alpha = alpha * I.
struct OrnsteinUhlenbeckFast {
  int dim = 1;
  double rate = 1.0;
  double alpha = 1.4142135623730951;
};

/// beta(y) = -gamma grad U_N(y), alpha = sqrt(2) I; invariant law is the Gibbs measure.
struct SolventLangevinFast {
  SolventParams params;
};

/// Independent angles with beta_i(y) = -kappa_i sin(y_i - mu_i), alpha = sqrt(2) I,
/// wrapped to [-pi, pi); invariant law is a product of von Mises laws.
struct VonMisesLangevinFast {
  Eigen::Vector4d concentration = Eigen::Vector4d::Ones();
  Eigen::Vector4d location = Eigen::Vector4d::Zero();
};

using FastDynamics = std::variant<OrnsteinUhlenbeckFast, SolventLangevinFast, VonMisesLangevinFast>;

int fast_dim(const FastDynamics& f);

/// Slow/fast system
///   dX = b(X, Y) dt + sigma dW,   dY = n beta(Y) dt + sqrt(n) alpha(Y) dW'.
struct MultiscaleModel {
  DriftKernel kernel;
  Eigen::MatrixXd sigma;  // d x d, constant; zero allowed for simulation only
  FastDynamics fast;
  double n_scale = 1.0;

  int dim() const { return kernel.dim(); }
  int fast_dim() const { return avgflow::fast_dim(fast); }
  void validate() const;
};

/// Constant slow diffusion as a d x d matrix; a scalar becomes scalar * I.
Eigen::MatrixXd diffusion_matrix(double sigma, int d);

/// Throws ConfigError unless sigma sigma^T is positive definite. Simulators
/// also accept an all-zero sigma (a deterministic path).
void check_diffusion(const Eigen::MatrixXd& sigma, int d, bool allow_zero = false);

}  // namespace avgflow
