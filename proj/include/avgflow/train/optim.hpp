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

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "avgflow/core/errors.hpp"
#include "avgflow/core/rng.hpp"

namespace avgflow {

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double clip = 5.0;
  int iterations = 100;
  Eigen::Index batch = 500;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  /// Checks rates and 0 < batch <= M0.
  void validate(Eigen::Index M0) const;
};

/// Adam with bias correction:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
///   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps).
class Adam {
 public:
  Adam(Eigen::Index n, const OptimizerConfig& cfg);
  /// Descent step on params with gradient g.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& g);
  int steps() const { return t_; }

 private:
  OptimizerConfig cfg_;
  Eigen::VectorXd m_, v_;
  int t_ = 0;
};

/// Rescales g to norm max_norm when it is longer; returns the norm before clipping.
double clip_global_norm(Eigen::VectorXd& g, double max_norm);

/// B distinct transition indices drawn uniformly without replacement, in
/// increasing order; all of 0..M0-1 when B == M0.
std::vector<Eigen::Index> sample_minibatch(Eigen::Index M0, Eigen::Index B, Stream& rng);

/// Training stopped on a non-finite loss or gradient.
class TrainingDivergence : public NumericError {
 public:
  TrainingDivergence(int iteration, Eigen::VectorXd last_finite)
      : NumericError("non-finite loss or gradient at iteration " + std::to_string(iteration)),
        iteration_(iteration),
        last_finite_(std::move(last_finite)) {}
  int iteration() const { return iteration_; }
  const Eigen::VectorXd& last_finite_params() const { return last_finite_; }

 private:
  int iteration_;
  Eigen::VectorXd last_finite_;
};

/// One stochastic objective evaluation of a minimisation loop.
struct StepResult {
  double minibatch_loss = 0.0;
  double full_loss = 0.0;
  Eigen::VectorXd grad;
};

struct TrainResult {
  Eigen::VectorXd params;
  /// One row per iteration: iter, full_loss, minibatch_loss, grad_norm (before clipping).
  Eigen::MatrixXd history;
};

inline const std::vector<std::string> kLossHistoryHeader = {"iter", "full_loss", "minibatch_loss", "grad_norm"};

/// Generic clipped-Adam minimisation. step(iter, params) returns the loss terms
/// and gradient at params; the loop aborts with TrainingDivergence when any of
/// them is non-finite.
TrainResult minimise(const Eigen::VectorXd& init, const OptimizerConfig& opt,
                     const std::function<StepResult(int, const Eigen::VectorXd&)>& step);

}  // namespace avgflow
