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
#include <vector>

#include <Eigen/Dense>

#include "avgflow/ad/coupling_flow.hpp"
#include "avgflow/ad/tape.hpp"
#include "avgflow/drift/kernel.hpp"
#include "avgflow/sim/trajectory.hpp"

namespace avgflow {

/// lambda * E|Y|^p added to the negative log-likelihood.
struct PenaltyConfig {
  double lambda = 1e-3;
  double p = 2.0;
  /// Requires lambda >= 0 and p > q0 + 1 for the kernel's growth order q0.
  void validate(const DriftKernel& kernel) const;
};

/// Growth order q0 of |d b / d y| in |y| used by the penalty exponent check.
int kernel_growth_order(const DriftKernel& kernel);

/// L x dim standard normal latents from Stream(seed, tag, {index}).
Eigen::MatrixXd draw_latents(std::uint64_t seed, const char* tag, std::uint64_t index, Eigen::Index L, int dim);

/// Monte Carlo drift (1/L) sum_l b(X(m, :), Y(l, :)) as a tape op in Y; X is data.
/// Throws NumericError naming (m, l) if the kernel produces a non-finite value.
/// latent_batch > 0 feeds the kernel consecutive chunks of Y (same result).
ad::Var mc_drift(const DriftKernel& kernel, const Eigen::MatrixXd& X, const ad::Var& Y, Eigen::Index latent_batch = 0);

/// Same average from given pushforward samples.
Eigen::MatrixXd mc_drift_from_samples(const DriftKernel& kernel, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                      Eigen::Index latent_batch = 0);

/// Draws L latents from Stream(seed, "mc_latent"), pushes them through the
/// flow once and averages the kernel over them for every row of X. The latents
/// are processed in chunks of latent_batch rows; the result does not depend on
/// the chunk size.
Eigen::MatrixXd mc_drift(const DriftKernel& kernel, const ad::CouplingFlowSpec& flow, const Eigen::VectorXd& params,
                         const Eigen::MatrixXd& X, Eigen::Index L, std::uint64_t seed, Eigen::Index latent_batch = 0);

/// Euler-Maruyama transition log-density of an observed path,
///   sum_m log N(x_{m+1}; x_m + beta_m Delta, A Delta),  A = sigma sigma^T,
/// with one drift row per transition evaluated at the left endpoint.
class EulerLikelihood {
 public:
  EulerLikelihood(const Trajectory& traj, const Eigen::MatrixXd& sigma);

  Eigen::Index transitions() const { return increments_.rows(); }
  int dim() const { return static_cast<int>(increments_.cols()); }
  double spacing() const { return delta_; }
  /// Left endpoints x_0 .. x_{M0-1}.
  const Eigen::MatrixXd& left_states() const { return left_; }
  Eigen::MatrixXd left_states(const std::vector<Eigen::Index>& idx) const;
  std::vector<Eigen::Index> all_transitions() const;

  /// Full log-likelihood; drift has one row per transition.
  double value(const Eigen::MatrixXd& drift) const;
  /// scale * sum over the transitions idx; drift row j belongs to transition idx[j].
  double value(const Eigen::MatrixXd& drift, const std::vector<Eigen::Index>& idx, double scale) const;
  ad::Var value(const ad::Var& drift, const std::vector<Eigen::Index>& idx, double scale) const;
  /// d value / d drift for the rows of idx (already multiplied by scale).
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& drift, const std::vector<Eigen::Index>& idx, double scale) const;

 private:
  Eigen::MatrixXd left_;
  Eigen::MatrixXd increments_;
  Eigen::MatrixXd a_inv_;
  Eigen::LLT<Eigen::MatrixXd> a_llt_;
  double delta_ = 0.0;
  double constant_ = 0.0;  // per-step normalising term
};

/// Convenience wrapper over EulerLikelihood::value.
double em_log_likelihood(const Eigen::MatrixXd& drift_at_obs, const Trajectory& traj, const Eigen::MatrixXd& sigma);

/// (1/L) sum_l |Y(l, :)|^p.
ad::Var moment_penalty(const ad::Var& Y, double p);
double moment_penalty(const ad::CouplingFlowSpec& flow, const Eigen::VectorXd& params, double p, Eigen::Index L,
                      std::uint64_t seed);

/// The pieces of one stochastic penalized-loss evaluation.
struct LossTerms {
  ad::Var loss;
  ad::Var loglik;   // scaled minibatch log-likelihood
  ad::Var penalty;  // unweighted moment
};

/// -scale * loglik(idx) + lambda * moment_penalty, with Y = f_theta(Z) shared by both terms.
LossTerms penalized_loss(const DriftKernel& kernel, const ad::CouplingFlowSpec& flow, const ad::Var& params,
                         const EulerLikelihood& lik, const PenaltyConfig& penalty, const Eigen::MatrixXd& Z,
                         const std::vector<Eigen::Index>& idx, double scale);

/// Full-data loss with latents drawn from Stream(seed, "mc_latent").
double penalized_loss(const DriftKernel& kernel, const ad::CouplingFlowSpec& flow, const Eigen::VectorXd& params,
                      const Trajectory& traj, const Eigen::MatrixXd& sigma, const PenaltyConfig& penalty,
                      Eigen::Index L, std::uint64_t seed);

}  // namespace avgflow
