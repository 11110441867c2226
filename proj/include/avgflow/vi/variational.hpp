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
#include "avgflow/drift/kernel.hpp"
#include "avgflow/drift/model.hpp"
#include "avgflow/train/optim.hpp"

namespace avgflow {

struct PosteriorConfig {
  int layers = 6;
  std::vector<int> hidden{256};
  ad::Activation activation = ad::Activation::Tanh;
  double prior_scale = 1.0;
  /// Initial posterior spread: theta starts as theta0 + init_scale * xi around
  /// the identity latent flow theta0 (1 gives theta ~ N(theta0, I)).
  double init_scale = 1.0;
  Eigen::Index K = 100;  // parameter samples per iteration
  Eigen::Index L = 100;  // latent samples per parameter sample
  Eigen::Index param_batch = 20;
  Eigen::Index latent_batch = 25;
  void validate() const;
};

/// Posterior flow g over the latent-flow parameters theta, with a standard
/// normal reference and an isotropic N(0, prior_scale^2) prior on theta.
struct VariationalState {
  ad::CouplingFlowSpec latent;     // f_theta
  ad::CouplingFlowSpec posterior;  // g_vartheta on R^{dim theta}
  Eigen::VectorXd vartheta;
  double prior_scale = 1.0;
};

/// Posterior flow whose first two coupling layers map xi to theta0 + init_scale * xi
/// (every coordinate is transformed once) and whose remaining layers start at
/// the identity; theta0 is the identity latent flow drawn from Stream(seed, "latent_init").
VariationalState init_variational(const ad::CouplingFlowSpec& latent, const PosteriorConfig& cfg, std::uint64_t seed);

struct ParameterSamples {
  Eigen::MatrixXd theta;  // K x dim theta
  Eigen::VectorXd log_q;
  Eigen::MatrixXd xi;     // the reference draws
};

/// theta_k = g(xi_k), xi from Stream(seed, "vi_xi"); log_q = log rho_ref(xi) - logdet.
ParameterSamples sample_parameters(const VariationalState& state, Eigen::Index K, std::uint64_t seed);

/// Isotropic normal prior log-density of each row.
Eigen::VectorXd log_prior(const Eigen::MatrixXd& theta, double prior_scale);

/// (1/K) sum_k [log_q_k - log p_prior(theta_k)].
double kl_estimate(const VariationalState& state, const Eigen::MatrixXd& theta, const Eigen::VectorXd& log_q);

/// Which transitions enter the likelihood and how the minibatch is rescaled.
struct LikelihoodBatch {
  std::vector<Eigen::Index> idx;
  double scale = 1.0;
};

struct ElboTerms {
  double elbo = 0.0;
  double loglik = 0.0;  // (1/K) sum_k loglik_k
  double kl = 0.0;
  Eigen::VectorXd loglik_per_sample;
};

/// Per-sample scaled log-likelihoods loglik_k = scale * log L(mc drift of theta_k),
/// with latents Z_k from Stream(seed, "vi_latent", {k}). Optionally fills
/// grad (K x dim theta) with d loglik_k / d theta_k.
Eigen::VectorXd sample_log_likelihoods(const DriftKernel& kernel, const ad::CouplingFlowSpec& latent,
                                       const Eigen::MatrixXd& theta, const EulerLikelihood& lik,
                                       const LikelihoodBatch& batch, Eigen::Index L, std::uint64_t seed,
                                       Eigen::Index param_batch, Eigen::Index latent_batch,
                                       Eigen::MatrixXd* grad = nullptr);

/// Nested Monte Carlo ELBO: (1/K) sum_k loglik_k - KL estimate, sharing the
/// parameter draws between both terms. An empty batch contributes 0.
ElboTerms elbo_estimate(const VariationalState& state, const DriftKernel& kernel, const EulerLikelihood& lik,
                        const LikelihoodBatch& batch, const PosteriorConfig& cfg, std::uint64_t seed);

struct ElboGradient {
  ElboTerms terms;
  Eigen::VectorXd grad;  // d ELBO / d vartheta
};

ElboGradient elbo_and_gradient(const VariationalState& state, const DriftKernel& kernel, const EulerLikelihood& lik,
                               const LikelihoodBatch& batch, const PosteriorConfig& cfg, std::uint64_t seed);

inline const std::vector<std::string> kElboHistoryHeader = {"iter", "elbo", "loglik_term", "kl_term", "grad_norm"};

struct ViResult {
  VariationalState state;
  Eigen::MatrixXd history;  // iter, elbo, loglik_term, kl_term, grad_norm (before clipping)
};

/// Stochastic ELBO ascent with clipped Adam. Iteration i uses seed
/// derive_key(opt.seed, "vi_iter", {i}) for its draws and Stream(opt.seed, "vi_batch", {i}) for its minibatch.
ViResult run_vi(const DriftKernel& kernel, const VariationalState& init, const Trajectory& traj,
                const Eigen::MatrixXd& sigma, const PosteriorConfig& cfg, const OptimizerConfig& opt);

struct DriftBands {
  Eigen::MatrixXd mean;   // grid points x d
  Eigen::MatrixXd lower;  // quantile q_lo
  Eigen::MatrixXd upper;  // quantile q_hi
};

/// Empirical quantile with linear interpolation between order statistics (position q (n - 1)).
double empirical_quantile(std::vector<double> values, double q);

/// Posterior drift on a grid: K_eval parameter draws from Stream(seed, "band_xi"),
/// each with L_eval latents from Stream(seed, "band_latent", {k}).
DriftBands posterior_drift_bands(const VariationalState& state, const DriftKernel& kernel, const Eigen::MatrixXd& grid,
                                 Eigen::Index K_eval, Eigen::Index L_eval, std::uint64_t seed, double q_lo = 0.05,
                                 double q_hi = 0.95, Eigen::Index param_batch = 20, Eigen::Index latent_batch = 100);

}  // namespace avgflow
