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

#include "avgflow/vi/variational.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "avgflow/core/errors.hpp"
#include "avgflow/core/parallel.hpp"
#include "avgflow/core/rng.hpp"

namespace avgflow {

namespace {

ParameterSamples draw_parameters(const VariationalState& state, Eigen::Index K, std::uint64_t seed, const char* tag) {
  if (K < 1) throw ConfigError("parameter sample count K must be >= 1");
  ParameterSamples out;
  Stream rng(seed, tag);
  out.xi = rng.normal_matrix(K, state.posterior.dim);
  auto [theta, logdet] = ad::flow_forward(state.posterior, state.vartheta, out.xi);
  out.theta = std::move(theta);
  out.log_q = ad::standard_normal_log_density(out.xi) - logdet;
  return out;
}

ad::Var log_prior_node(const ad::Var& theta, double s) {
  const double c = -0.5 * static_cast<double>(theta.cols()) * std::log(2.0 * std::numbers::pi * s * s);
  return ad::add_scalar(ad::scale(ad::row_sums(ad::square(theta)), -0.5 / (s * s)), c);
}

ad::Var kl_node(const ad::Var& theta, const ad::Var& log_q, double s) {
  return ad::mean(ad::sub(log_q, log_prior_node(theta, s)));
}

// Shared by the plain and the differentiated ELBO so both give identical values.
struct ElboGraph {
  ad::Var elbo, loglik, kl, per_sample;
};

ElboGraph build_elbo(ad::Tape& tape, const VariationalState& state, const ad::Var& vartheta, const DriftKernel& kernel,
                     const EulerLikelihood& lik, const LikelihoodBatch& batch, const PosteriorConfig& cfg,
                     std::uint64_t seed) {
  Stream rng(seed, "vi_xi");
  const Eigen::MatrixXd xi = rng.normal_matrix(cfg.K, state.posterior.dim);
  const ad::FlowResult g = ad::flow_forward(state.posterior, vartheta, tape.constant(xi));
  const ad::Var theta = g.y;
  const ad::Var log_q = ad::sub(tape.constant(ad::standard_normal_log_density(xi)), g.logdet);

  const bool want_grad = tape.recording() && tape.requires_grad(theta);
  Eigen::MatrixXd G;
  Eigen::VectorXd ll = sample_log_likelihoods(kernel, state.latent, theta.value(), lik, batch, cfg.L, seed,
                                              cfg.param_batch, cfg.latent_batch, want_grad ? &G : nullptr);
  ElboGraph out;
  out.per_sample = tape.record(ll, {theta}, [theta, G](ad::Tape& t, const ad::Matrix& g, const ad::Matrix&) {
    t.accumulate(theta, (G.array().colwise() * g.col(0).array()).matrix());
  });
  out.loglik = ad::mean(out.per_sample);
  out.kl = kl_node(theta, log_q, state.prior_scale);
  out.elbo = ad::sub(out.loglik, out.kl);
  return out;
}

ElboTerms terms_of(const ElboGraph& g) {
  ElboTerms t;
  t.elbo = g.elbo.scalar();
  t.loglik = g.loglik.scalar();
  t.kl = g.kl.scalar();
  t.loglik_per_sample = g.per_sample.value().col(0);
  return t;
}

}  // namespace

void PosteriorConfig::validate() const {
  if (layers < 1) throw ConfigError("posterior.layers must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ConfigError("posterior.hidden widths must be positive");
  if (!(prior_scale > 0)) throw ConfigError("posterior.prior_scale must be > 0");
  if (!(init_scale > 0)) throw ConfigError("posterior.init_scale must be > 0");
  if (K < 1 || L < 1) throw ConfigError("K and L must be >= 1");
  if (param_batch < 1 || latent_batch < 1) throw ConfigError("batch sizes must be >= 1");
}

VariationalState init_variational(const ad::CouplingFlowSpec& latent, const PosteriorConfig& cfg, std::uint64_t seed) {
  latent.validate();
  cfg.validate();
  VariationalState s;
  s.latent = latent;
  s.posterior = ad::CouplingFlowSpec::alternating(static_cast<int>(latent.param_count()), cfg.layers, cfg.hidden,
                                                   cfg.activation);
  Stream rng(seed, "posterior_init");
  s.vartheta = ad::init_flow_params(s.posterior, rng);
  Stream latent_rng(seed, "latent_init");
  const Eigen::VectorXd theta0 = ad::init_flow_params(latent, latent_rng);
  // Output biases of the first two layers: s = log(init_scale), t = theta0 on the transformed block.
  const double log_scale = std::log(cfg.init_scale);
  for (int k = 0; k < std::min(2, s.posterior.layers()); ++k) {
    const auto& mask = s.posterior.masks[static_cast<std::size_t>(k)];
    const Eigen::Index n_out = static_cast<Eigen::Index>(mask.transformed.size());
    const Eigen::Index s_count = s.posterior.scale_net(k).param_count();
    const Eigen::Index s_bias = s.posterior.layer_offset(k) + s_count - n_out;
    const Eigen::Index t_bias = s_bias + s.posterior.translation_net(k).param_count();
    for (Eigen::Index j = 0; j < n_out; ++j) {
      s.vartheta(s_bias + j) = log_scale;
      s.vartheta(t_bias + j) = theta0(mask.transformed[static_cast<std::size_t>(j)]);
    }
  }
  s.prior_scale = cfg.prior_scale;
  return s;
}

ParameterSamples sample_parameters(const VariationalState& state, Eigen::Index K, std::uint64_t seed) {
  return draw_parameters(state, K, seed, "vi_xi");
}

Eigen::VectorXd log_prior(const Eigen::MatrixXd& theta, double prior_scale) {
  ad::Tape tape(false);
  return log_prior_node(tape.constant(theta), prior_scale).value().col(0);
}

double kl_estimate(const VariationalState& state, const Eigen::MatrixXd& theta, const Eigen::VectorXd& log_q) {
  if (theta.rows() != log_q.size()) throw ConfigError("kl_estimate: theta and log_q sizes differ");
  ad::Tape tape(false);
  return kl_node(tape.constant(theta), tape.constant(log_q), state.prior_scale).scalar();
}

Eigen::VectorXd sample_log_likelihoods(const DriftKernel& kernel, const ad::CouplingFlowSpec& latent,
                                       const Eigen::MatrixXd& theta, const EulerLikelihood& lik,
                                       const LikelihoodBatch& batch, Eigen::Index L, std::uint64_t seed,
                                       Eigen::Index param_batch, Eigen::Index latent_batch, Eigen::MatrixXd* grad) {
  const Eigen::Index K = theta.rows();
  if (theta.cols() != latent.param_count()) throw ConfigError("theta width does not match the latent flow");
  if (param_batch < 1) param_batch = K;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(K);
  if (grad) *grad = Eigen::MatrixXd::Zero(K, theta.cols());
  if (batch.idx.empty()) return out;
  const Eigen::MatrixXd X = lik.left_states(batch.idx);
  for (Eigen::Index b0 = 0; b0 < K; b0 += param_batch) {
    const Eigen::Index nb = std::min(param_batch, K - b0);
    parallel_for(static_cast<std::size_t>(nb), [&](std::size_t i) {
      const Eigen::Index k = b0 + static_cast<Eigen::Index>(i);
      const Eigen::MatrixXd Z = draw_latents(seed, "vi_latent", static_cast<std::uint64_t>(k), L, latent.dim);
      ad::Tape tape(grad != nullptr);
      const ad::Var th = tape.variable(theta.row(k).transpose());
      const ad::Var Y = ad::flow_forward(latent, th, tape.constant(Z)).y;
      const ad::Var ll = lik.value(mc_drift(kernel, X, Y, latent_batch), batch.idx, batch.scale);
      out(k) = ll.scalar();
      if (grad) {
        tape.backward(ll);
        grad->row(k) = tape.grad(th).col(0).transpose();
      }
    });
  }
  return out;
}

ElboTerms elbo_estimate(const VariationalState& state, const DriftKernel& kernel, const EulerLikelihood& lik,
                        const LikelihoodBatch& batch, const PosteriorConfig& cfg, std::uint64_t seed) {
  ad::Tape tape(false);
  return terms_of(build_elbo(tape, state, tape.constant(state.vartheta), kernel, lik, batch, cfg, seed));
}

ElboGradient elbo_and_gradient(const VariationalState& state, const DriftKernel& kernel, const EulerLikelihood& lik,
                               const LikelihoodBatch& batch, const PosteriorConfig& cfg, std::uint64_t seed) {
  ad::Tape tape;
  const ad::Var v = tape.variable(state.vartheta);
  const ElboGraph g = build_elbo(tape, state, v, kernel, lik, batch, cfg, seed);
  tape.backward(g.elbo);
  return {terms_of(g), tape.grad(v).col(0)};
}

ViResult run_vi(const DriftKernel& kernel, const VariationalState& init, const Trajectory& traj,
                const Eigen::MatrixXd& sigma, const PosteriorConfig& cfg, const OptimizerConfig& opt) {
  cfg.validate();
  if (init.latent.dim != kernel.fast_dim()) throw ConfigError("latent flow dimension must equal the kernel's fast dimension");
  const EulerLikelihood lik(traj, sigma);
  const Eigen::Index M0 = lik.transitions();
  opt.validate(M0);
  ViResult out{init, Eigen::MatrixXd(opt.iterations, 5)};
  Adam adam(init.vartheta.size(), opt);
  const double scale = static_cast<double>(M0) / static_cast<double>(opt.batch);
  for (int it = 0; it < opt.iterations; ++it) {
    Stream batch_rng(opt.seed, "vi_batch", {static_cast<std::uint64_t>(it)});
    const LikelihoodBatch batch{sample_minibatch(M0, opt.batch, batch_rng), scale};
    const std::uint64_t seed_it = derive_key(opt.seed, "vi_iter", {static_cast<std::uint64_t>(it)});
    ElboGradient eg = elbo_and_gradient(out.state, kernel, lik, batch, cfg, seed_it);
    if (!std::isfinite(eg.terms.elbo) || !eg.grad.allFinite()) throw TrainingDivergence(it, out.state.vartheta);
    Eigen::VectorXd descent = -eg.grad;
    const double norm = clip_global_norm(descent, opt.clip);
    out.history.row(it) << it, eg.terms.elbo, eg.terms.loglik, eg.terms.kl, norm;
    adam.step(out.state.vartheta, descent);
  }
  return out;
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("empirical_quantile: no values");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("empirical_quantile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return values[lo] + w * (values[hi] - values[lo]);
}

DriftBands posterior_drift_bands(const VariationalState& state, const DriftKernel& kernel, const Eigen::MatrixXd& grid,
                                 Eigen::Index K_eval, Eigen::Index L_eval, std::uint64_t seed, double q_lo, double q_hi,
                                 Eigen::Index param_batch, Eigen::Index latent_batch) {
  if (L_eval < 1) throw ConfigError("L_eval must be >= 1");
  if (!(q_lo > 0 && q_lo < 1 && q_hi > 0 && q_hi < 1)) throw ConfigError("band quantiles must lie in (0, 1)");
  if (param_batch < 1) param_batch = K_eval;
  const ParameterSamples ps = draw_parameters(state, K_eval, seed, "band_xi");
  std::vector<Eigen::MatrixXd> drifts(static_cast<std::size_t>(K_eval));
  for (Eigen::Index b0 = 0; b0 < K_eval; b0 += param_batch) {
    const Eigen::Index nb = std::min(param_batch, K_eval - b0);
    parallel_for(static_cast<std::size_t>(nb), [&](std::size_t i) {
      const Eigen::Index k = b0 + static_cast<Eigen::Index>(i);
      const Eigen::MatrixXd Z = draw_latents(seed, "band_latent", static_cast<std::uint64_t>(k), L_eval, state.latent.dim);
      const Eigen::MatrixXd Y = ad::flow_forward(state.latent, ps.theta.row(k).transpose(), Z).first;
      drifts[static_cast<std::size_t>(k)] = mc_drift_from_samples(kernel, grid, Y, latent_batch);
    });
  }
  DriftBands out;
  const Eigen::Index G = grid.rows();
  const int d = kernel.dim();
  out.mean = Eigen::MatrixXd::Zero(G, d);
  out.lower.resize(G, d);
  out.upper.resize(G, d);
  for (const auto& m : drifts) out.mean += m;
  out.mean /= static_cast<double>(K_eval);
  std::vector<double> v(static_cast<std::size_t>(K_eval));
  for (Eigen::Index g = 0; g < G; ++g)
    for (int j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = drifts[k](g, j);
      out.lower(g, j) = empirical_quantile(v, q_lo);
      out.upper(g, j) = empirical_quantile(v, q_hi);
    }
  return out;
}

}  // namespace avgflow
