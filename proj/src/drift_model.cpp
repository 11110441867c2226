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

#include "avgflow/drift/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "avgflow/core/errors.hpp"
#include "avgflow/core/parallel.hpp"
#include "avgflow/core/rng.hpp"
#include "avgflow/sim/models.hpp"

namespace avgflow {

namespace {

// Fixed block sizes keep results independent of the thread count.
constexpr Eigen::Index kStateBlock = 64;
constexpr Eigen::Index kLatentBlock = 64;

Eigen::Index blocks(Eigen::Index n, Eigen::Index b) { return (n + b - 1) / b; }

[[noreturn]] void report_non_finite(const DriftKernel& kernel, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  for (Eigen::Index m = 0; m < X.rows(); ++m)
    for (Eigen::Index l = 0; l < Y.rows(); ++l) {
      const Eigen::VectorXd v = kernel.eval(X.row(m).transpose(), Y.row(l).transpose());
      if (!v.allFinite())
        throw NumericError("mc_drift: non-finite kernel value at state " + std::to_string(m) + ", latent " +
                           std::to_string(l));
    }
  throw NumericError("mc_drift: non-finite average");
}

// Sum over latent rows (in index order) for every row of X. The latent rows
// are fed to the kernel in consecutive chunks of latent_batch, which does not
// change the order of the additions.
Eigen::MatrixXd kernel_sum(const DriftKernel& kernel, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                           Eigen::Index latent_batch) {
  const Eigen::Index L = Y.rows();
  if (latent_batch <= 0 || latent_batch > L) latent_batch = std::max<Eigen::Index>(L, 1);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(X.rows(), kernel.dim());
  const Eigen::Index nb = blocks(X.rows(), kStateBlock);
  parallel_for(static_cast<std::size_t>(nb), [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * kStateBlock;
    const Eigen::Index count = std::min(kStateBlock, X.rows() - begin);
    const Eigen::MatrixXd Xb = X.middleRows(begin, count);
    Eigen::MatrixXd part = Eigen::MatrixXd::Zero(count, kernel.dim());
    if (latent_batch == L) {
      kernel.accumulate(Xb, Y, part);
    } else {
      for (Eigen::Index l0 = 0; l0 < L; l0 += latent_batch)
        kernel.accumulate(Xb, Y.middleRows(l0, std::min(latent_batch, L - l0)), part);
    }
    acc.middleRows(begin, count) = part;
  });
  return acc;
}

}  // namespace

int kernel_growth_order(const DriftKernel& kernel) {
  if (const auto* s = std::get_if<Separable>(&kernel.variant())) return s->power - 1;
  return 1;
}

void PenaltyConfig::validate(const DriftKernel& kernel) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("penalty.lambda must be finite and >= 0");
  const int q0 = kernel_growth_order(kernel);
  if (!(p > q0 + 1))
    throw ConfigError("penalty.p = " + std::to_string(p) + " must exceed q0 + 1 = " + std::to_string(q0 + 1) +
                      " for kernel " + kernel.name());
}

Eigen::MatrixXd draw_latents(std::uint64_t seed, const char* tag, std::uint64_t index, Eigen::Index L, int dim) {
  if (L < 1) throw ConfigError("latent sample count must be >= 1");
  Stream rng(seed, tag, {index});
  return rng.normal_matrix(L, dim);
}

Eigen::MatrixXd mc_drift_from_samples(const DriftKernel& kernel, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                      Eigen::Index latent_batch) {
  if (Y.rows() < 1) throw ConfigError("mc_drift: need at least one latent sample");
  if (Y.cols() != kernel.fast_dim() || X.cols() != kernel.dim())
    throw ConfigError("mc_drift: sample or state width does not match the kernel");
  Eigen::MatrixXd out = kernel_sum(kernel, X, Y, latent_batch) / static_cast<double>(Y.rows());
  if (!out.allFinite()) report_non_finite(kernel, X, Y);
  return out;
}

ad::Var mc_drift(const DriftKernel& kernel, const Eigen::MatrixXd& X, const ad::Var& Y, Eigen::Index latent_batch) {
  Eigen::MatrixXd value = mc_drift_from_samples(kernel, X, Y.value(), latent_batch);
  const double inv_l = 1.0 / static_cast<double>(Y.rows());
  return Y.tape().record(std::move(value), {Y},
                         [kernel, X, Y, inv_l](ad::Tape& t, const ad::Matrix& g, const ad::Matrix&) {
                           const Eigen::MatrixXd& Yv = Y.value();
                           const Eigen::MatrixXd G = g * inv_l;
                           Eigen::MatrixXd dY = Eigen::MatrixXd::Zero(Yv.rows(), Yv.cols());
                           const Eigen::Index nb = blocks(Yv.rows(), kLatentBlock);
                           parallel_for(static_cast<std::size_t>(nb), [&](std::size_t b) {
                             const Eigen::Index begin = static_cast<Eigen::Index>(b) * kLatentBlock;
                             const Eigen::Index count = std::min(kLatentBlock, Yv.rows() - begin);
                             Eigen::MatrixXd part = Eigen::MatrixXd::Zero(count, Yv.cols());
                             kernel.accumulate_vjp(X, Yv.middleRows(begin, count), G, part);
                             dY.middleRows(begin, count) = part;
                           });
                           t.accumulate(Y, dY);
                         });
}

Eigen::MatrixXd mc_drift(const DriftKernel& kernel, const ad::CouplingFlowSpec& flow, const Eigen::VectorXd& params,
                         const Eigen::MatrixXd& X, Eigen::Index L, std::uint64_t seed, Eigen::Index latent_batch) {
  const Eigen::MatrixXd Z = draw_latents(seed, "mc_latent", 0, L, flow.dim);
  const Eigen::MatrixXd Y = ad::flow_forward(flow, params, Z).first;
  if (Y.cols() != kernel.fast_dim() || X.cols() != kernel.dim())
    throw ConfigError("mc_drift: flow or state width does not match the kernel");
  return mc_drift_from_samples(kernel, X, Y, latent_batch);
}

EulerLikelihood::EulerLikelihood(const Trajectory& traj, const Eigen::MatrixXd& sigma) {
  traj.validate();
  const int d = static_cast<int>(traj.dim());
  check_diffusion(sigma, d);
  const Eigen::Index M0 = traj.transitions();
  left_ = traj.states.topRows(M0);
  increments_ = traj.states.bottomRows(M0) - traj.states.topRows(M0);
  delta_ = M0 > 0 ? traj.spacing() : 1.0;
  const Eigen::MatrixXd A = sigma * sigma.transpose();
  a_llt_.compute(A);
  if (a_llt_.info() != Eigen::Success) throw ConfigError("diffusion matrix sigma sigma^T is singular");
  a_inv_ = a_llt_.solve(Eigen::MatrixXd::Identity(d, d));
  const double logdet_a = 2.0 * a_llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  constant_ = -0.5 * d * std::log(2.0 * std::numbers::pi * delta_) - 0.5 * logdet_a;
}

Eigen::MatrixXd EulerLikelihood::left_states(const std::vector<Eigen::Index>& idx) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), left_.cols());
  for (std::size_t j = 0; j < idx.size(); ++j) out.row(static_cast<Eigen::Index>(j)) = left_.row(idx[j]);
  return out;
}

std::vector<Eigen::Index> EulerLikelihood::all_transitions() const {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(transitions()));
  for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = static_cast<Eigen::Index>(j);
  return idx;
}

double EulerLikelihood::value(const Eigen::MatrixXd& drift) const { return value(drift, all_transitions(), 1.0); }

double EulerLikelihood::value(const Eigen::MatrixXd& drift, const std::vector<Eigen::Index>& idx, double scale) const {
  if (drift.rows() != static_cast<Eigen::Index>(idx.size()) || drift.cols() != dim())
    throw ConfigError("em_log_likelihood: drift must have one row per transition and d columns");
  double total = 0.0;
  Eigen::VectorXd r(dim());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    r = increments_.row(idx[j]).transpose() - delta_ * drift.row(static_cast<Eigen::Index>(j)).transpose();
    const double quad = a_llt_.matrixL().solve(r).squaredNorm();
    total += constant_ - quad / (2.0 * delta_);
  }
  return scale * total;
}

Eigen::MatrixXd EulerLikelihood::gradient(const Eigen::MatrixXd& drift, const std::vector<Eigen::Index>& idx,
                                          double scale) const {
  Eigen::MatrixXd R(drift.rows(), drift.cols());
  for (std::size_t j = 0; j < idx.size(); ++j)
    R.row(static_cast<Eigen::Index>(j)) = increments_.row(idx[j]) - delta_ * drift.row(static_cast<Eigen::Index>(j));
  // d/d beta_m of -(r^T A^{-1} r) / (2 Delta) with r = dx - beta Delta is A^{-1} r.
  return scale * (R * a_inv_);
}

ad::Var EulerLikelihood::value(const ad::Var& drift, const std::vector<Eigen::Index>& idx, double scale) const {
  ad::Matrix v(1, 1);
  v(0, 0) = value(drift.value(), idx, scale);
  return drift.tape().record(std::move(v), {drift}, [this, drift, idx, scale](ad::Tape& t, const ad::Matrix& g,
                                                                               const ad::Matrix&) {
    t.accumulate(drift, g(0, 0) * gradient(drift.value(), idx, scale));
  });
}

double em_log_likelihood(const Eigen::MatrixXd& drift_at_obs, const Trajectory& traj, const Eigen::MatrixXd& sigma) {
  return EulerLikelihood(traj, sigma).value(drift_at_obs);
}

ad::Var moment_penalty(const ad::Var& Y, double p) {
  if (!(p > 1.0)) throw ConfigError("moment_penalty: p must exceed 1");
  if (p == 2.0) return ad::mean(ad::row_sums(ad::square(Y)));
  return ad::mean(ad::pow(ad::row_sums(ad::square(Y)), 0.5 * p));
}

double moment_penalty(const ad::CouplingFlowSpec& flow, const Eigen::VectorXd& params, double p, Eigen::Index L,
                      std::uint64_t seed) {
  const Eigen::MatrixXd Z = draw_latents(seed, "mc_latent", 0, L, flow.dim);
  ad::Tape tape(false);
  return moment_penalty(tape.constant(ad::flow_forward(flow, params, Z).first), p).scalar();
}

LossTerms penalized_loss(const DriftKernel& kernel, const ad::CouplingFlowSpec& flow, const ad::Var& params,
                         const EulerLikelihood& lik, const PenaltyConfig& penalty, const Eigen::MatrixXd& Z,
                         const std::vector<Eigen::Index>& idx, double scale) {
  ad::Tape& tape = params.tape();
  const ad::Var Y = ad::flow_forward(flow, params, tape.constant(Z)).y;
  LossTerms out;
  out.loglik = lik.value(mc_drift(kernel, lik.left_states(idx), Y), idx, scale);
  out.penalty = moment_penalty(Y, penalty.p);
  out.loss = penalty.lambda == 0.0 ? ad::scale(out.loglik, -1.0)
                                   : ad::scale(out.loglik, -1.0) + penalty.lambda * out.penalty;
  return out;
}

double penalized_loss(const DriftKernel& kernel, const ad::CouplingFlowSpec& flow, const Eigen::VectorXd& params,
                      const Trajectory& traj, const Eigen::MatrixXd& sigma, const PenaltyConfig& penalty,
                      Eigen::Index L, std::uint64_t seed) {
  const EulerLikelihood lik(traj, sigma);
  const Eigen::MatrixXd Z = draw_latents(seed, "mc_latent", 0, L, flow.dim);
  ad::Tape tape(false);
  return penalized_loss(kernel, flow, tape.constant(params), lik, penalty, Z, lik.all_transitions(), 1.0)
      .loss.scalar();
}

}  // namespace avgflow
