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

#include "avgflow/train/mle.hpp"

#include "avgflow/ad/gradient.hpp"

namespace avgflow {

TrainResult fit_penalized_mle(const DriftKernel& kernel, const ad::CouplingFlowSpec& flow, const Trajectory& traj,
                              const Eigen::MatrixXd& sigma, const PenaltyConfig& penalty, Eigen::Index L,
                              const OptimizerConfig& opt, const Eigen::VectorXd* init) {
  flow.validate();
  penalty.validate(kernel);
  if (flow.dim != kernel.fast_dim()) throw ConfigError("flow dimension must equal the kernel's fast dimension");
  if (L < 1) throw ConfigError("latent sample count L must be >= 1");
  const EulerLikelihood lik(traj, sigma);
  const Eigen::Index M0 = lik.transitions();
  opt.validate(M0);
  Eigen::VectorXd start;
  if (init) {
    if (init->size() != flow.param_count()) throw ConfigError("initial flow parameters have the wrong length");
    start = *init;
  } else {
    Stream rng(opt.seed, "flow_init");
    start = ad::init_flow_params(flow, rng);
  }
  const auto all = lik.all_transitions();
  const double scale = static_cast<double>(M0) / static_cast<double>(opt.batch);
  auto step = [&](int it, const Eigen::VectorXd& params) {
    Stream batch_rng(opt.seed, "mle_batch", {static_cast<std::uint64_t>(it)});
    const auto idx = sample_minibatch(M0, opt.batch, batch_rng);
    const Eigen::MatrixXd Z = draw_latents(opt.seed, "mle_latent", static_cast<std::uint64_t>(it), L, flow.dim);
    const ad::Objective obj = [&](ad::Tape&, const ad::Var& p) {
      return penalized_loss(kernel, flow, p, lik, penalty, Z, idx, scale).loss;
    };
    auto vg = ad::loss_and_gradient(obj, params);
    StepResult r;
    r.minibatch_loss = vg.value;
    r.grad = std::move(vg.grad);
    if (opt.batch == M0) {
      r.full_loss = vg.value;
    } else {
      ad::Tape tape(false);
      r.full_loss = penalized_loss(kernel, flow, tape.constant(params), lik, penalty, Z, all, 1.0).loss.scalar();
    }
    return r;
  };
  return minimise(start, opt, step);
}

Eigen::VectorXd init_baseline_params(const ad::MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Eigen::VectorXd p(spec.param_count());
  Stream rng(seed, "baseline_init");
  ad::init_mlp_params(spec, p, rng, false);
  return p;
}

TrainResult fit_unstructured_baseline(const ad::MlpSpec& spec, const Trajectory& traj, const Eigen::MatrixXd& sigma,
                                      const OptimizerConfig& opt, const Eigen::VectorXd* init) {
  spec.validate();
  const EulerLikelihood lik(traj, sigma);
  if (spec.input_dim() != lik.dim() || spec.output_dim() != lik.dim())
    throw ConfigError("baseline network must map R^d to R^d");
  const Eigen::Index M0 = lik.transitions();
  opt.validate(M0);
  Eigen::VectorXd start = init ? *init : init_baseline_params(spec, opt.seed);
  if (start.size() != spec.param_count()) throw ConfigError("initial baseline parameters have the wrong length");
  const auto all = lik.all_transitions();
  const double scale = static_cast<double>(M0) / static_cast<double>(opt.batch);
  auto loss = [&](const std::vector<Eigen::Index>& idx, double s) {
    const Eigen::MatrixXd X = lik.left_states(idx);
    return ad::Objective([&, X, s](ad::Tape& t, const ad::Var& p) {
      return ad::scale(lik.value(ad::mlp_apply(spec, p, 0, t.constant(X)), idx, s), -1.0);
    });
  };
  auto step = [&](int it, const Eigen::VectorXd& params) {
    Stream batch_rng(opt.seed, "baseline_batch", {static_cast<std::uint64_t>(it)});
    const auto idx = sample_minibatch(M0, opt.batch, batch_rng);
    auto vg = ad::loss_and_gradient(loss(idx, scale), params);
    StepResult r;
    r.minibatch_loss = vg.value;
    r.grad = std::move(vg.grad);
    r.full_loss = opt.batch == M0 ? vg.value : ad::evaluate(loss(all, 1.0), params);
    return r;
  };
  return minimise(start, opt, step);
}

}  // namespace avgflow
