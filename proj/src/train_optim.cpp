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

#include "avgflow/train/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace avgflow {

void OptimizerConfig::validate(Eigen::Index M0) const {
  if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be > 0");
  if (!(clip > 0)) throw ConfigError("train.clip must be > 0");
  if (iterations < 0) throw ConfigError("train.iterations must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("train: Adam decay rates must lie in [0, 1)");
  if (!(eps > 0)) throw ConfigError("train.eps must be > 0");
  if (batch < 1 || batch > M0)
    throw ConfigError("train.batch B = " + std::to_string(batch) + " must satisfy 0 < B <= M0 = " + std::to_string(M0));
}

Adam::Adam(Eigen::Index n, const OptimizerConfig& cfg)
    : cfg_(cfg), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& g) {
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * g;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  params.array() -= cfg_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
}

double clip_global_norm(Eigen::VectorXd& g, double max_norm) {
  const double norm = g.norm();
  if (norm > max_norm) g *= max_norm / norm;
  return norm;
}

std::vector<Eigen::Index> sample_minibatch(Eigen::Index M0, Eigen::Index B, Stream& rng) {
  if (B < 1 || B > M0) throw ConfigError("minibatch size must lie in [1, M0]");
  std::vector<Eigen::Index> all(static_cast<std::size_t>(M0));
  for (Eigen::Index i = 0; i < M0; ++i) all[static_cast<std::size_t>(i)] = i;
  if (B == M0) return all;
  // partial Fisher-Yates with explicit uniform draws (portable across standard libraries)
  for (Eigen::Index i = 0; i < B; ++i) {
    const auto span = static_cast<std::uint64_t>(M0 - i);
    const auto j = i + static_cast<Eigen::Index>(rng() % span);
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
  }
  all.resize(static_cast<std::size_t>(B));
  std::sort(all.begin(), all.end());
  return all;
}

TrainResult minimise(const Eigen::VectorXd& init, const OptimizerConfig& opt,
                     const std::function<StepResult(int, const Eigen::VectorXd&)>& step) {
  TrainResult out;
  out.params = init;
  out.history.resize(opt.iterations, 4);
  Adam adam(init.size(), opt);
  for (int it = 0; it < opt.iterations; ++it) {
    StepResult r = step(it, out.params);
    if (!std::isfinite(r.minibatch_loss) || !std::isfinite(r.full_loss) || !r.grad.allFinite())
      throw TrainingDivergence(it, out.params);
    const double norm = clip_global_norm(r.grad, opt.clip);
    out.history.row(it) << it, r.full_loss, r.minibatch_loss, norm;
    adam.step(out.params, r.grad);
  }
  return out;
}

}  // namespace avgflow
