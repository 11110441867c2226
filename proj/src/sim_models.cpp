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

#include "avgflow/sim/models.hpp"

#include <string>

#include "avgflow/core/errors.hpp"

namespace avgflow {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace

int fast_dim(const FastDynamics& f) {
  return std::visit(overloaded{
                        [](const OrnsteinUhlenbeckFast& o) { return o.dim; },
                        [](const SolventLangevinFast& s) { return s.params.fast_dim(); },
                        [](const VonMisesLangevinFast&) { return 4; },
                    },
                    f);
}

Eigen::MatrixXd diffusion_matrix(double sigma, int d) { return sigma * Eigen::MatrixXd::Identity(d, d); }

void check_diffusion(const Eigen::MatrixXd& sigma, int d, bool allow_zero) {
  if (sigma.rows() != d || sigma.cols() != d)
    throw ConfigError("sigma must be " + std::to_string(d) + "x" + std::to_string(d));
  if (allow_zero && sigma.isZero(0.0)) return;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma * sigma.transpose());
  if (llt.info() != Eigen::Success) throw ConfigError("sigma sigma^T is not positive definite");
}

void MultiscaleModel::validate() const {
  if (!(n_scale >= 1.0)) throw ConfigError("n_scale must be >= 1");
  check_diffusion(sigma, dim(), true);
  if (fast_dim() != kernel.fast_dim())
    throw ConfigError("fast dynamics dimension " + std::to_string(fast_dim()) + " does not match kernel fast dimension " +
                      std::to_string(kernel.fast_dim()));
  std::visit(overloaded{
                 [](const OrnsteinUhlenbeckFast& o) {
                   if (o.dim < 1 || !(o.rate > 0) || !(o.alpha > 0)) throw ConfigError("OU fast dynamics: invalid parameters");
                 },
                 [](const SolventLangevinFast& s) { s.params.validate(); },
                 [](const VonMisesLangevinFast& v) {
                   if ((v.concentration.array() < 0).any()) throw ConfigError("von Mises: negative concentration");
                 },
             },
             fast);
}

}  // namespace avgflow
