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

#include <cmath>
#include <string>

#include "avgflow/core/errors.hpp"

namespace avgflow {

/// Solvent bath of N particles in R^d under the quadratic potential
///   U_N(y) = (a/2) sum_{i<j} |y_i - y_j|^2 + (kappa/2) sum_i |y_i|^2,
/// relaxing with drift -gamma grad U_N and unit-temperature noise. zeta scales
/// the tagged-particle interaction force.
struct SolventParams {
  int N = 10;
  int d = 1;
  double a = 0.5;
  double kappa = 1.0;
  double gamma = 1.0;
  double zeta = 1.0;

  void validate() const {
    if (N < 1) throw ConfigError("solvent: N must be >= 1, got " + std::to_string(N));
    if (d < 1) throw ConfigError("solvent: d must be >= 1, got " + std::to_string(d));
    // a = 0 (independent particles) is accepted as the degenerate limit.
    if (!(a >= 0) || !(kappa > 0) || !(gamma > 0) || !(zeta > 0))
      throw ConfigError("solvent: kappa, gamma, zeta must be > 0 and a >= 0");
    if (!(precision_mean() > 0) || !(precision_orthogonal() > 0))
      throw ConfigError("solvent: Gibbs precision is not positive definite");
  }

  int fast_dim() const { return N * d; }

  /// Gibbs precision along the centre-of-mass direction.
  double precision_mean() const { return gamma * kappa; }
  /// Gibbs precision on the complement of the centre-of-mass direction.
  double precision_orthogonal() const { return gamma * (kappa + a * N); }

  /// Variance of a single coordinate of a single particle under the Gibbs law.
  double marginal_variance() const {
    return 1.0 / (N * precision_mean()) + (1.0 - 1.0 / N) / precision_orthogonal();
  }
};

}  // namespace avgflow
