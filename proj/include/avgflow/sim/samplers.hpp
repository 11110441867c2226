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

#include <Eigen/Dense>

#include "avgflow/sim/models.hpp"
#include "avgflow/sim/solvent.hpp"

namespace avgflow {

/// Exact i.i.d. draws from the Gibbs law exp(-gamma U_N), one sample per row,
/// particle-major columns (particle i occupies columns [i d, (i+1) d)).
Eigen::MatrixXd sample_gibbs_solvent(const SolventParams& params, Eigen::Index count, std::uint64_t seed);

/// Analytic covariance of one sample row.
Eigen::MatrixXd gibbs_covariance(const SolventParams& params);

/// Independent von Mises coordinates (Best-Fisher rejection), values in [-pi, pi).
Eigen::MatrixXd sample_von_mises_fast(const Eigen::Vector4d& concentration, const Eigen::Vector4d& location,
                                      Eigen::Index count, std::uint64_t seed);

/// Wraps an angle to [-pi, pi).
double wrap_angle(double theta);

/// Exact draws from the invariant law of the fast dynamics: the Gibbs measure,
/// the von Mises product, or N(0, alpha^2 / (2 rate)) per OU coordinate.
Eigen::MatrixXd sample_invariant(const FastDynamics& fast, Eigen::Index count, std::uint64_t seed);

}  // namespace avgflow
