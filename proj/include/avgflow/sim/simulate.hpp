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
#include <utility>

#include <Eigen/Dense>

#include "avgflow/drift/kernel.hpp"
#include "avgflow/sim/models.hpp"
#include "avgflow/sim/trajectory.hpp"

namespace avgflow {

/// Drift evaluated on a batch of states, one state per row.
using BatchDrift = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

/// Largest dt * n_scale accepted by simulate_multiscale.
inline constexpr double kFastStabilityLimit = 0.1;

/// Number of Euler steps covering horizon with step dt; throws if horizon/dt
/// is not an integer to within rounding.
Eigen::Index step_count(double horizon, double dt);

/// Euler-Maruyama on both scales with a shared step. Slow noise comes from
/// Stream(seed, "slow_noise") and fast noise from Stream(seed, "fast_noise").
/// Only every `stride`-th point is stored.
std::pair<Trajectory, Trajectory> simulate_multiscale(const MultiscaleModel& model, const Eigen::VectorXd& x0,
                                                      const Eigen::VectorXd& y0, double horizon, double dt,
                                                      std::uint64_t seed, Eigen::Index stride = 1);

/// Euler-Maruyama for dX = drift(X) dt + sigma dW using the same slow-noise
/// stream as simulate_multiscale for equal seeds.
Trajectory simulate_reduced(const BatchDrift& drift, const Eigen::MatrixXd& sigma, const Eigen::VectorXd& x0,
                            double horizon, double dt, std::uint64_t seed, Eigen::Index stride = 1);

/// The Brownian increments (already scaled by sqrt(dt)) consumed by the slow equation.
Eigen::MatrixXd slow_noise_increments(std::uint64_t seed, Eigen::Index steps, int d, double dt);

/// Sample mean of b(x, y_l) over the rows of invariant_samples.
Eigen::VectorXd averaged_drift_oracle(const DriftKernel& kernel, const Eigen::VectorXd& x,
                                      const Eigen::MatrixXd& invariant_samples);

/// averaged_drift_oracle for every row of X.
Eigen::MatrixXd averaged_drift_oracle_batch(const DriftKernel& kernel, const Eigen::MatrixXd& X,
                                            const Eigen::MatrixXd& invariant_samples);

/// (1/T) * left Riemann sum of f along the path.
double empirical_time_average(const Trajectory& fast, const std::function<double(const Eigen::VectorXd&)>& f);

}  // namespace avgflow
