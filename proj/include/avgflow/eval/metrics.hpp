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
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "avgflow/sim/simulate.hpp"
#include "avgflow/sim/trajectory.hpp"

namespace avgflow {

/// Regular tensor grid; flattened with the last axis varying fastest.
struct EvalGrid {
  Eigen::VectorXd lo, hi;
  std::vector<Eigen::Index> points;

  /// 200 points on [-2, 2] for d = 1, 50 x 50 on [-2, 2]^2 for d = 2, 20^d otherwise.
  static EvalGrid default_for(int d);
  int dim() const { return static_cast<int>(points.size()); }
  Eigen::Index size() const;
  void validate() const;
  /// size() x dim() matrix of grid points.
  Eigen::MatrixXd flatten() const;
};

/// Mean over grid points of |estimated(x) - oracle(x)|^2. The per-point errors
/// are summed in sorted order, so the result does not depend on point order.
double drift_mse_on_grid(const BatchDrift& estimated, const BatchDrift& oracle, const EvalGrid& grid);
double mse_of_values(const Eigen::MatrixXd& estimated, const Eigen::MatrixXd& oracle);

/// Root-mean-square state gap over points with t <= split_time and t > split_time.
std::pair<double, double> path_discrepancy(const Trajectory& a, const Trajectory& b, double split_time);

/// sup |F_a - F_b| by a merge scan over the sorted samples.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// W1 between empirical laws: sorted pairing for equal sizes, otherwise exact
/// integration of |F_a^{-1} - F_b^{-1}| over the merged quantile breakpoints.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

/// Silverman's rule 0.9 min(sd, IQR / 1.34) n^(-1/5); falls back to a tiny
/// positive width for constant samples.
double silverman_bandwidth(const std::vector<double>& s);

/// Gaussian kernel density of s on the given points.
Eigen::VectorXd kde(const std::vector<double>& s, double bandwidth, const Eigen::VectorXd& at);

/// Trapezoid rule.
double trapezoid(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Piecewise multilinear interpolant of a drift tabulated on an EvalGrid;
/// queries outside the grid are clamped to its boundary.
class TabulatedDrift {
 public:
  TabulatedDrift(EvalGrid grid, Eigen::MatrixXd values);
  static TabulatedDrift tabulate(const BatchDrift& drift, const EvalGrid& grid, int out_dim);
  Eigen::MatrixXd operator()(const Eigen::MatrixXd& X) const;
  const EvalGrid& grid() const { return grid_; }
  const Eigen::MatrixXd& values() const { return values_; }

 private:
  EvalGrid grid_;
  Eigen::MatrixXd values_;
};

/// Euler-Maruyama for many paths at once; path j draws its Brownian increments
/// from Stream(seeds[j], "slow_noise"), exactly as simulate_reduced does.
/// Returns, per requested time index, the paths x state matrix.
std::vector<Eigen::MatrixXd> simulate_ensemble(const BatchDrift& drift, const Eigen::MatrixXd& sigma,
                                               const Eigen::VectorXd& x0, const std::vector<Eigen::Index>& at_steps,
                                               double dt, const std::vector<std::uint64_t>& seeds);

struct LawComparison {
  std::vector<double> times;
  std::vector<double> ks, w1;
  Eigen::VectorXd kde_grid;  // shared by every time point
  std::vector<Eigen::VectorXd> kde_true, kde_est;
};

/// L coupled path pairs (path j of both systems uses seed derive_key(seed, "law_path", {j})),
/// compared through the marginal of coordinate `component` at each time.
LawComparison law_comparison_report(const BatchDrift& drift_true, const BatchDrift& drift_est,
                                    const Eigen::MatrixXd& sigma, const Eigen::VectorXd& x0,
                                    const std::vector<double>& times, Eigen::Index L_paths, double dt,
                                    std::uint64_t seed, int component = 0, Eigen::Index kde_points = 512);

}  // namespace avgflow
