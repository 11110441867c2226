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

#include <filesystem>

#include <Eigen/Dense>

namespace avgflow {

/// Uniformly sampled path: times(i) and the state row states.row(i).
struct Trajectory {
  Eigen::VectorXd times;
  Eigen::MatrixXd states;

  Eigen::Index size() const { return times.size(); }
  Eigen::Index dim() const { return states.cols(); }
  /// Number of transitions, size() - 1.
  Eigen::Index transitions() const { return times.size() > 0 ? times.size() - 1 : 0; }
  double spacing() const;
  double horizon() const { return size() > 0 ? times(size() - 1) - times(0) : 0.0; }

  /// Throws ConfigError unless times are strictly increasing with constant
  /// spacing (1e-12 relative) and every state is finite.
  void validate() const;

  /// Every stride-th point, starting with the first.
  Trajectory subsample(Eigen::Index stride) const;
};

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace avgflow
