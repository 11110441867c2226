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

#include "avgflow/sim/trajectory.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "avgflow/core/csv.hpp"
#include "avgflow/core/errors.hpp"

namespace avgflow {

double Trajectory::spacing() const {
  if (size() < 2) throw ConfigError("trajectory: spacing needs at least two points");
  return (times(size() - 1) - times(0)) / static_cast<double>(size() - 1);
}

void Trajectory::validate() const {
  if (states.rows() != times.size())
    throw ConfigError("trajectory: " + std::to_string(states.rows()) + " states for " + std::to_string(times.size()) +
                      " time stamps");
  if (!times.allFinite() || !states.allFinite()) throw ConfigError("trajectory: non-finite entry");
  if (size() < 2) return;
  const double h = spacing();
  if (!(h > 0)) throw ConfigError("trajectory: times must be strictly increasing");
  for (Eigen::Index i = 1; i < size(); ++i) {
    const double step = times(i) - times(i - 1);
    if (!(step > 0)) throw ConfigError("trajectory: times not strictly increasing at index " + std::to_string(i));
    const double expected = times(0) + h * static_cast<double>(i);
    if (std::abs(times(i) - expected) > 1e-12 * std::max(1.0, std::abs(expected)))
      throw ConfigError("trajectory: non-uniform spacing at index " + std::to_string(i));
  }
}

Trajectory Trajectory::subsample(Eigen::Index stride) const {
  if (stride < 1) throw ConfigError("trajectory: stride must be >= 1");
  const Eigen::Index n = size() == 0 ? 0 : (size() - 1) / stride + 1;
  Trajectory out;
  out.times.resize(n);
  out.states.resize(n, dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.times(i) = times(i * stride);
    out.states.row(i) = states.row(i * stride);
  }
  return out;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::vector<std::string> header{"t"};
  for (Eigen::Index j = 0; j < traj.dim(); ++j) header.push_back("x_" + std::to_string(j));
  Eigen::MatrixXd rows(traj.size(), traj.dim() + 1);
  rows.col(0) = traj.times;
  rows.rightCols(traj.dim()) = traj.states;
  csv::write(path, header, rows);
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  auto table = csv::read(path);
  if (table.header.empty() || table.header[0] != "t") throw ConfigError(path.string() + ": expected header starting with 't'");
  Trajectory traj;
  traj.times = table.rows.col(0);
  traj.states = table.rows.rightCols(table.rows.cols() - 1);
  traj.validate();
  return traj;
}

}  // namespace avgflow
