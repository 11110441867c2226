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
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "avgflow/ad/coupling_flow.hpp"
#include "avgflow/ad/mlp.hpp"
#include "avgflow/drift/model.hpp"
#include "avgflow/eval/metrics.hpp"
#include "avgflow/sim/models.hpp"
#include "avgflow/train/optim.hpp"
#include "avgflow/vi/variational.hpp"

namespace avgflow::exp {

struct ModelSection {
  std::string kernel = "solvent";  // solvent | double_well | separable | custom
  int d = 1;
  int N = 10;
  double sigma = 0.1;
  double n_scale = 1000.0;
  double a = 0.5, kappa = 1.0, gamma = 1.0, zeta = 1.0;  // solvent
  std::vector<std::string> b0{"(neg x0)"};               // separable
  int power = 1;
  std::vector<std::string> components{"(neg (mul x0 y0))"};  // custom
  int custom_fast_dim = 1;
  std::string fast = "auto";  // auto | solvent_langevin | ou | von_mises
  double ou_rate = 1.0;
  double ou_alpha = 1.4142135623730951;
  std::vector<double> vm_concentration{1, 1, 1, 1};
  std::vector<double> vm_location{0, 0, 0, 0};
};

struct DataSection {
  std::vector<double> x0{2.0};
  std::vector<double> y0;  // empty: one draw from the invariant law
  double horizon = 5.0;
  double dt = 1e-5;
  double delta = 0.01;
};

struct FlowSection {
  int layers = 2;
  std::vector<int> hidden{5};
  std::string activation = "tanh";
};

struct TrainSection {
  std::string mode = "vi";  // mle | vi | baseline
  FlowSection latent_flow;
  FlowSection posterior_flow{6, {256}, "tanh"};
  std::vector<int> baseline_hidden{64, 64};
  std::string baseline_activation = "tanh";
  OptimizerConfig optimizer;
  PenaltyConfig penalty{1e-3, 4.0};
  Eigen::Index K = 100, L = 100, param_batch = 20, latent_batch = 25;
  double prior_scale = 1.0;
  double init_scale = 0.1;
};

struct EvalSection {
  std::vector<double> grid_min{-2.0}, grid_max{2.0};
  std::vector<Eigen::Index> grid_points{200};
  Eigen::Index oracle_samples = 1000000;
  Eigen::Index band_samples = 500, band_latents = 1000, band_param_batch = 20, band_latent_batch = 100;
  double q_lo = 0.05, q_hi = 0.95;
  Eigen::Index drift_latents = 1000;  // plain-MLE drift evaluation
  double split_time = 5.0;
  double path_horizon = 10.0;
  std::vector<double> law_times{1.0, 1.5};
  Eigen::Index law_paths = 1000;
  double law_dt = 0.01;
  Eigen::Index kde_points = 512;
  int law_component = 0;
  Eigen::Index table_points = 801;  // per axis, for the tabulated drifts used in path ensembles
  double table_margin = 2.0;        // table covers the grid widened by this much
};

struct Table1Cell {
  int d = 1, N = 10;
  double n = 1000.0;
};

struct ExperimentConfig {
  ModelSection model;
  DataSection data;
  TrainSection train;
  EvalSection eval;
  std::vector<Table1Cell> table1{{1, 10, 1000.0}};
  std::uint64_t seed = 2024;

  /// Every cross-field check that can fail before any compute.
  void validate() const;
  Eigen::Index observation_count() const;  // M0
  Eigen::Index observation_stride() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

MultiscaleModel build_model(const ModelSection& m);
ad::CouplingFlowSpec latent_flow_spec(const ExperimentConfig& cfg);
PosteriorConfig posterior_config(const ExperimentConfig& cfg);
ad::MlpSpec baseline_spec(const ExperimentConfig& cfg);
EvalGrid eval_grid(const ExperimentConfig& cfg);

/// cfg with model.d, model.N and model.n_scale replaced, the grid, x0 and
/// y0 re-dimensioned for the new d and N, and dt reduced (keeping delta a
/// multiple of it) when the fast scale would otherwise be unstable.
ExperimentConfig with_cell(const ExperimentConfig& cfg, const Table1Cell& cell);

}  // namespace avgflow::exp
