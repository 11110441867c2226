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
#include <variant>

#include <Eigen/Dense>

#include "avgflow/ad/coupling_flow.hpp"
#include "avgflow/ad/mlp.hpp"

namespace avgflow::ad {

/// Binary checkpoint, all integers and floats little-endian:
///
///   "AVGFLOW\0"           8-byte magic
///   u32 version           currently 1
///   u32 kind              0 = coupling flow, 1 = MLP
///   descriptor            flow: i32 dim, i32 layers, i32 n_hidden, i32 hidden[n_hidden],
///                               i32 activation, f64 scale_clamp,
///                               per layer: i32 n_cond, i32 cond[], i32 n_trans, i32 trans[]
///                         MLP:  i32 n_widths, i32 widths[], i32 activation
///   u64 count, f64 params[count]
struct Checkpoint {
  std::variant<CouplingFlowSpec, MlpSpec> spec;
  Eigen::VectorXd params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// One parameter per line at 17 significant digits.
void export_params_text(const std::filesystem::path& path, const Eigen::VectorXd& params);
Eigen::VectorXd import_params_text(const std::filesystem::path& path);

}  // namespace avgflow::ad
