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

#include <functional>

#include <Eigen/Dense>

#include "avgflow/ad/tape.hpp"

namespace avgflow::ad {

/// Scalar objective built from tape primitives over a flat parameter column.
using Objective = std::function<Var(Tape&, const Var& params)>;

struct ValueAndGradient {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// Exact reverse-mode gradient of the objective at params.
ValueAndGradient loss_and_gradient(const Objective& objective, const Eigen::VectorXd& params);

/// Value only, on a non-recording tape (bitwise equal to loss_and_gradient's value).
double evaluate(const Objective& objective, const Eigen::VectorXd& params);

}  // namespace avgflow::ad
