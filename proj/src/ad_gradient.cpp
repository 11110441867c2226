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

#include "avgflow/ad/gradient.hpp"

#include "avgflow/core/errors.hpp"

namespace avgflow::ad {

ValueAndGradient loss_and_gradient(const Objective& objective, const Eigen::VectorXd& params) {
  Tape tape;
  Var p = tape.variable(params);
  Var out = objective(tape, p);
  if (out.rows() != 1 || out.cols() != 1) throw ConfigError("loss_and_gradient: objective must be scalar");
  tape.backward(out);
  return {out.scalar(), tape.grad(p).col(0)};
}

double evaluate(const Objective& objective, const Eigen::VectorXd& params) {
  Tape tape(false);
  Var p = tape.variable(params);
  return objective(tape, p).scalar();
}

}  // namespace avgflow::ad
