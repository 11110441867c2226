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

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "avgflow/drift/expression.hpp"
#include "avgflow/sim/solvent.hpp"

namespace avgflow {

/// Tagged particle pulled by every solvent particle through the Gaussian pair
/// potential V(r) = -zeta exp(-r^2/2):
///   b(x, y) = -zeta sum_i (x - y_i) exp(-|x - y_i|^2 / 2).
struct SolventForce {
  SolventParams params;
};

/// b(x, y) = (x - x^3) / (1 + x^2 + y1^2 + sin(1 + y2^2) + log(1 + y3^2) + y4^4), x scalar, y in R^4.
struct DoubleWell {};

/// b_j(x, y) = b0_j(x) * y_j^power with power 1 (linear) or 2 (quadratic); d_fast = d.
struct Separable {
  std::vector<Expression> b0;
  int power = 1;
};

/// One expression per slow component over x0..x{d-1}, y0..y{d_fast-1}.
struct CustomKernel {
  std::vector<Expression> components;
  int fast_dim = 1;
};

/// The known slow/fast interaction kernel b(x, y).
///
/// Besides pointwise evaluation, kernels expose the two batched reductions
/// used by the Monte Carlo drift: a sum over latent samples for every slow
/// state, and its vector-Jacobian product with respect to the samples. Both
/// accumulate over latent rows in index order, so splitting the latent rows
/// into chunks never changes the floating-point result.
class DriftKernel {
 public:
  using Variant = std::variant<SolventForce, DoubleWell, Separable, CustomKernel>;

  explicit DriftKernel(Variant v);

  static DriftKernel solvent(const SolventParams& p) { return DriftKernel(SolventForce{p}); }
  static DriftKernel double_well() { return DriftKernel(DoubleWell{}); }
  static DriftKernel separable(std::vector<Expression> b0, int power) {
    return DriftKernel(Separable{std::move(b0), power});
  }

  int dim() const { return dim_; }
  int fast_dim() const { return fast_dim_; }
  const Variant& variant() const { return v_; }
  std::string name() const;

  Eigen::VectorXd eval(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) const;

  /// acc(m, :) += sum_l b(X(m, :), Y(l, :)).
  void accumulate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, Eigen::MatrixXd& acc) const;

  /// dY(l, :) += sum_m G(m, :) * d b(X(m, :), y) / dy at y = Y(l, :).
  void accumulate_vjp(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& G,
                      Eigen::MatrixXd& dY) const;

 private:
  Variant v_;
  int dim_ = 1;
  int fast_dim_ = 1;
};

}  // namespace avgflow
