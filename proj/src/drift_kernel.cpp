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

#include "avgflow/drift/kernel.hpp"

#include <cmath>
#include <span>

#include "avgflow/core/errors.hpp"

namespace avgflow {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::span<const double> span_of(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Slow states are stored one per row; expressions want contiguous coordinates.
Eigen::VectorXd row(const Eigen::MatrixXd& M, Eigen::Index i) { return M.row(i).transpose(); }

void solvent_accumulate(const SolventForce& k, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                        Eigen::MatrixXd& acc) {
  const int d = k.params.d;
  const int N = k.params.N;
  const double zeta = k.params.zeta;
  const Eigen::Index B = X.rows();
  Eigen::ArrayXd r2(B), e(B);
  Eigen::ArrayXXd U(B, d);
  for (Eigen::Index l = 0; l < Y.rows(); ++l) {
    for (int i = 0; i < N; ++i) {
      r2.setZero();
      for (int c = 0; c < d; ++c) {
        U.col(c) = X.col(c).array() - Y(l, i * d + c);
        r2 += U.col(c).square();
      }
      e = (-0.5 * r2).exp();
      for (int c = 0; c < d; ++c) acc.col(c).array() -= zeta * (U.col(c) * e);
    }
  }
}

void solvent_vjp(const SolventForce& k, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& G,
                 Eigen::MatrixXd& dY) {
  const int d = k.params.d;
  const int N = k.params.N;
  const double zeta = k.params.zeta;
  const Eigen::Index B = X.rows();
  Eigen::ArrayXd r2(B), e(B), dot(B);
  Eigen::ArrayXXd U(B, d);
  for (Eigen::Index l = 0; l < Y.rows(); ++l) {
    for (int i = 0; i < N; ++i) {
      r2.setZero();
      dot.setZero();
      for (int c = 0; c < d; ++c) {
        U.col(c) = X.col(c).array() - Y(l, i * d + c);
        r2 += U.col(c).square();
        dot += U.col(c) * G.col(c).array();
      }
      e = (-0.5 * r2).exp();
      // d b / d y_i = zeta (I - u u^T) exp(-|u|^2/2)
      for (int c = 0; c < d; ++c)
        dY(l, i * d + c) += zeta * ((G.col(c).array() - U.col(c) * dot) * e).sum();
    }
  }
}

double double_well_denominator_shift(const double* y) {
  return y[0] * y[0] + std::sin(1.0 + y[1] * y[1]) + std::log1p(y[2] * y[2]) + std::pow(y[3], 4);
}

}  // namespace

DriftKernel::DriftKernel(Variant v) : v_(std::move(v)) {
  std::visit(overloaded{
                 [&](const SolventForce& k) {
                   k.params.validate();
                   dim_ = k.params.d;
                   fast_dim_ = k.params.fast_dim();
                 },
                 [&](const DoubleWell&) {
                   dim_ = 1;
                   fast_dim_ = 4;
                 },
                 [&](const Separable& k) {
                   if (k.b0.empty()) throw ConfigError("separable kernel: b0 needs at least one component");
                   if (k.power != 1 && k.power != 2)
                     throw ConfigError("separable kernel: power must be 1 or 2, got " + std::to_string(k.power));
                   dim_ = static_cast<int>(k.b0.size());
                   fast_dim_ = dim_;
                   for (const auto& e : k.b0) {
                     if (e.fast_arity() > 0) throw ConfigError("separable kernel: b0 must not depend on y");
                     if (e.slow_arity() > dim_) throw ConfigError("separable kernel: b0 references x beyond d");
                   }
                 },
                 [&](const CustomKernel& k) {
                   if (k.components.empty()) throw ConfigError("custom kernel: no components");
                   dim_ = static_cast<int>(k.components.size());
                   fast_dim_ = k.fast_dim;
                   for (const auto& e : k.components) {
                     if (e.slow_arity() > dim_ || e.fast_arity() > fast_dim_)
                       throw ConfigError("custom kernel: expression '" + e.source() + "' references out-of-range variable");
                   }
                 },
             },
             v_);
}

std::string DriftKernel::name() const {
  return std::visit(overloaded{
                        [](const SolventForce&) -> std::string { return "solvent"; },
                        [](const DoubleWell&) -> std::string { return "double_well"; },
                        [](const Separable& k) -> std::string {
                          return k.power == 1 ? "separable_linear" : "separable_quadratic";
                        },
                        [](const CustomKernel&) -> std::string { return "custom"; },
                    },
                    v_);
}

Eigen::VectorXd DriftKernel::eval(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const Eigen::Ref<const Eigen::VectorXd>& y) const {
  if (x.size() != dim_ || y.size() != fast_dim_)
    throw ConfigError("kernel " + name() + ": expected x in R^" + std::to_string(dim_) + " and y in R^" +
                      std::to_string(fast_dim_));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
  std::visit(overloaded{
                 [&](const SolventForce& k) {
                   const int d = k.params.d;
                   for (int i = 0; i < k.params.N; ++i) {
                     Eigen::VectorXd u = x - y.segment(i * d, d);
                     out -= k.params.zeta * u * std::exp(-0.5 * u.squaredNorm());
                   }
                 },
                 [&](const DoubleWell&) {
                   out(0) = (x(0) - x(0) * x(0) * x(0)) / (1.0 + x(0) * x(0) + double_well_denominator_shift(y.data()));
                 },
                 [&](const Separable& k) {
                   for (int j = 0; j < dim_; ++j) {
                     const double f = k.power == 1 ? y(j) : y(j) * y(j);
                     out(j) = k.b0[static_cast<std::size_t>(j)].eval(span_of(x), {}) * f;
                   }
                 },
                 [&](const CustomKernel& k) {
                   for (int j = 0; j < dim_; ++j)
                     out(j) = k.components[static_cast<std::size_t>(j)].eval(span_of(x), span_of(y));
                 },
             },
             v_);
  return out;
}

void DriftKernel::accumulate(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, Eigen::MatrixXd& acc) const {
  std::visit(overloaded{
                 [&](const SolventForce& k) { solvent_accumulate(k, X, Y, acc); },
                 [&](const DoubleWell&) {
                   const Eigen::ArrayXd x = X.col(0).array();
                   const Eigen::ArrayXd num = x - x.cube();
                   const Eigen::ArrayXd base = 1.0 + x.square();
                   for (Eigen::Index l = 0; l < Y.rows(); ++l) {
                     const Eigen::RowVectorXd y = Y.row(l);
                     acc.col(0).array() += num / (base + double_well_denominator_shift(y.data()));
                   }
                 },
                 [&](const Separable& k) {
                   for (int j = 0; j < dim_; ++j) {
                     Eigen::ArrayXd b0(X.rows());
                     for (Eigen::Index m = 0; m < X.rows(); ++m) {
                       const Eigen::VectorXd x = row(X, m);
                       b0(m) = k.b0[static_cast<std::size_t>(j)].eval({x.data(), static_cast<std::size_t>(x.size())}, {});
                     }
                     for (Eigen::Index l = 0; l < Y.rows(); ++l) {
                       const double f = k.power == 1 ? Y(l, j) : Y(l, j) * Y(l, j);
                       acc.col(j).array() += b0 * f;
                     }
                   }
                 },
                 [&](const CustomKernel& k) {
                   for (Eigen::Index m = 0; m < X.rows(); ++m) {
                     const Eigen::VectorXd x = row(X, m);
                     for (Eigen::Index l = 0; l < Y.rows(); ++l) {
                       const Eigen::VectorXd y = row(Y, l);
                       for (int j = 0; j < dim_; ++j)
                         acc(m, j) += k.components[static_cast<std::size_t>(j)].eval(
                             {x.data(), static_cast<std::size_t>(x.size())}, {y.data(), static_cast<std::size_t>(y.size())});
                     }
                   }
                 },
             },
             v_);
}

void DriftKernel::accumulate_vjp(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& G,
                                 Eigen::MatrixXd& dY) const {
  std::visit(overloaded{
                 [&](const SolventForce& k) { solvent_vjp(k, X, Y, G, dY); },
                 [&](const DoubleWell&) {
                   const Eigen::ArrayXd x = X.col(0).array();
                   const Eigen::ArrayXd num = x - x.cube();
                   const Eigen::ArrayXd base = 1.0 + x.square();
                   const Eigen::ArrayXd g = G.col(0).array();
                   for (Eigen::Index l = 0; l < Y.rows(); ++l) {
                     const double y1 = Y(l, 0), y2 = Y(l, 1), y3 = Y(l, 2), y4 = Y(l, 3);
                     const Eigen::RowVectorXd y = Y.row(l);
                     const Eigen::ArrayXd den = base + double_well_denominator_shift(y.data());
                     // d b / d shift = -num / den^2
                     const double w = -(g * num / den.square()).sum();
                     dY(l, 0) += w * 2.0 * y1;
                     dY(l, 1) += w * 2.0 * y2 * std::cos(1.0 + y2 * y2);
                     dY(l, 2) += w * 2.0 * y3 / (1.0 + y3 * y3);
                     dY(l, 3) += w * 4.0 * y4 * y4 * y4;
                   }
                 },
                 [&](const Separable& k) {
                   for (int j = 0; j < dim_; ++j) {
                     double gb0 = 0.0;
                     for (Eigen::Index m = 0; m < X.rows(); ++m) {
                       const Eigen::VectorXd x = row(X, m);
                       gb0 += G(m, j) * k.b0[static_cast<std::size_t>(j)].eval({x.data(), static_cast<std::size_t>(x.size())}, {});
                     }
                     for (Eigen::Index l = 0; l < Y.rows(); ++l) dY(l, j) += k.power == 1 ? gb0 : 2.0 * gb0 * Y(l, j);
                   }
                 },
                 [&](const CustomKernel& k) {
                   for (Eigen::Index l = 0; l < Y.rows(); ++l) {
                     const Eigen::VectorXd y = row(Y, l);
                     Eigen::VectorXd grad = Eigen::VectorXd::Zero(fast_dim_);
                     for (Eigen::Index m = 0; m < X.rows(); ++m) {
                       const Eigen::VectorXd x = row(X, m);
                       for (int j = 0; j < dim_; ++j)
                         k.components[static_cast<std::size_t>(j)].eval_grad_y(
                             {x.data(), static_cast<std::size_t>(x.size())}, {y.data(), static_cast<std::size_t>(y.size())},
                             G(m, j), {grad.data(), static_cast<std::size_t>(grad.size())});
                     }
                     dY.row(l) += grad.transpose();
                   }
                 },
             },
             v_);
}

}  // namespace avgflow
