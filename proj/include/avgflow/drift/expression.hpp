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

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avgflow {

/// Closed-form scalar expression in prefix (S-expression) notation.
///
///   expr  := number | xK | yK | '(' op expr... ')'
///   op    := add | sub | mul | div | neg | exp | log | square | pow
///          | tanh | softplus | relu | sin | cos
///
/// `add` and `mul` are n-ary, `sub` and `div` binary, `pow` takes an
/// expression and a numeric exponent, the rest are unary. xK and yK read the
/// K-th slow and fast coordinate. Example: "(mul (neg x0) (square y0))".
class Expression {
 public:
  enum class Op {
    Constant, SlowVar, FastVar,
    Add, Sub, Mul, Div, Neg, Exp, Log, Square, Pow, Tanh, Softplus, Relu, Sin, Cos
  };

  static Expression parse(std::string_view text);

  double eval(std::span<const double> x, std::span<const double> y) const;

  /// Returns the value and adds weight * d(expr)/dy into grad_y.
  double eval_grad_y(std::span<const double> x, std::span<const double> y, double weight,
                     std::span<double> grad_y) const;

  /// Highest referenced index + 1 (0 if unused).
  int slow_arity() const { return slow_arity_; }
  int fast_arity() const { return fast_arity_; }

  const std::string& source() const { return source_; }

 private:
  struct Node {
    Op op;
    double constant = 0.0;
    int index = 0;
    std::vector<int> children;
  };

  int parse_node(std::string_view text, std::size_t& pos);
  void forward(std::span<const double> x, std::span<const double> y, std::vector<double>& values) const;

  std::vector<Node> nodes_;  // children precede parents; root is last
  std::string source_;
  int slow_arity_ = 0;
  int fast_arity_ = 0;
};

}  // namespace avgflow
