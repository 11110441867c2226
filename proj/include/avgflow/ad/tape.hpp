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

#include <cstddef>
#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace avgflow::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a matrix-valued node on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape whose nodes are dense matrices.
///
/// Every primitive records its value and, when any input needs a gradient, a
/// closure that pulls the output adjoint back into the inputs. A tape built
/// with record = false only evaluates values; because both modes run the same
/// primitives, a plain evaluation is bitwise equal to the recorded one.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad_out, const Matrix& value_out)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  /// Leaf whose gradient is wanted (a constant when not recording).
  Var variable(Matrix value);

  /// Adds a node computed from `parents`; `backward` is stored only if a parent needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }

  /// Adds g into the adjoint of v (no-op for constants).
  void accumulate(const Var& v, const Matrix& g);
  /// Adds the entries of g (column-major) into the adjoint of the column vector v at rows [offset, offset + g.size()).
  void accumulate_segment(const Var& v, Eigen::Index offset, const Matrix& g);

  /// Seeds d(out)/d(out) = seed (ones for a 1x1 output) and sweeps backwards.
  void backward(const Var& out);
  void backward(const Var& out, const Matrix& seed);

  /// Adjoint of v after backward(); zeros if v was not reached.
  Matrix grad(const Var& v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;
  bool record_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

enum class Activation { Tanh, Softplus, Relu };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

// Primitives. Shapes follow Eigen semantics; rows index samples.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var cwise_mul(const Var& a, const Var& b);
/// a + row, with the 1 x n row broadcast over the rows of a.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var matmul(const Var& a, const Var& b);
Var tanh(const Var& a);
Var softplus(const Var& a);
/// Subgradient 0 at 0.
Var relu(const Var& a);
Var activate(const Var& a, Activation act);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var pow(const Var& a, double p);
/// Hard clamp; zero gradient outside [lo, hi].
Var clamp(const Var& a, double lo, double hi);
/// 1 x 1 sum of all entries.
Var sum(const Var& a);
/// rows x 1 sums over columns.
Var row_sums(const Var& a);
Var mean(const Var& a);
Var select_cols(const Var& a, const std::vector<int>& cols);
/// Interleaves columns of a (placed at cols_a) and b (placed at cols_b) into a matrix with total columns.
Var merge_cols(const Var& a, const std::vector<int>& cols_a, const Var& b, const std::vector<int>& cols_b, int total);
/// Reads count = rows * cols entries of a column vector starting at offset as a column-major rows x cols matrix.
Var block(const Var& flat, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols);
/// Row r of a as a 1 x cols matrix.
Var row(const Var& a, Eigen::Index r);
/// Transpose.
Var transpose(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace avgflow::ad
