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

#include "avgflow/ad/tape.hpp"

#include <cmath>

#include "avgflow/core/errors.hpp"

namespace avgflow::ad {

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), Backward(), false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), Backward(), record_});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  bool needs = false;
  if (record_)
    for (const auto& p : parents) needs = needs || nodes_[p.id()].requires_grad;
  nodes_.push_back(Node{std::move(value), Matrix(), needs ? std::move(backward) : Backward(), needs});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0 && n.value.size() != 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::accumulate_segment(const Var& v, Eigen::Index offset, const Matrix& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  n.grad.col(0).segment(offset, g.size()) += Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
}

void Tape::backward(const Var& out) {
  if (out.rows() != 1 || out.cols() != 1) throw ConfigError("Tape::backward: output must be 1x1 without a seed");
  backward(out, Matrix::Ones(1, 1));
}

void Tape::backward(const Var& out, const Matrix& seed) {
  if (!record_) throw ConfigError("Tape::backward on a non-recording tape");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[out.id()].grad = seed;
  for (std::size_t i = out.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, n.grad, n.value);
  }
}

Matrix Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "softplus") return Activation::Softplus;
  if (name == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + name + "' (expected tanh, softplus or relu)");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Softplus: return "softplus";
    case Activation::Relu: return "relu";
  }
  return "?";
}

namespace {
void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                      " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}
}  // namespace

#define AD_BACKWARD [=](Tape & t, const Matrix& g, [[maybe_unused]] const Matrix& out)

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return a.tape().record(a.value() + b.value(), {a, b}, AD_BACKWARD {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return a.tape().record(a.value() - b.value(), {a, b}, AD_BACKWARD {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var cwise_mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "cwise_mul");
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b}, AD_BACKWARD {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var add_row(const Var& a, const Var& r) {
  if (r.rows() != 1 || r.cols() != a.cols()) throw ConfigError("add_row: row must be 1 x cols(a)");
  Matrix v = a.value().rowwise() + r.value().row(0);
  return a.tape().record(std::move(v), {a, r}, AD_BACKWARD {
    t.accumulate(a, g);
    if (t.requires_grad(r)) t.accumulate(r, g.colwise().sum());
  });
}

Var scale(const Var& a, double s) {
  return a.tape().record(s * a.value(), {a}, AD_BACKWARD { t.accumulate(a, s * g); });
}

Var add_scalar(const Var& a, double s) {
  return a.tape().record((a.value().array() + s).matrix(), {a}, AD_BACKWARD { t.accumulate(a, g); });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ConfigError("matmul: inner dimensions differ");
  Matrix v = Matrix::Zero(a.rows(), b.cols());
  if (a.cols() > 0) v.noalias() = a.value() * b.value();
  return a.tape().record(std::move(v), {a, b}, AD_BACKWARD {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var tanh(const Var& a) {
  return a.tape().record(a.value().array().tanh().matrix(), {a}, AD_BACKWARD {
    t.accumulate(a, (g.array() * (1.0 - out.array().square())).matrix());
  });
}

namespace {
double softplus_scalar(double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); }
double sigmoid_scalar(double v) { return 1.0 / (1.0 + std::exp(-v)); }
}  // namespace

Var softplus(const Var& a) {
  return a.tape().record(a.value().unaryExpr(&softplus_scalar), {a}, AD_BACKWARD {
    t.accumulate(a, g.cwiseProduct(a.value().unaryExpr(&sigmoid_scalar)));
  });
}

Var relu(const Var& a) {
  return a.tape().record(a.value().cwiseMax(0.0), {a}, AD_BACKWARD {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0).matrix());
  });
}

Var activate(const Var& a, Activation act) {
  switch (act) {
    case Activation::Tanh: return tanh(a);
    case Activation::Softplus: return softplus(a);
    case Activation::Relu: return relu(a);
  }
  return a;
}

Var exp(const Var& a) {
  return a.tape().record(a.value().array().exp().matrix(), {a}, AD_BACKWARD { t.accumulate(a, g.cwiseProduct(out)); });
}

Var log(const Var& a) {
  return a.tape().record(a.value().array().log().matrix(), {a}, AD_BACKWARD {
    t.accumulate(a, (g.array() / a.value().array()).matrix());
  });
}

Var square(const Var& a) {
  return a.tape().record(a.value().array().square().matrix(), {a}, AD_BACKWARD {
    t.accumulate(a, 2.0 * g.cwiseProduct(a.value()));
  });
}

Var pow(const Var& a, double p) {
  return a.tape().record(a.value().array().pow(p).matrix(), {a}, AD_BACKWARD {
    t.accumulate(a, (g.array() * p * a.value().array().pow(p - 1.0)).matrix());
  });
}

Var clamp(const Var& a, double lo, double hi) {
  return a.tape().record(a.value().cwiseMax(lo).cwiseMin(hi), {a}, AD_BACKWARD {
    t.accumulate(a, (a.value().array() >= lo && a.value().array() <= hi).select(g, 0.0).matrix());
  });
}

Var sum(const Var& a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape().record(std::move(v), {a}, AD_BACKWARD {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var row_sums(const Var& a) {
  return a.tape().record(a.value().rowwise().sum(), {a}, AD_BACKWARD {
    t.accumulate(a, g.col(0).replicate(1, a.cols()));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  Matrix v(1, 1);
  v(0, 0) = a.value().sum() / n;
  return a.tape().record(std::move(v), {a}, AD_BACKWARD {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
  });
}

Var select_cols(const Var& a, const std::vector<int>& cols) {
  Matrix v(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) v.col(static_cast<Eigen::Index>(j)) = a.value().col(cols[j]);
  return a.tape().record(std::move(v), {a}, AD_BACKWARD {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t j = 0; j < cols.size(); ++j) ga.col(cols[j]) += g.col(static_cast<Eigen::Index>(j));
    t.accumulate(a, ga);
  });
}

Var merge_cols(const Var& a, const std::vector<int>& cols_a, const Var& b, const std::vector<int>& cols_b, int total) {
  if (a.rows() != b.rows()) throw ConfigError("merge_cols: row mismatch");
  Matrix v(a.rows(), total);
  for (std::size_t j = 0; j < cols_a.size(); ++j) v.col(cols_a[j]) = a.value().col(static_cast<Eigen::Index>(j));
  for (std::size_t j = 0; j < cols_b.size(); ++j) v.col(cols_b[j]) = b.value().col(static_cast<Eigen::Index>(j));
  return a.tape().record(std::move(v), {a, b}, AD_BACKWARD {
    if (t.requires_grad(a)) {
      Matrix ga(a.rows(), a.cols());
      for (std::size_t j = 0; j < cols_a.size(); ++j) ga.col(static_cast<Eigen::Index>(j)) = g.col(cols_a[j]);
      t.accumulate(a, ga);
    }
    if (t.requires_grad(b)) {
      Matrix gb(b.rows(), b.cols());
      for (std::size_t j = 0; j < cols_b.size(); ++j) gb.col(static_cast<Eigen::Index>(j)) = g.col(cols_b[j]);
      t.accumulate(b, gb);
    }
  });
}

Var block(const Var& flat, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols) {
  if (flat.cols() != 1 || offset + rows * cols > flat.rows()) throw ConfigError("block: out of range");
  Matrix v = Eigen::Map<const Matrix>(flat.value().data() + offset, rows, cols);
  return flat.tape().record(std::move(v), {flat}, AD_BACKWARD {
    t.accumulate_segment(flat, offset, g);
  });
}

Var row(const Var& a, Eigen::Index r) {
  return a.tape().record(a.value().row(r), {a}, AD_BACKWARD {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    ga.row(r) = g;
    t.accumulate(a, ga);
  });
}

Var transpose(const Var& a) {
  return a.tape().record(a.value().transpose(), {a}, AD_BACKWARD { t.accumulate(a, g.transpose()); });
}

}  // namespace avgflow::ad
