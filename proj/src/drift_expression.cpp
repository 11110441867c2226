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

#include "avgflow/drift/expression.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "avgflow/core/errors.hpp"

namespace avgflow {

namespace {

using Op = Expression::Op;

struct OpInfo {
  Op op;
  int min_args;
  int max_args;  // -1: unbounded
};

const std::map<std::string, OpInfo, std::less<>>& op_table() {
  static const std::map<std::string, OpInfo, std::less<>> table{
      {"add", {Op::Add, 2, -1}},    {"sub", {Op::Sub, 2, 2}},       {"mul", {Op::Mul, 2, -1}},
      {"div", {Op::Div, 2, 2}},     {"neg", {Op::Neg, 1, 1}},       {"exp", {Op::Exp, 1, 1}},
      {"log", {Op::Log, 1, 1}},     {"square", {Op::Square, 1, 1}}, {"pow", {Op::Pow, 2, 2}},
      {"tanh", {Op::Tanh, 1, 1}},   {"softplus", {Op::Softplus, 1, 1}},
      {"relu", {Op::Relu, 1, 1}},   {"sin", {Op::Sin, 1, 1}},       {"cos", {Op::Cos, 1, 1}},
  };
  return table;
}

void skip_space(std::string_view s, std::size_t& pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
}

std::string_view read_token(std::string_view s, std::size_t& pos) {
  std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos])) && s[pos] != '(' && s[pos] != ')')
    ++pos;
  return s.substr(start, pos - start);
}

double softplus(double v) { return v > 30 ? v : std::log1p(std::exp(v)); }
double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

Expression Expression::parse(std::string_view text) {
  Expression e;
  e.source_ = std::string(text);
  std::size_t pos = 0;
  e.parse_node(text, pos);
  skip_space(text, pos);
  if (pos != text.size())
    throw ConfigError("expression: trailing input at offset " + std::to_string(pos) + " in '" + e.source_ + "'");
  return e;
}

int Expression::parse_node(std::string_view s, std::size_t& pos) {
  skip_space(s, pos);
  if (pos >= s.size()) throw ConfigError("expression: unexpected end of input in '" + source_ + "'");
  Node node;
  if (s[pos] == '(') {
    ++pos;
    skip_space(s, pos);
    auto name = read_token(s, pos);
    auto it = op_table().find(name);
    if (it == op_table().end())
      throw ConfigError("expression: unknown operator '" + std::string(name) + "' in '" + source_ + "'");
    node.op = it->second.op;
    while (true) {
      skip_space(s, pos);
      if (pos >= s.size()) throw ConfigError("expression: missing ')' in '" + source_ + "'");
      if (s[pos] == ')') {
        ++pos;
        break;
      }
      if (node.op == Op::Pow && node.children.size() == 1) {
        // exponent must be a literal
        auto tok = read_token(s, pos);
        try {
          node.constant = std::stod(std::string(tok));
        } catch (...) {
          throw ConfigError("expression: pow exponent must be a number in '" + source_ + "'");
        }
        node.children.push_back(-1);
        continue;
      }
      node.children.push_back(parse_node(s, pos));
    }
    const auto& info = it->second;
    const int n = static_cast<int>(node.children.size());
    if (n < info.min_args || (info.max_args >= 0 && n > info.max_args))
      throw ConfigError("expression: operator '" + std::string(name) + "' got " + std::to_string(n) +
                        " arguments in '" + source_ + "'");
    if (node.op == Op::Pow) node.children.pop_back();
  } else if (s[pos] == ')') {
    throw ConfigError("expression: unexpected ')' in '" + source_ + "'");
  } else {
    auto tok = read_token(s, pos);
    if ((tok[0] == 'x' || tok[0] == 'y') && tok.size() > 1 &&
        std::all_of(tok.begin() + 1, tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      node.op = tok[0] == 'x' ? Op::SlowVar : Op::FastVar;
      node.index = std::stoi(std::string(tok.substr(1)));
      int& arity = tok[0] == 'x' ? slow_arity_ : fast_arity_;
      arity = std::max(arity, node.index + 1);
    } else {
      try {
        std::size_t used = 0;
        node.constant = std::stod(std::string(tok), &used);
        if (used != tok.size()) throw std::invalid_argument("partial");
      } catch (...) {
        throw ConfigError("expression: bad token '" + std::string(tok) + "' in '" + source_ + "'");
      }
      node.op = Op::Constant;
    }
  }
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

void Expression::forward(std::span<const double> x, std::span<const double> y, std::vector<double>& v) const {
  v.resize(nodes_.size());
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& n = nodes_[k];
    auto c = [&](int i) { return v[static_cast<std::size_t>(n.children[static_cast<std::size_t>(i)])]; };
    double r = 0.0;
    switch (n.op) {
      case Op::Constant: r = n.constant; break;
      case Op::SlowVar: r = x[static_cast<std::size_t>(n.index)]; break;
      case Op::FastVar: r = y[static_cast<std::size_t>(n.index)]; break;
      case Op::Add:
        for (std::size_t i = 0; i < n.children.size(); ++i) r += c(static_cast<int>(i));
        break;
      case Op::Mul:
        r = 1.0;
        for (std::size_t i = 0; i < n.children.size(); ++i) r *= c(static_cast<int>(i));
        break;
      case Op::Sub: r = c(0) - c(1); break;
      case Op::Div: r = c(0) / c(1); break;
      case Op::Neg: r = -c(0); break;
      case Op::Exp: r = std::exp(c(0)); break;
      case Op::Log: r = std::log(c(0)); break;
      case Op::Square: r = c(0) * c(0); break;
      case Op::Pow: r = std::pow(c(0), n.constant); break;
      case Op::Tanh: r = std::tanh(c(0)); break;
      case Op::Softplus: r = softplus(c(0)); break;
      case Op::Relu: r = c(0) > 0 ? c(0) : 0.0; break;
      case Op::Sin: r = std::sin(c(0)); break;
      case Op::Cos: r = std::cos(c(0)); break;
    }
    v[k] = r;
  }
}

double Expression::eval(std::span<const double> x, std::span<const double> y) const {
  std::vector<double> v;
  forward(x, y, v);
  return v.back();
}

double Expression::eval_grad_y(std::span<const double> x, std::span<const double> y, double weight,
                               std::span<double> grad_y) const {
  std::vector<double> v;
  forward(x, y, v);
  std::vector<double> adj(nodes_.size(), 0.0);
  adj.back() = weight;
  for (std::size_t k = nodes_.size(); k-- > 0;) {
    const Node& n = nodes_[k];
    const double g = adj[k];
    if (g == 0.0) continue;
    auto ci = [&](int i) { return static_cast<std::size_t>(n.children[static_cast<std::size_t>(i)]); };
    auto cv = [&](int i) { return v[ci(i)]; };
    switch (n.op) {
      case Op::Constant:
      case Op::SlowVar: break;
      case Op::FastVar: grad_y[static_cast<std::size_t>(n.index)] += g; break;
      case Op::Add:
        for (std::size_t i = 0; i < n.children.size(); ++i) adj[ci(static_cast<int>(i))] += g;
        break;
      case Op::Mul:
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          double p = g;
          for (std::size_t j = 0; j < n.children.size(); ++j)
            if (j != i) p *= cv(static_cast<int>(j));
          adj[ci(static_cast<int>(i))] += p;
        }
        break;
      case Op::Sub:
        adj[ci(0)] += g;
        adj[ci(1)] -= g;
        break;
      case Op::Div:
        adj[ci(0)] += g / cv(1);
        adj[ci(1)] -= g * cv(0) / (cv(1) * cv(1));
        break;
      case Op::Neg: adj[ci(0)] -= g; break;
      case Op::Exp: adj[ci(0)] += g * v[k]; break;
      case Op::Log: adj[ci(0)] += g / cv(0); break;
      case Op::Square: adj[ci(0)] += 2.0 * g * cv(0); break;
      case Op::Pow: adj[ci(0)] += g * n.constant * std::pow(cv(0), n.constant - 1.0); break;
      case Op::Tanh: adj[ci(0)] += g * (1.0 - v[k] * v[k]); break;
      case Op::Softplus: adj[ci(0)] += g * sigmoid(cv(0)); break;
      case Op::Relu: adj[ci(0)] += cv(0) > 0 ? g : 0.0; break;
      case Op::Sin: adj[ci(0)] += g * std::cos(cv(0)); break;
      case Op::Cos: adj[ci(0)] -= g * std::sin(cv(0)); break;
    }
  }
  return v.back();
}

}  // namespace avgflow
