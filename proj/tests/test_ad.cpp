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

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "avgflow/ad/checkpoint.hpp"
#include "avgflow/ad/coupling_flow.hpp"
#include "avgflow/ad/gradient.hpp"
#include "avgflow/ad/mlp.hpp"
#include "avgflow/ad/tape.hpp"
#include "avgflow/core/errors.hpp"
#include "avgflow/core/rng.hpp"
#include "oracles.hpp"

using namespace avgflow;
using namespace avgflow::ad;

namespace {

// Random flow parameters, including the zero-initialised output layers.
Eigen::VectorXd random_params(const CouplingFlowSpec& spec, std::uint64_t seed, double scale = 0.5) {
  Stream rng(seed, "test_params");
  return scale * rng.normal_matrix(spec.param_count(), 1);
}

Eigen::VectorXd row_vec(const Matrix& m, Eigen::Index r) { return m.row(r).transpose(); }

}  // namespace

TEST_CASE("mlp_apply") {
  MlpSpec lin{{3, 3}, Activation::Tanh};
  Eigen::VectorXd p = Eigen::VectorXd::Zero(lin.param_count());
  CHECK(lin.param_count() == 12);
  Matrix x = Matrix::Random(4, 3);
  CHECK(mlp_apply(lin, p, x).isZero(0.0));
  // identity weight, bias b
  for (int i = 0; i < 3; ++i) p(i * 3 + i) = 1.0;
  p.tail(3) << 0.5, -1.0, 2.0;
  const Matrix y = mlp_apply(lin, p, x);
  for (int r = 0; r < 4; ++r) CHECK((y.row(r) - x.row(r) - Eigen::RowVector3d(0.5, -1.0, 2.0)).norm() < 1e-15);

  // 2 -> 1 (tanh) -> 1 by hand: w1 = (0.3, -0.7), b1 = 0.1, w2 = 1.5, b2 = -0.2
  MlpSpec one{{2, 1, 1}, Activation::Tanh};
  Eigen::VectorXd q(one.param_count());
  q << 0.3, -0.7, 0.1, 1.5, -0.2;
  Matrix in(1, 2);
  in << 0.4, 0.9;
  CHECK(mlp_apply(one, q, in)(0, 0) == doctest::Approx(1.5 * std::tanh(0.3 * 0.4 - 0.7 * 0.9 + 0.1) - 0.2).epsilon(1e-14));
  // row-major layout: W(1, 0) sits at index 2 for a 2 -> 2 layer
  MlpSpec two{{2, 2}, Activation::Tanh};
  Eigen::VectorXd w = Eigen::VectorXd::Zero(6);
  w(2) = 1.0;
  Matrix e0(1, 2);
  e0 << 1.0, 0.0;
  CHECK(mlp_apply(two, w, e0)(0, 1) == 1.0);
  CHECK_THROWS_AS(mlp_apply(one, q, Matrix::Zero(1, 3)), ConfigError);
}

TEST_CASE("identity and constant-scale flows") {
  const auto spec = CouplingFlowSpec::alternating(3, 4, {5});
  Stream rng(1, "init");
  const Eigen::VectorXd p = init_flow_params(spec, rng);
  const Matrix z = Matrix::Random(6, 3);
  const auto [y, ld] = flow_forward(spec, p, z);
  CHECK(y == z);
  CHECK(ld.isZero(0.0));

  // one layer on R^2 passing coordinate 0, s = c, t = 0
  CouplingFlowSpec one;
  one.dim = 2;
  one.masks = {CouplingMask{{0}, {1}}};
  one.hidden = {3};
  Eigen::VectorXd q = Eigen::VectorXd::Zero(one.param_count());
  const double c = 0.7;
  q(one.scale_net(0).param_count() - 1) = c;  // output bias of s
  Matrix zz(1, 2);
  zz << 0.3, -1.2;
  const auto [yy, ldd] = flow_forward(one, q, zz);
  CHECK(yy(0, 0) == 0.3);
  CHECK(yy(0, 1) == doctest::Approx(-1.2 * std::exp(c)).epsilon(1e-14));
  CHECK(ldd(0) == doctest::Approx(c).epsilon(1e-14));
}

TEST_CASE("flow round trip, log-determinant and change of variables") {
  for (int m = 1; m <= 4; ++m) {
    const auto spec = CouplingFlowSpec::alternating(m, 4, {6});
    const Eigen::VectorXd p = random_params(spec, static_cast<std::uint64_t>(m));
    Stream rng(m, "z");
    const Matrix z = 1.5 * rng.normal_matrix(100, m);
    const auto [y, ld] = flow_forward(spec, p, z);
    const auto [z2, ldi] = flow_inverse(spec, p, y);
    CHECK((z2 - z).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((ld + ldi).cwiseAbs().maxCoeff() <= 1e-10);
    const Eigen::VectorXd logp = flow_log_density(spec, p, y);
    CHECK((logp - (standard_normal_log_density(z) - ld)).cwiseAbs().maxCoeff() < 1e-9);
    for (Eigen::Index r = 0; r < 10; ++r) {
      auto f = [&](const Eigen::VectorXd& v) { return row_vec(flow_forward(spec, p, v.transpose()).first, 0); };
      CHECK(std::abs(oracle::fd_log_abs_det(f, row_vec(z, r)) - ld(r)) <= 1e-5);
    }
    // composition: total logdet is the sum of single-layer logdets on intermediate states
    Matrix h = z;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(z.rows());
    for (int k = 0; k < spec.layers(); ++k) {
      CouplingFlowSpec layer = spec;
      layer.masks = {spec.masks[static_cast<std::size_t>(k)]};
      const Eigen::Index n = layer.param_count();
      auto [next, l] = flow_forward(layer, p.segment(spec.layer_offset(k), n), h);
      sum += l;
      h = next;
    }
    CHECK((h - y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sum - ld).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("flow scale overflow is clamped and non-finite inputs are named") {
  const auto spec = CouplingFlowSpec::alternating(2, 2, {4});
  Eigen::VectorXd p = random_params(spec, 5, 100.0);
  const Matrix z = Matrix::Random(20, 2);
  const auto [y, ld] = flow_forward(spec, p, z);
  CHECK(ld.cwiseAbs().maxCoeff() <= 2 * 5.0 + 1e-12);
  // layer 0 rescales coordinate 1 by exp(clamp(100)) = e^5
  Eigen::VectorXd big = Eigen::VectorXd::Zero(spec.param_count());
  big(spec.scale_net(0).param_count() - 1) = 100.0;
  Matrix bad = z;
  bad(3, 1) = 1e307;
  try {
    flow_forward(spec, big, bad);
    FAIL("expected numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("layer") != std::string::npos);
  }
}

TEST_CASE("loss_and_gradient basics") {
  const Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(7, -1.0, 2.0);
  Objective half_norm = [](Tape&, const Var& v) { return scale(sum(square(v)), 0.5); };
  auto r = loss_and_gradient(half_norm, p);
  CHECK(r.grad == p);
  CHECK(r.value == evaluate(half_norm, p));
  Objective constant = [](Tape& t, const Var&) { return t.constant(Matrix::Constant(1, 1, 3.0)); };
  auto c = loss_and_gradient(constant, p);
  CHECK(c.value == 3.0);
  CHECK(c.grad.isZero(0.0));
  Objective relu_at_zero = [](Tape&, const Var& v) { return sum(relu(v)); };
  auto z = loss_and_gradient(relu_at_zero, Eigen::VectorXd::Zero(3));
  CHECK(z.grad.isZero(0.0));
}

TEST_CASE("primitive gradients match finite differences") {
  Stream rng(9, "prims");
  const Matrix A = rng.normal_matrix(3, 4);
  const Matrix B = rng.normal_matrix(4, 2);
  const std::vector<std::pair<const char*, Objective>> cases = {
      {"matmul", [&](Tape& t, const Var& v) { return sum(tanh(matmul(t.constant(A), block(v, 0, 4, 2)))); }},
      {"softplus", [&](Tape&, const Var& v) { return sum(softplus(v)); }},
      {"exp-log", [&](Tape&, const Var& v) { return sum(log(add_scalar(exp(v), 1.0))); }},
      {"pow", [&](Tape&, const Var& v) { return sum(pow(add_scalar(square(v), 0.5), 1.7)); }},
      {"mean-rows", [&](Tape&, const Var& v) { return mean(row_sums(square(transpose(block(v, 0, 2, 4))))); }},
      {"cols", [&](Tape&, const Var& v) {
         Var m = block(v, 0, 2, 4);
         Var a = select_cols(m, {0, 2});
         Var b = select_cols(m, {3});
         return sum(cwise_mul(merge_cols(a, {1, 2}, tanh(b), {0}, 3), merge_cols(b, {0}, a, {1, 2}, 3)));
       }},
      {"add-row", [&](Tape& t, const Var& v) {
         Var m = block(v, 0, 4, 2);
         return sum(square(add_row(matmul(t.constant(A), m), row(m, 1))));
       }},
      {"clamp", [&](Tape&, const Var& v) { return sum(square(clamp(v, -0.5, 0.5))); }},
  };
  for (const auto& [name, obj] : cases) {
    CAPTURE(name);
    for (int draw = 0; draw < 5; ++draw) {
      const Eigen::VectorXd p = rng.normal_matrix(8, 1);
      const auto r = loss_and_gradient(obj, p);
      const Eigen::VectorXd fd = oracle::fd_gradient([&](const Eigen::VectorXd& q) { return evaluate(obj, q); }, p);
      CHECK(oracle::max_relative_error(r.grad, fd) <= 1e-4);
      CHECK(r.value == evaluate(obj, p));
    }
  }
}

TEST_CASE("flow log-density gradient matches finite differences") {
  const auto spec = CouplingFlowSpec::alternating(3, 3, {4});
  Stream rng(2, "fd_flow");
  const Matrix z = rng.normal_matrix(6, 3);
  Objective obj = [&](Tape& t, const Var& p) {
    auto r = flow_forward(spec, p, t.constant(z));
    return sum(add(row_sums(square(r.y)), scale(r.logdet, -1.0)));
  };
  for (int draw = 0; draw < 20; ++draw) {
    const Eigen::VectorXd p = random_params(spec, 100 + static_cast<std::uint64_t>(draw), 0.3);
    const auto r = loss_and_gradient(obj, p);
    const Eigen::VectorXd fd = oracle::fd_gradient([&](const Eigen::VectorXd& q) { return evaluate(obj, q); }, p);
    CHECK(oracle::max_relative_error(r.grad, fd) <= 1e-4);
  }
}

TEST_CASE("checkpoints round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "avgflow_test_ad";
  const auto spec = CouplingFlowSpec::alternating(5, 3, {4, 3}, Activation::Softplus);
  const Eigen::VectorXd p = random_params(spec, 3);
  save_checkpoint(dir / "flow.ckpt", {spec, p});
  const Checkpoint c = load_checkpoint(dir / "flow.ckpt");
  const auto& s = std::get<CouplingFlowSpec>(c.spec);
  CHECK(s.dim == 5);
  CHECK(s.hidden == std::vector<int>{4, 3});
  CHECK(s.activation == Activation::Softplus);
  CHECK(s.masks.size() == 3);
  CHECK(s.masks[1].transformed == spec.masks[1].transformed);
  CHECK(c.params == p);

  MlpSpec mlp{{1, 8, 1}, Activation::Relu};
  Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(mlp.param_count(), -1, 1);
  save_checkpoint(dir / "mlp.ckpt", {mlp, q});
  const Checkpoint m = load_checkpoint(dir / "mlp.ckpt");
  CHECK(std::get<MlpSpec>(m.spec).widths == mlp.widths);
  CHECK(m.params == q);

  export_params_text(dir / "p.txt", p);
  CHECK(import_params_text(dir / "p.txt") == p);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), MissingArtifactError);
  CHECK_THROWS_AS(save_checkpoint(dir / "bad.ckpt", {mlp, p}), ConfigError);
  std::filesystem::remove_all(dir);
}
