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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "avgflow/core/errors.hpp"
#include "avgflow/eval/metrics.hpp"
#include "oracles.hpp"

using namespace avgflow;

namespace {

Eigen::MatrixXd cubic(const Eigen::MatrixXd& X) { return (-X.array().cube()).matrix(); }

Trajectory straight(Eigen::Index n, double dt, double offset) {
  Trajectory t;
  t.times = Eigen::VectorXd::LinSpaced(n, 0.0, dt * static_cast<double>(n - 1));
  t.states = Eigen::MatrixXd(n, 2);
  t.states.col(0) = t.times.array().sin() + offset;
  t.states.col(1) = t.times.array().cos();
  return t;
}

std::vector<double> draw(std::mt19937_64& g, std::size_t n, bool integral) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_int_distribution<int> k(-4, 4);
  std::vector<double> s(n);
  for (auto& v : s) v = integral ? k(g) : u(g);
  return s;
}

}  // namespace

TEST_CASE("grid defaults and flattening") {
  auto g1 = EvalGrid::default_for(1);
  CHECK(g1.size() == 200);
  auto X = g1.flatten();
  CHECK(X(0, 0) == -2.0);
  CHECK(X(199, 0) == 2.0);
  auto g2 = EvalGrid::default_for(2);
  CHECK(g2.size() == 2500);
  auto Y = g2.flatten();
  CHECK(Y(1, 1) > Y(0, 1));  // last axis fastest
  CHECK(Y(1, 0) == Y(0, 0));

  EvalGrid bad = g1;
  bad.points[0] = 1;
  CHECK_THROWS_AS(bad.flatten(), ConfigError);
  bad = g1;
  bad.hi(0) = -3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("drift MSE: equality, constant offset, permutation invariance") {
  const auto grid = EvalGrid::default_for(2);
  CHECK(drift_mse_on_grid(cubic, cubic, grid) == 0.0);
  const Eigen::RowVector2d c(0.5, -0.25);
  auto shifted = [&](const Eigen::MatrixXd& X) -> Eigen::MatrixXd { return cubic(X).rowwise() + c; };
  // cubes of grid points plus dyadic offsets are not always exact, so compare at rounding level
  CHECK(drift_mse_on_grid(shifted, cubic, grid) == doctest::Approx(c.squaredNorm()).epsilon(1e-12));
  auto offset_only = [&](const Eigen::MatrixXd& X) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(X.rows(), 2).rowwise() + c; };
  auto zero = [](const Eigen::MatrixXd& X) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(X.rows(), 2); };
  CHECK(drift_mse_on_grid(offset_only, zero, grid) == c.squaredNorm());

  const Eigen::MatrixXd X = grid.flatten();
  Eigen::MatrixXd est = cubic(X) + 0.1 * X.array().sin().matrix();
  Eigen::MatrixXd ora = cubic(X);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(X.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  Eigen::MatrixXd pe(est.rows(), 2), po(ora.rows(), 2);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    pe.row(i) = est.row(perm[static_cast<std::size_t>(i)]);
    po.row(i) = ora.row(perm[static_cast<std::size_t>(i)]);
  }
  CHECK(mse_of_values(est, ora) == mse_of_values(pe, po));

  auto nan = [](const Eigen::MatrixXd& X) -> Eigen::MatrixXd {
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(X.rows(), X.cols());
    v(3, 0) = std::nan("");
    return v;
  };
  CHECK_THROWS_AS(drift_mse_on_grid(nan, zero, grid), NumericError);
}

TEST_CASE("path discrepancy") {
  const auto a = straight(101, 0.1, 0.0);
  const auto same = path_discrepancy(a, a, 5.0);
  CHECK(same.first == 0.0);
  CHECK(same.second == 0.0);
  const auto b = straight(101, 0.1, 0.75);
  const auto off = path_discrepancy(a, b, 5.0);
  CHECK(off.first == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(off.second == doctest::Approx(0.75).epsilon(1e-14));
  const auto shorter = straight(50, 0.1, 0.0);
  CHECK_THROWS_AS(path_discrepancy(a, shorter, 1.0), ConfigError);
  auto shifted = a;
  shifted.times.array() += 0.05;
  CHECK_THROWS_AS(path_discrepancy(a, shifted, 1.0), ConfigError);
}

TEST_CASE("KS examples") {
  CHECK(ks_statistic({0.3, 1.2, -4}, {0.3, 1.2, -4}) == 0.0);
  CHECK(ks_statistic({0, 0}, {1, 1}) == 1.0);
  CHECK(ks_statistic({0, 1}, {0.5, 1.5}) == 0.5);
  CHECK_THROWS_AS(ks_statistic({}, {1.0}), ConfigError);
}

TEST_CASE("W1 examples") {
  CHECK(wasserstein_1d({2, -1, 7}, {7, 2, -1}) == 0.0);
  CHECK(wasserstein_1d({0, 1}, {0, 2}) == 0.5);
  std::vector<double> a{0.5, -1.25, 3.0, 2.0}, b;
  for (double v : a) b.push_back(v + 0.375);
  CHECK(wasserstein_1d(a, b) == 0.375);
  // unequal sizes: {0} vs {0, 1} puts half the mass one unit away
  CHECK(wasserstein_1d({0}, {0, 1}) == 0.5);
  CHECK_THROWS_AS(wasserstein_1d({1.0}, {}), ConfigError);
}

TEST_CASE("KS and W1 match brute force") {
  std::mt19937_64 g(11);
  std::uniform_int_distribution<std::size_t> size(1, 50), pow2(0, 5);
  int exact_w1 = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const bool integral = rep % 2 == 0;
    std::size_t na, nb;
    if (integral) {
      // integer samples with power-of-two sizes keep every CDF step and gap exact
      na = std::size_t{1} << pow2(g);
      nb = rep % 4 == 0 ? na : std::size_t{1} << pow2(g);
    } else {
      na = size(g);
      nb = rep % 3 == 0 ? na : size(g);
    }
    const auto a = draw(g, na, integral), b = draw(g, nb, integral);
    REQUIRE(ks_statistic(a, b) == oracle::ks_bruteforce(a, b));
    const double w = wasserstein_1d(a, b), ref = oracle::w1_bruteforce(a, b);
    if (integral) {
      REQUIRE(w == ref);
      ++exact_w1;
    } else {
      REQUIRE(std::abs(w - ref) <= 1e-12 * std::max(1.0, ref));
    }
  }
  CHECK(exact_w1 == 500);
}

TEST_CASE("W1 triangle inequality") {
  std::mt19937_64 g(12);
  std::uniform_int_distribution<std::size_t> size(1, 40);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto a = draw(g, size(g), false), b = draw(g, size(g), false), c = draw(g, size(g), false);
    REQUIRE(wasserstein_1d(a, c) <= wasserstein_1d(a, b) + wasserstein_1d(b, c) + 1e-12);
  }
}

TEST_CASE("KDE integrates to one") {
  std::mt19937_64 g(5);
  std::normal_distribution<double> n(1.0, 0.3);
  std::vector<double> s(2000);
  for (auto& v : s) v = n(g);
  const double h = silverman_bandwidth(s);
  CHECK(h > 0);
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(512, *lo - 5 * h, *hi + 5 * h);
  CHECK(std::abs(trapezoid(x, kde(s, h, x)) - 1.0) < 1e-3);
  // constant samples still get a usable width
  CHECK(silverman_bandwidth(std::vector<double>(10, 2.0)) > 0);
}

TEST_CASE("tabulated drift interpolates and clamps") {
  EvalGrid g;
  g.lo = Eigen::Vector2d(-1, 0);
  g.hi = Eigen::Vector2d(1, 2);
  g.points = {5, 9};
  // bilinear functions are reproduced exactly up to rounding
  auto f = [](const Eigen::MatrixXd& X) -> Eigen::MatrixXd {
    Eigen::MatrixXd v(X.rows(), 1);
    v.col(0) = 1.0 + 2.0 * X.col(0).array() - X.col(1).array() + 0.5 * X.col(0).array() * X.col(1).array();
    return v;
  };
  const auto tab = TabulatedDrift::tabulate(f, g, 1);
  Eigen::MatrixXd q(3, 2);
  q << 0.3, 1.1, -0.9, 0.05, 1.0, 2.0;
  CHECK((tab(q) - f(q)).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::MatrixXd outside(1, 2);
  outside << 4.0, -3.0;
  Eigen::MatrixXd edge(1, 2);
  edge << 1.0, 0.0;
  CHECK(tab(outside)(0, 0) == tab(edge)(0, 0));
}

TEST_CASE("ensemble matches single-path simulation") {
  Eigen::MatrixXd sigma(1, 1);
  sigma << 0.3;
  Eigen::VectorXd x0(1);
  x0 << 0.7;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  auto ens = simulate_ensemble(cubic, sigma, x0, {0, 40, 100}, 0.01, seeds);
  REQUIRE(ens.size() == 3);
  for (std::size_t j = 0; j < seeds.size(); ++j) {
    auto path = simulate_reduced(cubic, sigma, x0, 1.0, 0.01, seeds[j]);
    CHECK(ens[0](static_cast<Eigen::Index>(j), 0) == 0.7);
    CHECK(ens[1](static_cast<Eigen::Index>(j), 0) == doctest::Approx(path.states(40, 0)).epsilon(1e-13));
    CHECK(ens[2](static_cast<Eigen::Index>(j), 0) == doctest::Approx(path.states(100, 0)).epsilon(1e-13));
  }
}

TEST_CASE("law comparison: shared noise gives zero distance") {
  Eigen::MatrixXd sigma(1, 1);
  sigma << 0.5;
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  const auto rep = law_comparison_report(cubic, cubic, sigma, x0, {0.5, 1.0, 1.5}, 300, 0.01, 9);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(rep.ks[k] == 0.0);
    CHECK(rep.w1[k] == 0.0);
    CHECK(std::abs(trapezoid(rep.kde_grid, rep.kde_true[k]) - 1.0) < 1e-3);
    CHECK(std::abs(trapezoid(rep.kde_grid, rep.kde_est[k]) - 1.0) < 1e-3);
  }
  auto slower = [](const Eigen::MatrixXd& X) -> Eigen::MatrixXd { return (-0.2 * X.array().cube()).matrix(); };
  const auto diff = law_comparison_report(cubic, slower, sigma, x0, {1.0}, 300, 0.01, 9);
  CHECK(diff.w1[0] > 0.0);
  CHECK(diff.ks[0] > 0.0);
  // deterministic in the seed
  const auto again = law_comparison_report(cubic, slower, sigma, x0, {1.0}, 300, 0.01, 9);
  CHECK(again.w1[0] == diff.w1[0]);
  CHECK_THROWS_AS(law_comparison_report(cubic, cubic, sigma, x0, {}, 10, 0.01, 1), ConfigError);
  CHECK_THROWS_AS(law_comparison_report(cubic, cubic, sigma, x0, {1.0}, 0, 0.01, 1), ConfigError);
}
