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

#include "avgflow/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "avgflow/core/errors.hpp"
#include "avgflow/core/parallel.hpp"
#include "avgflow/core/rng.hpp"
#include "avgflow/sim/models.hpp"

namespace avgflow {

EvalGrid EvalGrid::default_for(int d) {
  if (d < 1) throw ConfigError("grid dimension must be >= 1");
  EvalGrid g;
  g.lo = Eigen::VectorXd::Constant(d, -2.0);
  g.hi = Eigen::VectorXd::Constant(d, 2.0);
  const Eigen::Index n = d == 1 ? 200 : d == 2 ? 50 : 20;
  g.points.assign(static_cast<std::size_t>(d), n);
  return g;
}

Eigen::Index EvalGrid::size() const {
  Eigen::Index n = 1;
  for (auto p : points) n *= p;
  return n;
}

void EvalGrid::validate() const {
  if (points.empty()) throw ConfigError("grid: no axes");
  if (lo.size() != dim() || hi.size() != dim()) throw ConfigError("grid: bounds and point counts disagree in dimension");
  for (int j = 0; j < dim(); ++j) {
    if (points[static_cast<std::size_t>(j)] < 2) throw ConfigError("grid: every axis needs >= 2 points");
    if (!std::isfinite(lo(j)) || !std::isfinite(hi(j)) || !(lo(j) < hi(j)))
      throw ConfigError("grid: axis " + std::to_string(j) + " needs finite min < max");
  }
}

Eigen::MatrixXd EvalGrid::flatten() const {
  validate();
  const Eigen::Index n = size();
  Eigen::MatrixXd out(n, dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index rem = i;
    for (int j = dim(); j-- > 0;) {
      const Eigen::Index p = points[static_cast<std::size_t>(j)];
      const Eigen::Index c = rem % p;
      rem /= p;
      out(i, j) = lo(j) + (hi(j) - lo(j)) * static_cast<double>(c) / static_cast<double>(p - 1);
    }
  }
  return out;
}

double mse_of_values(const Eigen::MatrixXd& estimated, const Eigen::MatrixXd& oracle) {
  if (estimated.rows() != oracle.rows() || estimated.cols() != oracle.cols())
    throw ConfigError("drift_mse_on_grid: estimate and oracle shapes differ");
  if (estimated.rows() == 0) throw ConfigError("drift_mse_on_grid: empty grid");
  std::vector<double> err(static_cast<std::size_t>(estimated.rows()));
  for (Eigen::Index i = 0; i < estimated.rows(); ++i)
    err[static_cast<std::size_t>(i)] = (estimated.row(i) - oracle.row(i)).squaredNorm();
  std::sort(err.begin(), err.end());
  double total = 0.0;
  for (double e : err) total += e;
  const double mse = total / static_cast<double>(err.size());
  if (!std::isfinite(mse)) throw NumericError("drift_mse_on_grid: non-finite drift value on the grid");
  return mse;
}

double drift_mse_on_grid(const BatchDrift& estimated, const BatchDrift& oracle, const EvalGrid& grid) {
  const Eigen::MatrixXd X = grid.flatten();
  return mse_of_values(estimated(X), oracle(X));
}

std::pair<double, double> path_discrepancy(const Trajectory& a, const Trajectory& b, double split_time) {
  if (a.size() != b.size() || a.dim() != b.dim())
    throw ConfigError("path_discrepancy: trajectories have different shapes");
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (std::abs(a.times(i) - b.times(i)) > 1e-12 * std::max(1.0, std::abs(a.times(i))))
      throw ConfigError("path_discrepancy: time grids differ at index " + std::to_string(i));
  double pre = 0.0, post = 0.0;
  Eigen::Index n_pre = 0, n_post = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double gap = (a.states.row(i) - b.states.row(i)).squaredNorm();
    if (a.times(i) <= split_time) {
      pre += gap;
      ++n_pre;
    } else {
      post += gap;
      ++n_post;
    }
  }
  return {n_pre ? std::sqrt(pre / static_cast<double>(n_pre)) : 0.0,
          n_post ? std::sqrt(post / static_cast<double>(n_post)) : 0.0};
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() || j < b.size()) {
    const double t = j == b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("wasserstein_1d: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
    return total / static_cast<double>(a.size());
  }
  // Quantile functions are constant on [i/na, (i+1)/na) and [j/nb, (j+1)/nb).
  const auto na = a.size(), nb = b.size();
  std::size_t i = 0, j = 0;
  double u = 0.0, total = 0.0;
  while (i < na && j < nb) {
    // compare (i+1)/na with (j+1)/nb exactly in integers
    const auto lhs = (i + 1) * nb, rhs = (j + 1) * na;
    const double next = lhs <= rhs ? static_cast<double>(i + 1) / static_cast<double>(na)
                                   : static_cast<double>(j + 1) / static_cast<double>(nb);
    total += std::abs(a[i] - b[j]) * (next - u);
    u = next;
    if (lhs <= rhs) ++i;
    if (rhs <= lhs) ++j;
  }
  return total;
}

double silverman_bandwidth(const std::vector<double>& s) {
  if (s.empty()) throw ConfigError("bandwidth: empty sample");
  const double n = static_cast<double>(s.size());
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  const double sd = s.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  std::vector<double> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  auto q = [&](double p) {
    const double pos = p * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = q(0.75) - q(0.25);
  double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0)) spread = 1e-6 * std::max(1.0, std::abs(mean));
  return 0.9 * spread * std::pow(n, -0.2);
}

Eigen::VectorXd kde(const std::vector<double>& s, double h, const Eigen::VectorXd& at) {
  if (s.empty() || !(h > 0)) throw ConfigError("kde: need samples and a positive bandwidth");
  const double c = 1.0 / (static_cast<double>(s.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(at.size());
  for (double v : s) out.array() += (-0.5 * ((at.array() - v) / h).square()).exp();
  return c * out;
}

double trapezoid(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) total += 0.5 * (y(i) + y(i + 1)) * (x(i + 1) - x(i));
  return total;
}

TabulatedDrift::TabulatedDrift(EvalGrid grid, Eigen::MatrixXd values) : grid_(std::move(grid)), values_(std::move(values)) {
  grid_.validate();
  if (values_.rows() != grid_.size()) throw ConfigError("tabulated drift: one value row per grid point required");
}

TabulatedDrift TabulatedDrift::tabulate(const BatchDrift& drift, const EvalGrid& grid, int out_dim) {
  Eigen::MatrixXd v = drift(grid.flatten());
  if (v.cols() != out_dim) throw ConfigError("tabulated drift: unexpected output width");
  return TabulatedDrift(grid, std::move(v));
}

Eigen::MatrixXd TabulatedDrift::operator()(const Eigen::MatrixXd& X) const {
  const int d = grid_.dim();
  if (X.cols() != d) throw ConfigError("tabulated drift: query has the wrong dimension");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(X.rows(), values_.cols());
  std::vector<Eigen::Index> base(static_cast<std::size_t>(d));
  std::vector<double> frac(static_cast<std::size_t>(d));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (int j = 0; j < d; ++j) {
      const Eigen::Index p = grid_.points[static_cast<std::size_t>(j)];
      const double h = (grid_.hi(j) - grid_.lo(j)) / static_cast<double>(p - 1);
      const double u = std::clamp((X(r, j) - grid_.lo(j)) / h, 0.0, static_cast<double>(p - 1));
      const auto c = std::min(static_cast<Eigen::Index>(u), p - 2);
      base[static_cast<std::size_t>(j)] = c;
      frac[static_cast<std::size_t>(j)] = u - static_cast<double>(c);
    }
    for (unsigned corner = 0; corner < (1u << d); ++corner) {
      double w = 1.0;
      Eigen::Index flat = 0;
      for (int j = 0; j < d; ++j) {
        const bool up = (corner >> j) & 1u;
        const double f = frac[static_cast<std::size_t>(j)];
        w *= up ? f : 1.0 - f;
        flat = flat * grid_.points[static_cast<std::size_t>(j)] + base[static_cast<std::size_t>(j)] + (up ? 1 : 0);
      }
      if (w != 0.0) out.row(r) += w * values_.row(flat);
    }
  }
  return out;
}

std::vector<Eigen::MatrixXd> simulate_ensemble(const BatchDrift& drift, const Eigen::MatrixXd& sigma,
                                               const Eigen::VectorXd& x0, const std::vector<Eigen::Index>& at_steps,
                                               double dt, const std::vector<std::uint64_t>& seeds) {
  const int d = static_cast<int>(x0.size());
  check_diffusion(sigma, d, true);
  if (!(dt > 0)) throw ConfigError("dt must be > 0");
  const auto P = static_cast<Eigen::Index>(seeds.size());
  Eigen::Index last = 0;
  for (auto s : at_steps) {
    if (s < 0) throw ConfigError("ensemble: negative step index");
    last = std::max(last, s);
  }
  std::vector<Stream> rngs;
  rngs.reserve(seeds.size());
  for (auto s : seeds) rngs.emplace_back(s, "slow_noise");
  Eigen::MatrixXd X = x0.transpose().replicate(P, 1);
  Eigen::MatrixXd xi(P, d);
  std::vector<Eigen::MatrixXd> out(at_steps.size());
  const double sqdt = std::sqrt(dt);
  for (Eigen::Index m = 0;; ++m) {
    for (std::size_t k = 0; k < at_steps.size(); ++k)
      if (at_steps[k] == m) out[k] = X;
    if (m == last) break;
    const Eigen::MatrixXd b = drift(X);
    for (Eigen::Index p = 0; p < P; ++p)
      for (int j = 0; j < d; ++j) xi(p, j) = rngs[static_cast<std::size_t>(p)].normal();
    X += b * dt + sqdt * xi * sigma.transpose();
    if (!X.allFinite()) throw DivergenceError(static_cast<std::size_t>(m + 1));
  }
  return out;
}

LawComparison law_comparison_report(const BatchDrift& drift_true, const BatchDrift& drift_est,
                                    const Eigen::MatrixXd& sigma, const Eigen::VectorXd& x0,
                                    const std::vector<double>& times, Eigen::Index L_paths, double dt,
                                    std::uint64_t seed, int component, Eigen::Index kde_points) {
  if (L_paths < 1) throw ConfigError("law comparison: L_paths must be >= 1");
  if (times.empty()) throw ConfigError("law comparison: no time points");
  if (component < 0 || component >= x0.size()) throw ConfigError("law comparison: component out of range");
  std::vector<Eigen::Index> steps;
  for (double t : times) {
    if (!(t >= 0)) throw ConfigError("law comparison: times must be >= 0");
    steps.push_back(t == 0 ? 0 : step_count(t, dt));
  }
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(L_paths));
  for (std::size_t j = 0; j < seeds.size(); ++j) seeds[j] = derive_key(seed, "law_path", {j});
  const auto true_marginals = simulate_ensemble(drift_true, sigma, x0, steps, dt, seeds);
  const auto est_marginals = simulate_ensemble(drift_est, sigma, x0, steps, dt, seeds);

  LawComparison out;
  out.times = times;
  std::vector<std::vector<double>> a(times.size()), b(times.size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, hmax = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Eigen::VectorXd ca = true_marginals[k].col(component), cb = est_marginals[k].col(component);
    a[k].assign(ca.data(), ca.data() + ca.size());
    b[k].assign(cb.data(), cb.data() + cb.size());
    out.ks.push_back(ks_statistic(a[k], b[k]));
    out.w1.push_back(wasserstein_1d(a[k], b[k]));
    lo = std::min({lo, ca.minCoeff(), cb.minCoeff()});
    hi = std::max({hi, ca.maxCoeff(), cb.maxCoeff()});
    hmax = std::max({hmax, silverman_bandwidth(a[k]), silverman_bandwidth(b[k])});
  }
  out.kde_grid = Eigen::VectorXd::LinSpaced(kde_points, lo - 5 * hmax, hi + 5 * hmax);
  for (std::size_t k = 0; k < times.size(); ++k) {
    out.kde_true.push_back(kde(a[k], silverman_bandwidth(a[k]), out.kde_grid));
    out.kde_est.push_back(kde(b[k], silverman_bandwidth(b[k]), out.kde_grid));
  }
  return out;
}

}  // namespace avgflow
