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

#include "avgflow/sim/simulate.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "avgflow/core/errors.hpp"
#include "avgflow/core/parallel.hpp"
#include "avgflow/core/rng.hpp"
#include "avgflow/sim/samplers.hpp"

namespace avgflow {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr Eigen::Index kOracleChunk = 8192;

// beta(y) written into out; returns the constant diffusion scale alpha.
double fast_drift(const FastDynamics& f, const Eigen::VectorXd& y, Eigen::VectorXd& out) {
  return std::visit(overloaded{
                        [&](const OrnsteinUhlenbeckFast& o) {
                          out = -o.rate * y;
                          return o.alpha;
                        },
                        [&](const SolventLangevinFast& s) {
                          const auto& p = s.params;
                          const double diag = p.a * p.N + p.kappa;
                          for (int k = 0; k < p.d; ++k) {
                            double total = 0.0;
                            for (int i = 0; i < p.N; ++i) total += y(i * p.d + k);
                            for (int i = 0; i < p.N; ++i)
                              out(i * p.d + k) = -p.gamma * (diag * y(i * p.d + k) - p.a * total);
                          }
                          return std::numbers::sqrt2;
                        },
                        [&](const VonMisesLangevinFast& v) {
                          for (int j = 0; j < 4; ++j) out(j) = -v.concentration(j) * std::sin(y(j) - v.location(j));
                          return std::numbers::sqrt2;
                        },
                    },
                    f);
}

bool wraps(const FastDynamics& f) { return std::holds_alternative<VonMisesLangevinFast>(f); }

Eigen::MatrixXd noise_row(Stream& rng, int d) {
  Eigen::MatrixXd r(1, d);
  for (int j = 0; j < d; ++j) r(0, j) = rng.normal();
  return r;
}

}  // namespace

Eigen::Index step_count(double horizon, double dt) {
  if (!(dt > 0)) throw ConfigError("dt must be > 0");
  if (!(horizon > 0)) throw ConfigError("horizon must be > 0");
  const double ratio = horizon / dt;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-6 * std::max(1.0, ratio))
    throw ConfigError("horizon " + std::to_string(horizon) + " is not an integer multiple of dt " + std::to_string(dt));
  return static_cast<Eigen::Index>(steps);
}

std::pair<Trajectory, Trajectory> simulate_multiscale(const MultiscaleModel& model, const Eigen::VectorXd& x0,
                                                      const Eigen::VectorXd& y0, double horizon, double dt,
                                                      std::uint64_t seed, Eigen::Index stride) {
  model.validate();
  const int d = model.dim();
  const int df = model.fast_dim();
  if (x0.size() != d || y0.size() != df) throw ConfigError("simulate_multiscale: initial state has wrong dimension");
  if (dt * model.n_scale > kFastStabilityLimit)
    throw ConfigError("simulate_multiscale: dt * n_scale = " + std::to_string(dt * model.n_scale) + " exceeds " +
                      std::to_string(kFastStabilityLimit));
  if (stride < 1) throw ConfigError("simulate_multiscale: stride must be >= 1");
  const Eigen::Index steps = step_count(horizon, dt);
  const Eigen::Index stored = steps / stride + 1;

  Stream slow_rng(seed, "slow_noise");
  Stream fast_rng(seed, "fast_noise");
  const double sqdt = std::sqrt(dt);
  const double n = model.n_scale;
  const double sqn = std::sqrt(n);

  Trajectory slow, fast;
  slow.times.resize(stored);
  slow.states.resize(stored, d);
  fast.times.resize(stored);
  fast.states.resize(stored, df);

  Eigen::VectorXd x = x0, y = y0, beta(df);
  Eigen::MatrixXd X(1, d), Y(1, df), b(1, d);
  for (Eigen::Index m = 0; m <= steps; ++m) {
    if (m % stride == 0) {
      const Eigen::Index r = m / stride;
      slow.times(r) = static_cast<double>(m) * dt;
      fast.times(r) = static_cast<double>(m) * dt;
      slow.states.row(r) = x.transpose();
      fast.states.row(r) = y.transpose();
    }
    if (m == steps) break;
    X.row(0) = x.transpose();
    Y.row(0) = y.transpose();
    b.setZero();
    model.kernel.accumulate(X, Y, b);
    const double alpha = fast_drift(model.fast, y, beta);
    const Eigen::VectorXd xi = noise_row(slow_rng, d).transpose();
    const Eigen::VectorXd eta = noise_row(fast_rng, df).transpose();
    x += b.row(0).transpose() * dt + model.sigma * (sqdt * xi);
    y += n * beta * dt + sqn * alpha * sqdt * eta;
    if (wraps(model.fast))
      for (int j = 0; j < df; ++j) y(j) = wrap_angle(y(j));
    if (!x.allFinite() || !y.allFinite()) throw DivergenceError(static_cast<std::size_t>(m + 1));
  }
  return {std::move(slow), std::move(fast)};
}

Trajectory simulate_reduced(const BatchDrift& drift, const Eigen::MatrixXd& sigma, const Eigen::VectorXd& x0,
                            double horizon, double dt, std::uint64_t seed, Eigen::Index stride) {
  const int d = static_cast<int>(x0.size());
  check_diffusion(sigma, d, true);
  if (stride < 1) throw ConfigError("simulate_reduced: stride must be >= 1");
  const Eigen::Index steps = step_count(horizon, dt);
  const Eigen::Index stored = steps / stride + 1;
  Stream slow_rng(seed, "slow_noise");
  const double sqdt = std::sqrt(dt);
  Trajectory out;
  out.times.resize(stored);
  out.states.resize(stored, d);
  Eigen::MatrixXd X(1, d);
  X.row(0) = x0.transpose();
  for (Eigen::Index m = 0; m <= steps; ++m) {
    if (m % stride == 0) {
      out.times(m / stride) = static_cast<double>(m) * dt;
      out.states.row(m / stride) = X.row(0);
    }
    if (m == steps) break;
    const Eigen::MatrixXd b = drift(X);
    const Eigen::VectorXd xi = noise_row(slow_rng, d).transpose();
    X.row(0) += b.row(0) * dt + (sigma * (sqdt * xi)).transpose();
    if (!X.allFinite()) throw DivergenceError(static_cast<std::size_t>(m + 1));
  }
  return out;
}

Eigen::MatrixXd slow_noise_increments(std::uint64_t seed, Eigen::Index steps, int d, double dt) {
  Stream slow_rng(seed, "slow_noise");
  Eigen::MatrixXd out(steps, d);
  const double sqdt = std::sqrt(dt);
  for (Eigen::Index m = 0; m < steps; ++m) out.row(m) = sqdt * noise_row(slow_rng, d);
  return out;
}

Eigen::MatrixXd averaged_drift_oracle_batch(const DriftKernel& kernel, const Eigen::MatrixXd& X,
                                            const Eigen::MatrixXd& samples) {
  if (samples.rows() < 1) throw ConfigError("averaged_drift_oracle: no invariant samples");
  if (samples.cols() != kernel.fast_dim() || X.cols() != kernel.dim())
    throw ConfigError("averaged_drift_oracle: dimension mismatch with kernel");
  if (!samples.allFinite()) throw ConfigError("averaged_drift_oracle: non-finite invariant sample");
  const Eigen::Index S = samples.rows();
  const auto chunks = static_cast<std::size_t>((S + kOracleChunk - 1) / kOracleChunk);
  std::vector<Eigen::MatrixXd> partial(chunks);
  parallel_for(chunks, [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kOracleChunk;
    const Eigen::Index len = std::min(S, begin + kOracleChunk) - begin;
    partial[c] = Eigen::MatrixXd::Zero(X.rows(), X.cols());
    kernel.accumulate(X, samples.middleRows(begin, len), partial[c]);
  });
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  for (const auto& p : partial) total += p;
  if (!total.allFinite()) {
    for (Eigen::Index l = 0; l < S; ++l) {
      Eigen::MatrixXd one = Eigen::MatrixXd::Zero(X.rows(), X.cols());
      kernel.accumulate(X, samples.middleRows(l, 1), one);
      if (!one.allFinite()) throw NumericError("averaged_drift_oracle: non-finite kernel value at sample " + std::to_string(l));
    }
  }
  return total / static_cast<double>(S);
}

Eigen::VectorXd averaged_drift_oracle(const DriftKernel& kernel, const Eigen::VectorXd& x,
                                      const Eigen::MatrixXd& samples) {
  return averaged_drift_oracle_batch(kernel, x.transpose(), samples).row(0).transpose();
}

double empirical_time_average(const Trajectory& fast, const std::function<double(const Eigen::VectorXd&)>& f) {
  if (fast.size() < 1) throw ConfigError("empirical_time_average: empty trajectory");
  if (fast.size() == 1) return f(fast.states.row(0).transpose());
  // uniform spacing: (1/T) sum_m f(Y_m) h = (1/M) sum_m f(Y_m)
  double acc = 0.0;
  for (Eigen::Index m = 0; m + 1 < fast.size(); ++m) acc += f(fast.states.row(m).transpose());
  return acc / static_cast<double>(fast.size() - 1);
}

}  // namespace avgflow
