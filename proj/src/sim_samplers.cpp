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

#include "avgflow/sim/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <type_traits>
#include <variant>

#include "avgflow/core/errors.hpp"
#include "avgflow/core/parallel.hpp"
#include "avgflow/core/rng.hpp"

namespace avgflow {

namespace {
constexpr Eigen::Index kChunk = 4096;

double von_mises_draw(double kappa, double mu, Stream& rng) {
  using std::numbers::pi;
  if (kappa < 1e-8) return wrap_angle(mu + pi * (2.0 * rng.uniform() - 1.0));
  // Best & Fisher (1979)
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  while (true) {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double u3 = rng.uniform();
    const double z = std::cos(pi * u1);
    const double f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double theta = (u3 > 0.5 ? 1.0 : -1.0) * std::acos(std::clamp(f, -1.0, 1.0));
      return wrap_angle(mu + theta);
    }
  }
}
}  // namespace

double wrap_angle(double theta) {
  using std::numbers::pi;
  double w = std::fmod(theta + pi, 2.0 * pi);
  if (w < 0) w += 2.0 * pi;
  w -= pi;
  return w >= pi ? -pi : w;
}

Eigen::MatrixXd sample_gibbs_solvent(const SolventParams& params, Eigen::Index count, std::uint64_t seed) {
  params.validate();
  if (count < 1) throw ConfigError("sample_gibbs_solvent: count must be >= 1");
  const int N = params.N;
  const int d = params.d;
  const double s_mean = 1.0 / std::sqrt(params.precision_mean());
  const double s_orth = 1.0 / std::sqrt(params.precision_orthogonal());
  Eigen::MatrixXd out(count, N * d);
  const auto chunks = static_cast<std::size_t>((count + kChunk - 1) / kChunk);
  parallel_for(chunks, [&](std::size_t c) {
    Stream rng(seed, "gibbs_solvent", {c});
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kChunk;
    const Eigen::Index end = std::min(count, begin + kChunk);
    Eigen::VectorXd xi(N);
    for (Eigen::Index s = begin; s < end; ++s) {
      for (int k = 0; k < d; ++k) {
        for (int i = 0; i < N; ++i) xi(i) = rng.normal();
        const double mean = xi.mean();
        for (int i = 0; i < N; ++i) out(s, i * d + k) = mean * s_mean + (xi(i) - mean) * s_orth;
      }
    }
  });
  if (!out.allFinite()) throw NumericError("sample_gibbs_solvent: internal invariant violated (non-finite sample)");
  return out;
}

Eigen::MatrixXd gibbs_covariance(const SolventParams& params) {
  params.validate();
  const int N = params.N;
  const int d = params.d;
  // Sigma = P1 / (gamma kappa) + (I - P1) / (gamma (kappa + a N)) per spatial coordinate.
  Eigen::MatrixXd P1 = Eigen::MatrixXd::Constant(N, N, 1.0 / N);
  Eigen::MatrixXd per = P1 / params.precision_mean() +
                        (Eigen::MatrixXd::Identity(N, N) - P1) / params.precision_orthogonal();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(N * d, N * d);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < d; ++k) cov(i * d + k, j * d + k) = per(i, j);
  return cov;
}

Eigen::MatrixXd sample_von_mises_fast(const Eigen::Vector4d& concentration, const Eigen::Vector4d& location,
                                      Eigen::Index count, std::uint64_t seed) {
  if ((concentration.array() < 0).any() || !concentration.allFinite())
    throw ConfigError("sample_von_mises_fast: concentrations must be finite and >= 0");
  if (count < 1) throw ConfigError("sample_von_mises_fast: count must be >= 1");
  Eigen::MatrixXd out(count, 4);
  const auto chunks = static_cast<std::size_t>((count + kChunk - 1) / kChunk);
  parallel_for(chunks, [&](std::size_t c) {
    Stream rng(seed, "von_mises", {c});
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kChunk;
    const Eigen::Index end = std::min(count, begin + kChunk);
    for (Eigen::Index s = begin; s < end; ++s)
      for (int j = 0; j < 4; ++j) out(s, j) = von_mises_draw(concentration(j), location(j), rng);
  });
  return out;
}

Eigen::MatrixXd sample_invariant(const FastDynamics& fast, Eigen::Index count, std::uint64_t seed) {
  return std::visit(
      [&](const auto& f) -> Eigen::MatrixXd {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, SolventLangevinFast>) {
          return sample_gibbs_solvent(f.params, count, seed);
        } else if constexpr (std::is_same_v<T, VonMisesLangevinFast>) {
          return sample_von_mises_fast(f.concentration, f.location, count, seed);
        } else {
          if (count < 1) throw ConfigError("sample_invariant: count must be >= 1");
          Stream rng(seed, "ou_invariant");
          return rng.normal_matrix(count, f.dim) * (f.alpha / std::sqrt(2.0 * f.rate));
        }
      },
      fast);
}

}  // namespace avgflow
