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

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace avgflow {

/// Counter-based random stream.
///
/// A stream is identified by a 64-bit key derived from (seed, tag, indices).
/// The i-th raw draw is a SplitMix64 finalisation of key + i * golden, so
/// streams are cheap to create, never share state, and child streams can be
/// derived in any order without changing results.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t seed, std::string_view tag, std::initializer_list<std::uint64_t> indices = {});

  /// Child stream keyed on this stream's key.
  Stream child(std::string_view tag, std::initializer_list<std::uint64_t> indices = {}) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();

  /// rows x cols matrix of standard normals, filled row by row.
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  std::uint64_t key() const { return key_; }

 private:
  explicit Stream(std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_key(std::uint64_t seed, std::string_view tag, std::initializer_list<std::uint64_t> indices);

}  // namespace avgflow
