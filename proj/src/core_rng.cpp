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

#include "avgflow/core/rng.hpp"

namespace avgflow {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, std::string_view tag, std::initializer_list<std::uint64_t> indices) {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ fnv1a(tag));
  for (auto i : indices) k = splitmix64(k ^ splitmix64(i + 0x632be59bd9b4e019ULL));
  return k;
}

Stream::Stream(std::uint64_t seed, std::string_view tag, std::initializer_list<std::uint64_t> indices)
    : key_(derive_key(seed, tag, indices)) {}

Stream Stream::child(std::string_view tag, std::initializer_list<std::uint64_t> indices) const {
  return Stream(derive_key(key_, tag, indices));
}

Stream::result_type Stream::operator()() { return splitmix64(key_ + kGolden * (++counter_)); }

double Stream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double Stream::normal() { return normal_(*this); }

Eigen::MatrixXd Stream::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal();
  return out;
}

}  // namespace avgflow
