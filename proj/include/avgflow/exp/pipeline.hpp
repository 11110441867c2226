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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>

#include "avgflow/exp/config.hpp"
#include "avgflow/sim/trajectory.hpp"

namespace avgflow::exp {

inline constexpr const char* kVersion = "0.1.0";

/// Fixed artifact layout under one run directory:
///   config.snapshot  manifest  data/  checkpoints/  reports/
struct ArtifactDir {
  std::filesystem::path root;

  std::filesystem::path snapshot() const { return root / "config.snapshot"; }
  std::filesystem::path manifest() const { return root / "manifest"; }
  std::filesystem::path data(const std::string& f) const { return root / "data" / f; }
  std::filesystem::path checkpoint(const std::string& f) const { return root / "checkpoints" / f; }
  std::filesystem::path report(const std::string& f) const { return root / "reports" / f; }
  void create() const;
};

/// Every stream in a run is keyed on the master seed and a stage tag.
struct Seeds {
  std::uint64_t master;
  std::uint64_t stage(const char* tag) const;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// "runs/<UTC yyyymmdd-HHMMSS>" relative to the working directory.
std::filesystem::path timestamped_run_dir();

class Experiment {
 public:
  Experiment(ExperimentConfig cfg, std::filesystem::path out);

  const ExperimentConfig& config() const { return cfg_; }
  const ArtifactDir& dir() const { return dir_; }

  /// Writes config.snapshot; refuses a directory holding a different config.
  void prepare();

  void simulate();
  /// mode: mle | vi | baseline (defaults to config train.mode).
  void train(const std::string& mode = "");
  void evaluate();
  void compare_laws(bool identical_drifts = false);
  /// One simulate / train / evaluate pass per table1 cell into cells/<i>/,
  /// then reports/table1.csv with columns d,N,n,M0,mse.
  void reproduce_table1();
  /// simulate, train, evaluate, compare-laws.
  void run_all();

  /// Lists every file under data/, checkpoints/, reports/ (and cells/) with
  /// its SHA-256; status is "ok" or "error".
  void write_manifest(const std::string& status, const std::string& error = "") const;

 private:
  Trajectory observations() const;
  std::string mode(const std::string& requested) const;

  ExperimentConfig cfg_;
  ArtifactDir dir_;
  Seeds seeds_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace avgflow::exp
