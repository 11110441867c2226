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

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace avgflow::csv {

/// %.17g: lossless for IEEE doubles.
std::string format(double v);

struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd rows;
};

void write(const std::filesystem::path& path, const std::vector<std::string>& header, const Eigen::MatrixXd& rows);
Table read(const std::filesystem::path& path);

/// Temp file + rename so readers never observe a half-written file.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace avgflow::csv
