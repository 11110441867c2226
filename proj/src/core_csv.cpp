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

#include "avgflow/core/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "avgflow/core/errors.hpp"

namespace avgflow::csv {

std::string format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write(const std::filesystem::path& path, const std::vector<std::string>& header, const Eigen::MatrixXd& rows) {
  if (!header.empty() && static_cast<Eigen::Index>(header.size()) != rows.cols())
    throw ConfigError("csv header has " + std::to_string(header.size()) + " columns but data has " +
                      std::to_string(rows.cols()));
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out += ',';
    out += header[j];
  }
  out += '\n';
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      if (j) out += ',';
      out += format(rows(i, j));
    }
    out += '\n';
  }
  write_text_atomic(path, out);
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) return t;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  std::vector<std::vector<double>> data;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != t.header.size())
      throw ConfigError(path.string() + ": row width " + std::to_string(row.size()) + " does not match header");
    data.push_back(std::move(row));
  }
  t.rows.resize(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < data[i].size(); ++j) t.rows(i, j) = data[i][j];
  return t;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace avgflow::csv
