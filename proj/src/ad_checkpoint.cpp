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

#include "avgflow/ad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "avgflow/core/csv.hpp"
#include "avgflow/core/errors.hpp"

namespace avgflow::ad {

namespace {

constexpr char kMagic[8] = {'A', 'V', 'G', 'F', 'L', 'O', 'W', '\0'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string name) : buf_(std::move(data)), name_(std::move(name)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(get(4))); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  void raw(char* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > buf_.size()) throw ConfigError(name_ + ": truncated checkpoint");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::int32_t activation_tag(Activation a) { return static_cast<std::int32_t>(a); }

Activation activation_from_tag(std::int32_t t, const std::string& name) {
  if (t < 0 || t > 2) throw ConfigError(name + ": bad activation tag");
  return static_cast<Activation>(t);
}

void write_ints(Writer& w, const std::vector<int>& v) {
  w.i32(static_cast<std::int32_t>(v.size()));
  for (int x : v) w.i32(x);
}

std::vector<int> read_ints(Reader& r, const std::string& name) {
  const std::int32_t n = r.i32();
  if (n < 0 || n > (1 << 24)) throw ConfigError(name + ": bad length in descriptor");
  std::vector<int> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = r.i32();
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  Eigen::Index expected = 0;
  if (const auto* flow = std::get_if<CouplingFlowSpec>(&ckpt.spec)) {
    flow->validate();
    w.u32(0);
    w.i32(flow->dim);
    w.i32(flow->layers());
    write_ints(w, flow->hidden);
    w.i32(activation_tag(flow->activation));
    w.f64(flow->scale_clamp);
    for (const auto& m : flow->masks) {
      write_ints(w, m.conditioner);
      write_ints(w, m.transformed);
    }
    expected = flow->param_count();
  } else {
    const auto& mlp = std::get<MlpSpec>(ckpt.spec);
    mlp.validate();
    w.u32(1);
    write_ints(w, mlp.widths);
    w.i32(activation_tag(mlp.activation));
    expected = mlp.param_count();
  }
  if (ckpt.params.size() != expected)
    throw ConfigError("save_checkpoint: " + std::to_string(ckpt.params.size()) + " parameters, descriptor needs " +
                      std::to_string(expected));
  w.u64(static_cast<std::uint64_t>(ckpt.params.size()));
  for (Eigen::Index i = 0; i < ckpt.params.size(); ++i) w.f64(ckpt.params(i));
  csv::write_text_atomic(path, w.bytes());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  Reader r(std::move(data), name);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw ConfigError(name + ": not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw ConfigError(name + ": unsupported checkpoint version " + std::to_string(version));
  const auto kind = r.u32();
  Checkpoint ckpt;
  Eigen::Index expected = 0;
  if (kind == 0) {
    CouplingFlowSpec flow;
    flow.dim = r.i32();
    const int layers = r.i32();
    flow.hidden = read_ints(r, name);
    flow.activation = activation_from_tag(r.i32(), name);
    flow.scale_clamp = r.f64();
    for (int k = 0; k < layers; ++k) {
      CouplingMask m;
      m.conditioner = read_ints(r, name);
      m.transformed = read_ints(r, name);
      flow.masks.push_back(std::move(m));
    }
    flow.validate();
    expected = flow.param_count();
    ckpt.spec = std::move(flow);
  } else if (kind == 1) {
    MlpSpec mlp;
    mlp.widths = read_ints(r, name);
    mlp.activation = activation_from_tag(r.i32(), name);
    mlp.validate();
    expected = mlp.param_count();
    ckpt.spec = std::move(mlp);
  } else {
    throw ConfigError(name + ": unknown checkpoint kind " + std::to_string(kind));
  }
  const auto count = r.u64();
  if (static_cast<Eigen::Index>(count) != expected) throw ConfigError(name + ": parameter count does not match descriptor");
  ckpt.params.resize(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < ckpt.params.size(); ++i) ckpt.params(i) = r.f64();
  if (!r.done()) throw ConfigError(name + ": trailing bytes after parameters");
  return ckpt;
}

void export_params_text(const std::filesystem::path& path, const Eigen::VectorXd& params) {
  std::string out;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    out += csv::format(params(i));
    out += '\n';
  }
  csv::write_text_atomic(path, out);
}

Eigen::VectorXd import_params_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string());
  std::vector<double> v;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) v.push_back(std::stod(line));
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace avgflow::ad
