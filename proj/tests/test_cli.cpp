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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "avgflow/core/csv.hpp"
#include "avgflow/core/errors.hpp"
#include "avgflow/core/parallel.hpp"
#include "avgflow/exp/pipeline.hpp"

using namespace avgflow;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Small but complete configuration: every stage runs in well under a second.
const char* kSmoke = R"({
  "model": {"kernel": "solvent", "d": 1, "N": 3, "n_scale": 100.0},
  "data": {"x0": [1.5], "horizon": 1.0, "dt": 1e-4, "delta": 0.01},
  "train": {
    "mode": "vi",
    "posterior_flow": {"layers": 2, "hidden": [8]},
    "optimizer": {"iterations": 3, "batch": 50},
    "K": 4, "L": 8, "param_batch": 2, "latent_batch": 4
  },
  "eval": {
    "oracle_samples": 20000,
    "bands": {"samples": 10, "latents": 50, "param_batch": 5, "latent_batch": 25},
    "drift_latents": 50,
    "paths": {"split_time": 1.0, "horizon": 2.0},
    "law": {"times": [0.5, 1.0], "paths": 200},
    "drift_table": {"points": 101}
  },
  "table1": [{"d": 1, "N": 3, "n": 100}, {"d": 1, "N": 2, "n": 200}],
  "seeds": {"master": 7}
})";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("avgflow_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

/// Relative path -> bytes for every artifact except the manifest (which records wall time).
std::map<std::string, std::string> artifacts(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "manifest")
      out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  return out;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(AVGFLOW_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string write_config(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("avgflow_test_cli_" + name + ".json");
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST_CASE("config round trip is a fixed point") {
  for (const std::string& text : {std::string("{}"), std::string(kSmoke)}) {
    const auto a = exp::parse_config(text);
    const std::string s1 = exp::serialize_config(a);
    const std::string s2 = exp::serialize_config(exp::parse_config(s1));
    CHECK(s1 == s2);
  }
}

TEST_CASE("the default config carries the training recipe") {
  const auto c = exp::parse_config("{}");
  CHECK(c.train.optimizer.learning_rate == 1e-3);
  CHECK(c.train.optimizer.clip == 5.0);
  CHECK(c.train.optimizer.iterations == 100);
  CHECK(c.train.optimizer.batch == 500);
  CHECK(c.train.K == 100);
  CHECK(c.train.L == 100);
  CHECK(c.train.param_batch == 20);
  CHECK(c.train.latent_batch == 25);
  CHECK(c.eval.band_samples == 500);
  CHECK(c.eval.band_latents == 1000);
  CHECK(c.model.sigma == 0.1);
  CHECK(c.model.zeta == 1.0);
  CHECK(c.data.delta == 0.01);
  CHECK(c.observation_count() == 500);
  // latent model dimension D = N d
  CHECK(exp::latent_flow_spec(c).dim == 10);
  CHECK(exp::latent_flow_spec(c).layers() == 2);
  CHECK(exp::posterior_config(c).layers == 6);
  CHECK(exp::posterior_config(c).hidden == std::vector<int>{256});
  CHECK(exp::eval_grid(c).size() == 200);
}

TEST_CASE("strict parsing with field-level diagnostics") {
  auto message = [](const std::string& text) {
    try {
      exp::parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"train": {"optimiser": {}}})").find("train.optimiser") != std::string::npos);
  CHECK(message(R"({"train": {"optimizer": {"learning_rate": "fast"}}})").find("train.optimizer.learning_rate") !=
        std::string::npos);
  CHECK(message(R"({"seeds": {"master": 1, "extra": 2}})").find("seeds.extra") != std::string::npos);
  CHECK(message("{not json").find("JSON") != std::string::npos);
  const std::string b = message(R"({"data": {"horizon": 1.0}})");
  CHECK(b.find("500") != std::string::npos);
  CHECK(b.find("100") != std::string::npos);
  CHECK(message(R"({"data": {"delta": 0.01, "dt": 3e-5}})").find("data.delta") != std::string::npos);
  CHECK(message(R"({"model": {"kernel": "quartic"}})").find("model.kernel") != std::string::npos);
  CHECK(message(R"({"model": {"n_scale": 1e5}})").find("data.dt") != std::string::npos);
  CHECK(message(R"({"model": {"d": 2}, "data": {"x0": [1.0]}})").find("data.x0") != std::string::npos);
}

TEST_CASE("sha256 of a known vector") {
  CHECK(exp::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("stages compose to the full run, byte for byte, and runs repeat exactly") {
  const auto cfg = exp::parse_config(kSmoke);
  const fs::path full = scratch("full"), again = scratch("again"), staged = scratch("staged");
  for (const auto& dir : {full, again}) {
    exp::Experiment ex(cfg, dir);
    ex.prepare();
    ex.run_all();
    ex.write_manifest("ok");
  }
  {
    exp::Experiment ex(cfg, staged);
    ex.prepare();
    ex.simulate();
    ex.write_manifest("ok");
    exp::Experiment ex2(cfg, staged);
    ex2.prepare();
    ex2.train("vi");
    ex2.evaluate();
    ex2.compare_laws(false);
    ex2.write_manifest("ok");
  }
  const auto a = artifacts(full);
  CHECK(a.size() >= 14);
  CHECK(a == artifacts(again));
  CHECK(a == artifacts(staged));

  const auto ma = nlohmann::json::parse(read_file(full / "manifest"));
  const auto mb = nlohmann::json::parse(read_file(staged / "manifest"));
  CHECK(ma["files"] == mb["files"]);
  CHECK(ma["seeds"] == mb["seeds"]);
  CHECK(ma["status"] == "ok");
  // manifest completeness: every numeric output is listed with its hash
  for (const auto& [rel, bytes] : a) {
    if (rel == "config.snapshot") continue;
    REQUIRE(ma["files"].contains(rel));
    CHECK(ma["files"][rel] == exp::sha256_hex(bytes));
  }
  CHECK(ma["config_sha256"] == exp::sha256_hex(read_file(full / "config.snapshot")));
}

TEST_CASE("artifacts do not depend on the thread count") {
  const auto cfg = exp::parse_config(kSmoke);
  const std::size_t before = thread_count();
  std::vector<std::map<std::string, std::string>> out;
  for (std::size_t threads : {1, 3}) {
    set_thread_count(threads);
    const fs::path dir = scratch("threads" + std::to_string(threads));
    exp::Experiment ex(cfg, dir);
    ex.prepare();
    ex.run_all();
    out.push_back(artifacts(dir));
  }
  set_thread_count(before);
  CHECK(out[0] == out[1]);
}

TEST_CASE("compare-laws with identical drifts reports zeros") {
  const fs::path dir = scratch("identical");
  exp::Experiment ex(exp::parse_config(kSmoke), dir);
  ex.prepare();
  ex.simulate();
  ex.compare_laws(true);
  const auto t = csv::read(dir / "reports" / "law_comparison_identical.csv");
  CHECK(t.header == std::vector<std::string>{"t", "ks", "w1"});
  CHECK(t.rows.rows() == 2);
  CHECK(t.rows.col(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.rows.col(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("missing upstream artifacts are named") {
  const fs::path dir = scratch("missing");
  exp::Experiment ex(exp::parse_config(kSmoke), dir);
  ex.prepare();
  try {
    ex.evaluate();
    FAIL("expected a missing artifact");
  } catch (const MissingArtifactError& e) {
    CHECK(e.path().find("observations.csv") != std::string::npos);
  }
  ex.simulate();
  try {
    ex.evaluate();
    FAIL("expected a missing artifact");
  } catch (const MissingArtifactError& e) {
    CHECK(e.path().find("posterior.ckpt") != std::string::npos);
  }
}

TEST_CASE("a directory holding another configuration is refused") {
  const fs::path dir = scratch("clash");
  auto cfg = exp::parse_config(kSmoke);
  exp::Experiment(cfg, dir).prepare();
  cfg.seed = 8;
  CHECK_THROWS_AS(exp::Experiment(cfg, dir).prepare(), ConfigError);
}

TEST_CASE("reproduce-table1 writes the five-column layout") {
  const fs::path dir = scratch("table1");
  exp::Experiment ex(exp::parse_config(kSmoke), dir);
  ex.prepare();
  ex.reproduce_table1();
  const auto t = csv::read(dir / "reports" / "table1.csv");
  CHECK(t.header == std::vector<std::string>{"d", "N", "n", "M0", "mse"});
  REQUIRE(t.rows.rows() == 2);
  CHECK(t.rows(0, 1) == 3);
  CHECK(t.rows(1, 1) == 2);
  CHECK(t.rows(1, 2) == 200);
  CHECK(t.rows(0, 3) == 100);
  CHECK(t.rows.col(4).minCoeff() >= 0);
}

TEST_CASE("command line exit codes") {
  const std::string smoke = write_config("smoke", kSmoke);
  const fs::path out = scratch("exit");
  CHECK(cli("simulate --config " + smoke + " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "data" / "observations.csv"));
  CHECK(cli("train-vi --config " + smoke + " --out " + out.string() + " --threads 2") == 0);
  CHECK(cli("compare-laws --identical --config " + smoke + " --out " + out.string()) == 0);

  const std::string bad = write_config("bad", R"({"train": {"optimizer": {"batch": 10000}}})");
  CHECK(cli("run --config " + bad + " --out " + scratch("bad").string()) == 2);
  CHECK(cli("run --config " + smoke + " --out " + out.string() + " --seed 99") == 2);  // different config, same dir
  CHECK(cli("frobnicate") == 2);

  const fs::path empty = scratch("empty");
  CHECK(cli("evaluate --config " + smoke + " --out " + empty.string()) == 4);
  const auto man = nlohmann::json::parse(read_file(empty / "manifest"));
  CHECK(man["status"] == "error");

  const std::string blowup = write_config("blowup", R"j({
    "model": {"kernel": "custom", "custom": {"components": ["(mul x0 (mul x0 x0))"], "fast_dim": 1}, "n_scale": 10.0},
    "data": {"x0": [1e120], "horizon": 1.0, "dt": 0.01, "delta": 0.01},
    "train": {"optimizer": {"batch": 50}}
  })j");
  CHECK(cli("simulate --config " + blowup + " --out " + scratch("blowup").string()) == 3);
}
