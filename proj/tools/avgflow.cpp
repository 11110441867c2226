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

// Command-line experiment runner.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "avgflow/core/errors.hpp"
#include "avgflow/core/parallel.hpp"
#include "avgflow/exp/pipeline.hpp"
#include "avgflow/train/optim.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kNumeric = 3, kMissing = 4 };

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool identical = false;
  bool print_config = false;
};

int run(const std::string& command, const Options& o) {
  using namespace avgflow;
  std::optional<exp::Experiment> ex;
  try {
    exp::ExperimentConfig cfg = o.config.empty() ? exp::ExperimentConfig{} : exp::load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) set_thread_count(*o.threads);
    if (o.print_config) {
      cfg.validate();
      std::cout << exp::serialize_config(cfg);
      return kOk;
    }
    ex.emplace(cfg, o.out.empty() ? exp::timestamped_run_dir() : std::filesystem::path(o.out));
    ex->prepare();
    if (command == "simulate") ex->simulate();
    else if (command == "train-mle") ex->train("mle");
    else if (command == "train-vi") ex->train("vi");
    else if (command == "baseline") ex->train("baseline");
    else if (command == "evaluate") ex->evaluate();
    else if (command == "compare-laws") ex->compare_laws(o.identical);
    else if (command == "reproduce-table1") ex->reproduce_table1();
    else ex->run_all();
    ex->write_manifest("ok");
    std::cout << ex->dir().root.string() << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    if (ex) ex->write_manifest("error", e.what());
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    if (ex) ex->write_manifest("error", e.what());
    return kNumeric;
  } catch (const MissingArtifactError& e) {
    std::cerr << e.what() << " (run the upstream stage first)\n";
    if (ex) ex->write_manifest("error", e.what());
    return kMissing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (ex) ex->write_manifest("error", e.what());
    return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Averaged-drift inference for slow/fast SDEs"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON experiment config (defaults when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "artifact directory (default runs/<UTC timestamp>)");
    sub->add_option("--seed", o.seed, "master seed, overrides the config");
    sub->add_option("--threads", o.threads, "worker threads (default $AVGFLOW_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--print-config", o.print_config, "print the fully defaulted config and exit");
  };
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "simulate the slow/fast system and store the observations"},
      {"train-mle", "penalized maximum likelihood for the latent flow"},
      {"train-vi", "variational inference over the latent-flow parameters"},
      {"baseline", "unstructured neural-network drift by maximum likelihood"},
      {"evaluate", "grid MSE, drift bands and same-noise path comparison"},
      {"compare-laws", "finite-time law comparison (KS, W1, KDE)"},
      {"reproduce-table1", "MSE table over the configured (d, N, n) cells"},
      {"run", "simulate, train, evaluate and compare-laws in one go"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    common(sub);
    if (std::string(name) == "compare-laws")
      sub->add_flag("--identical", o.identical, "use the true drift for both systems");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfig;
  }
  return run(app.get_subcommands().front()->get_name(), o);
}
