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

#include "avgflow/exp/pipeline.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "avgflow/ad/checkpoint.hpp"
#include "avgflow/core/csv.hpp"
#include "avgflow/core/errors.hpp"
#include "avgflow/core/rng.hpp"
#include "avgflow/eval/metrics.hpp"
#include "avgflow/sim/samplers.hpp"
#include "avgflow/sim/simulate.hpp"
#include "avgflow/train/mle.hpp"
#include "avgflow/vi/variational.hpp"

namespace avgflow::exp {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void ArtifactDir::create() const {
  for (const char* sub : {"data", "checkpoints", "reports"}) fs::create_directories(root / sub);
}

std::uint64_t Seeds::stage(const char* tag) const { return derive_key(master, tag, {}); }

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

fs::path timestamped_run_dir() {
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &utc);
  return fs::path("runs") / buf;
}

namespace {

std::vector<std::string> column_names(const std::string& prefix, Eigen::Index d) {
  std::vector<std::string> out;
  for (Eigen::Index j = 0; j < d; ++j) out.push_back(prefix + std::to_string(j));
  return out;
}

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Eigen::MatrixXd hcat(std::initializer_list<const Eigen::MatrixXd*> parts) {
  Eigen::Index cols = 0, rows = (*parts.begin())->rows();
  for (const auto* p : parts) cols += p->cols();
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index c = 0;
  for (const auto* p : parts) {
    out.middleCols(c, p->cols()) = *p;
    c += p->cols();
  }
  return out;
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifactError(p.string());
}

/// Grid for the drift tables: the evaluation grid widened by the margin.
EvalGrid table_grid(const ExperimentConfig& cfg) {
  EvalGrid g = eval_grid(cfg);
  g.lo.array() -= cfg.eval.table_margin;
  g.hi.array() += cfg.eval.table_margin;
  for (auto& p : g.points) p = cfg.eval.table_points;
  return g;
}

}  // namespace

Experiment::Experiment(ExperimentConfig cfg, fs::path out)
    : cfg_(std::move(cfg)), dir_{std::move(out)}, seeds_{cfg_.seed}, start_(std::chrono::steady_clock::now()) {
  cfg_.validate();
}

void Experiment::prepare() {
  const std::string text = serialize_config(cfg_);
  if (fs::exists(dir_.snapshot())) {
    std::ifstream in(dir_.snapshot());
    std::stringstream ss;
    ss << in.rdbuf();
    if (ss.str() != text)
      throw ConfigError("artifact directory " + dir_.root.string() +
                        " holds a run with a different configuration; choose another --out");
    dir_.create();
    return;
  }
  dir_.create();
  csv::write_text_atomic(dir_.snapshot(), text);
}

std::string Experiment::mode(const std::string& requested) const {
  const std::string m = requested.empty() ? cfg_.train.mode : requested;
  if (m != "mle" && m != "vi" && m != "baseline") throw ConfigError("train.mode: unknown mode '" + m + "'");
  return m;
}

Trajectory Experiment::observations() const {
  const auto p = dir_.data("observations.csv");
  require_file(p);
  return read_trajectory_csv(p);
}

void Experiment::simulate() {
  const auto model = build_model(cfg_.model);
  const Eigen::VectorXd x0 =
      Eigen::Map<const Eigen::VectorXd>(cfg_.data.x0.data(), static_cast<Eigen::Index>(cfg_.data.x0.size()));
  Eigen::VectorXd y0;
  if (cfg_.data.y0.empty())
    y0 = sample_invariant(model.fast, 1, seeds_.stage("y0")).row(0).transpose();
  else
    y0 = Eigen::Map<const Eigen::VectorXd>(cfg_.data.y0.data(), static_cast<Eigen::Index>(cfg_.data.y0.size()));
  auto [slow, fast] = simulate_multiscale(model, x0, y0, cfg_.data.horizon, cfg_.data.dt, seeds_.stage("simulate"),
                                          cfg_.observation_stride());
  write_trajectory_csv(dir_.data("observations.csv"), slow);
  write_trajectory_csv(dir_.data("fast_observations.csv"), fast);
}

void Experiment::train(const std::string& requested) {
  const std::string m = mode(requested);
  const auto model = build_model(cfg_.model);
  const Trajectory traj = observations();
  OptimizerConfig opt = cfg_.train.optimizer;
  opt.seed = seeds_.stage("train");
  opt.validate(traj.transitions());

  if (m == "vi") {
    const auto latent = latent_flow_spec(cfg_);
    const auto pc = posterior_config(cfg_);
    const auto init = init_variational(latent, pc, seeds_.stage("init"));
    try {
      const auto r = run_vi(model.kernel, init, traj, model.sigma, pc, opt);
      ad::save_checkpoint(dir_.checkpoint("posterior.ckpt"), {r.state.posterior, r.state.vartheta});
      csv::write(dir_.report("elbo_history.csv"), kElboHistoryHeader, r.history);
    } catch (const TrainingDivergence& e) {
      ad::save_checkpoint(dir_.checkpoint("posterior.partial.ckpt"), {init.posterior, e.last_finite_params()});
      throw;
    }
  } else if (m == "mle") {
    const auto flow = latent_flow_spec(cfg_);
    try {
      const auto r = fit_penalized_mle(model.kernel, flow, traj, model.sigma, cfg_.train.penalty, cfg_.train.L, opt);
      ad::save_checkpoint(dir_.checkpoint("latent_flow.ckpt"), {flow, r.params});
      csv::write(dir_.report("loss_history.csv"), kLossHistoryHeader, r.history);
    } catch (const TrainingDivergence& e) {
      ad::save_checkpoint(dir_.checkpoint("latent_flow.partial.ckpt"), {flow, e.last_finite_params()});
      throw;
    }
  } else {
    const auto spec = baseline_spec(cfg_);
    try {
      const auto r = fit_unstructured_baseline(spec, traj, model.sigma, opt);
      ad::save_checkpoint(dir_.checkpoint("baseline.ckpt"), {spec, r.params});
      csv::write(dir_.report("baseline_loss_history.csv"), kLossHistoryHeader, r.history);
    } catch (const TrainingDivergence& e) {
      ad::save_checkpoint(dir_.checkpoint("baseline.partial.ckpt"), {spec, e.last_finite_params()});
      throw;
    }
  }
}

namespace {

struct Estimator {
  std::string mode;
  BatchDrift drift;
  std::optional<VariationalState> vi;
};

Estimator load_estimator(const ExperimentConfig& cfg, const ArtifactDir& dir, const Seeds& seeds,
                         const std::string& m) {
  const auto model = build_model(cfg.model);
  Estimator est{m, {}, std::nullopt};
  if (m == "vi") {
    const auto p = dir.checkpoint("posterior.ckpt");
    require_file(p);
    const auto ck = ad::load_checkpoint(p);
    const auto* post = std::get_if<ad::CouplingFlowSpec>(&ck.spec);
    const auto latent = latent_flow_spec(cfg);
    if (!post || post->dim != latent.param_count())
      throw ConfigError(p.string() + " does not match the configured latent flow");
    est.vi = VariationalState{latent, *post, ck.params, cfg.train.prior_scale};
    const VariationalState state = *est.vi;
    const DriftKernel kernel = model.kernel;
    const auto& e = cfg.eval;
    const std::uint64_t seed = seeds.stage("bands");
    est.drift = [=](const Eigen::MatrixXd& X) {
      return posterior_drift_bands(state, kernel, X, e.band_samples, e.band_latents, seed, e.q_lo, e.q_hi,
                                   e.band_param_batch, e.band_latent_batch)
          .mean;
    };
  } else if (m == "mle") {
    const auto p = dir.checkpoint("latent_flow.ckpt");
    require_file(p);
    const auto ck = ad::load_checkpoint(p);
    const auto* flow = std::get_if<ad::CouplingFlowSpec>(&ck.spec);
    if (!flow || flow->dim != model.kernel.fast_dim()) throw ConfigError(p.string() + " is not a latent flow checkpoint");
    const ad::CouplingFlowSpec f = *flow;
    const Eigen::VectorXd params = ck.params;
    const DriftKernel kernel = model.kernel;
    const Eigen::Index L = cfg.eval.drift_latents;
    const std::uint64_t seed = seeds.stage("eval_drift");
    est.drift = [=](const Eigen::MatrixXd& X) { return mc_drift(kernel, f, params, X, L, seed); };
  } else {
    const auto p = dir.checkpoint("baseline.ckpt");
    require_file(p);
    const auto ck = ad::load_checkpoint(p);
    const auto* mlp = std::get_if<ad::MlpSpec>(&ck.spec);
    if (!mlp) throw ConfigError(p.string() + " is not a baseline checkpoint");
    const ad::MlpSpec spec = *mlp;
    const Eigen::VectorXd params = ck.params;
    est.drift = [=](const Eigen::MatrixXd& X) -> Eigen::MatrixXd { return ad::mlp_apply(spec, params, X); };
  }
  return est;
}

BatchDrift oracle_drift(const ExperimentConfig& cfg, const Seeds& seeds) {
  const auto model = build_model(cfg.model);
  auto samples = std::make_shared<Eigen::MatrixXd>(
      sample_invariant(model.fast, cfg.eval.oracle_samples, seeds.stage("oracle")));
  const DriftKernel kernel = model.kernel;
  return [=](const Eigen::MatrixXd& X) { return averaged_drift_oracle_batch(kernel, X, *samples); };
}

/// Oracle and estimate tabulated on the widened grid; cached in reports/drift_table.csv.
std::pair<TabulatedDrift, TabulatedDrift> drift_tables(const ExperimentConfig& cfg, const ArtifactDir& dir,
                                                       const Seeds& seeds, const std::string& m) {
  const auto grid = table_grid(cfg);
  const int d = cfg.model.d;
  const auto path = dir.report("drift_table.csv");
  if (fs::exists(path)) {
    const auto t = csv::read(path);
    if (t.rows.rows() == grid.size() && t.rows.cols() == 3 * d)
      return {TabulatedDrift(grid, t.rows.middleCols(d, d)), TabulatedDrift(grid, t.rows.middleCols(2 * d, d))};
  }
  const Eigen::MatrixXd X = grid.flatten();
  const Eigen::MatrixXd o = oracle_drift(cfg, seeds)(X);
  const Eigen::MatrixXd e = load_estimator(cfg, dir, seeds, m).drift(X);
  csv::write(path, concat({column_names("x_", d), column_names("oracle_", d), column_names("estimate_", d)}),
             hcat({&X, &o, &e}));
  return {TabulatedDrift(grid, o), TabulatedDrift(grid, e)};
}

BatchDrift as_batch(const TabulatedDrift& t) {
  return [t](const Eigen::MatrixXd& X) { return t(X); };
}

}  // namespace

void Experiment::evaluate() {
  const std::string m = mode("");
  const auto model = build_model(cfg_.model);
  const Trajectory traj = observations();
  const int d = cfg_.model.d;
  const auto grid = eval_grid(cfg_);
  const Eigen::MatrixXd X = grid.flatten();
  const Eigen::MatrixXd oracle = oracle_drift(cfg_, seeds_)(X);

  const Estimator est = load_estimator(cfg_, dir_, seeds_, m);
  Eigen::MatrixXd estimate;
  if (est.vi) {
    const auto& e = cfg_.eval;
    const auto bands = posterior_drift_bands(*est.vi, model.kernel, X, e.band_samples, e.band_latents,
                                             seeds_.stage("bands"), e.q_lo, e.q_hi, e.band_param_batch,
                                             e.band_latent_batch);
    estimate = bands.mean;
    csv::write(dir_.report("drift_bands.csv"),
               concat({column_names("x_", d), column_names("mean_", d), column_names("q05_", d), column_names("q95_", d)}),
               hcat({&X, &bands.mean, &bands.lower, &bands.upper}));
  } else {
    estimate = est.drift(X);
  }
  csv::write(dir_.report("drift_grid.csv"),
             concat({column_names("x_", d), column_names("oracle_", d), column_names("estimate_", d)}),
             hcat({&X, &oracle, &estimate}));
  const double mse = mse_of_values(estimate, oracle);
  Eigen::MatrixXd row(1, 5);
  row << d, cfg_.model.N, cfg_.model.n_scale, static_cast<double>(traj.transitions()), mse;
  csv::write(dir_.report("mse_summary.csv"), {"d", "N", "n", "M0", "mse"}, row);

  // Same-noise paths of the true and the learned averaged SDE beyond the observation window.
  const auto [true_tab, est_tab] = drift_tables(cfg_, dir_, seeds_, m);
  const Eigen::VectorXd x0 = traj.states.row(0).transpose();
  const std::uint64_t path_seed = seeds_.stage("paths");
  const auto a = simulate_reduced(as_batch(true_tab), model.sigma, x0, cfg_.eval.path_horizon, cfg_.data.delta, path_seed);
  const auto b = simulate_reduced(as_batch(est_tab), model.sigma, x0, cfg_.eval.path_horizon, cfg_.data.delta, path_seed);
  const Eigen::MatrixXd t = a.times;
  csv::write(dir_.report("paths.csv"), concat({{"t"}, column_names("true_", d), column_names("learned_", d)}),
             hcat({&t, &a.states, &b.states}));
  const auto [pre, post] = path_discrepancy(a, b, cfg_.eval.split_time);
  Eigen::MatrixXd gap(1, 3);
  gap << cfg_.eval.split_time, pre, post;
  csv::write(dir_.report("path_discrepancy.csv"), {"split_time", "pre_rmse", "post_rmse"}, gap);
}

void Experiment::compare_laws(bool identical) {
  const auto model = build_model(cfg_.model);
  const Trajectory traj = observations();
  const Eigen::VectorXd x0 = traj.states.row(0).transpose();
  const auto& e = cfg_.eval;
  BatchDrift truth, learned;
  if (identical) {
    const auto grid = table_grid(cfg_);
    truth = as_batch(TabulatedDrift(grid, oracle_drift(cfg_, seeds_)(grid.flatten())));
    learned = truth;
  } else {
    const auto [t, l] = drift_tables(cfg_, dir_, seeds_, mode(""));
    truth = as_batch(t);
    learned = as_batch(l);
  }
  const auto rep = law_comparison_report(truth, learned, model.sigma, x0, e.law_times, e.law_paths, e.law_dt,
                                         seeds_.stage("law"), e.law_component, e.kde_points);
  const std::string suffix = identical ? "_identical" : "";
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(rep.times.size()), 3);
  for (std::size_t k = 0; k < rep.times.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    rows(r, 0) = rep.times[k];
    rows(r, 1) = rep.ks[k];
    rows(r, 2) = rep.w1[k];
  }
  csv::write(dir_.report("law_comparison" + suffix + ".csv"), {"t", "ks", "w1"}, rows);
  for (std::size_t k = 0; k < rep.times.size(); ++k) {
    Eigen::MatrixXd kde_rows(rep.kde_grid.size(), 3);
    kde_rows << rep.kde_grid, rep.kde_true[k], rep.kde_est[k];
    csv::write(dir_.report("kde_t" + csv::format(rep.times[k]) + suffix + ".csv"), {"x", "density_true", "density_est"},
               kde_rows);
  }
}

void Experiment::reproduce_table1() {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(cfg_.table1.size()), 5);
  for (std::size_t i = 0; i < cfg_.table1.size(); ++i) {
    ExperimentConfig cell = with_cell(cfg_, cfg_.table1[i]);
    cell.seed = derive_key(cfg_.seed, "table1", {i});
    cell.table1 = {cfg_.table1[i]};
    Experiment sub(cell, dir_.root / "cells" / std::to_string(i));
    sub.prepare();
    sub.simulate();
    sub.train();
    sub.evaluate();
    sub.write_manifest("ok");
    const auto summary = csv::read(sub.dir().report("mse_summary.csv"));
    rows.row(static_cast<Eigen::Index>(i)) = summary.rows.row(0);
  }
  csv::write(dir_.report("table1.csv"), {"d", "N", "n", "M0", "mse"}, rows);
}

void Experiment::run_all() {
  simulate();
  train();
  evaluate();
  compare_laws(false);
}

void Experiment::write_manifest(const std::string& status, const std::string& error) const {
  json files = json::object();
  std::vector<fs::path> all;
  for (const char* sub : {"data", "checkpoints", "reports", "cells"}) {
    const auto base = dir_.root / sub;
    if (!fs::exists(base)) continue;
    for (const auto& entry : fs::recursive_directory_iterator(base))
      if (entry.is_regular_file() && entry.path().filename() != "manifest") all.push_back(entry.path());
  }
  std::sort(all.begin(), all.end());
  for (const auto& p : all) files[fs::relative(p, dir_.root).generic_string()] = sha256_file(p);

  json seeds = json::object();
  seeds["master"] = seeds_.master;
  for (const char* tag : {"y0", "simulate", "init", "train", "oracle", "bands", "eval_drift", "paths", "law"})
    seeds[tag] = seeds_.stage(tag);

  json man;
  man["version"] = kVersion;
  man["status"] = status;
  if (!error.empty()) man["error"] = error;
  man["config_sha256"] = sha256_hex(serialize_config(cfg_));
  man["seeds"] = seeds;
  man["files"] = files;
  man["wall_time_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  csv::write_text_atomic(dir_.manifest(), man.dump(2) + "\n");
}

}  // namespace avgflow::exp
