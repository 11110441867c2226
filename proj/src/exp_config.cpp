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

#include "avgflow/exp/config.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "avgflow/core/errors.hpp"
#include "avgflow/drift/expression.hpp"
#include "avgflow/sim/simulate.hpp"

namespace avgflow::exp {

using json = nlohmann::ordered_json;

namespace {

/// Strict reader for one JSON object: every key must be consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(field(key) + ": wrong type (" + j_.at(key).dump() + ")");
    }
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, field(key));
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_flow(Section s, FlowSection& f) {
  s.read("layers", f.layers);
  s.read("hidden", f.hidden);
  s.read("activation", f.activation);
  s.finish();
}

json write_flow(const FlowSection& f) {
  return json{{"layers", f.layers}, {"hidden", f.hidden}, {"activation", f.activation}};
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field + ": " + message);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section top(root, "");

  {
    auto m = top.sub("model");
    m.read("kernel", c.model.kernel);
    m.read("d", c.model.d);
    m.read("N", c.model.N);
    m.read("sigma", c.model.sigma);
    m.read("n_scale", c.model.n_scale);
    auto s = m.sub("solvent");
    s.read("a", c.model.a);
    s.read("kappa", c.model.kappa);
    s.read("gamma", c.model.gamma);
    s.read("zeta", c.model.zeta);
    s.finish();
    auto sep = m.sub("separable");
    sep.read("b0", c.model.b0);
    sep.read("power", c.model.power);
    sep.finish();
    auto cu = m.sub("custom");
    cu.read("components", c.model.components);
    cu.read("fast_dim", c.model.custom_fast_dim);
    cu.finish();
    auto f = m.sub("fast");
    f.read("kind", c.model.fast);
    f.read("ou_rate", c.model.ou_rate);
    f.read("ou_alpha", c.model.ou_alpha);
    f.read("von_mises_concentration", c.model.vm_concentration);
    f.read("von_mises_location", c.model.vm_location);
    f.finish();
    m.finish();
  }
  {
    auto d = top.sub("data");
    if (!d.has("x0")) c.data.x0.assign(static_cast<std::size_t>(std::max(c.model.d, 1)), 2.0);
    d.read("x0", c.data.x0);
    d.read("y0", c.data.y0);
    d.read("horizon", c.data.horizon);
    d.read("dt", c.data.dt);
    d.read("delta", c.data.delta);
    d.finish();
  }
  {
    auto t = top.sub("train");
    t.read("mode", c.train.mode);
    read_flow(t.sub("latent_flow"), c.train.latent_flow);
    read_flow(t.sub("posterior_flow"), c.train.posterior_flow);
    auto b = t.sub("baseline");
    b.read("hidden", c.train.baseline_hidden);
    b.read("activation", c.train.baseline_activation);
    b.finish();
    auto o = t.sub("optimizer");
    o.read("learning_rate", c.train.optimizer.learning_rate);
    o.read("clip", c.train.optimizer.clip);
    o.read("iterations", c.train.optimizer.iterations);
    o.read("batch", c.train.optimizer.batch);
    o.read("beta1", c.train.optimizer.beta1);
    o.read("beta2", c.train.optimizer.beta2);
    o.read("eps", c.train.optimizer.eps);
    o.finish();
    auto p = t.sub("penalty");
    p.read("lambda", c.train.penalty.lambda);
    p.read("p", c.train.penalty.p);
    p.finish();
    t.read("K", c.train.K);
    t.read("L", c.train.L);
    t.read("param_batch", c.train.param_batch);
    t.read("latent_batch", c.train.latent_batch);
    t.read("prior_scale", c.train.prior_scale);
    t.read("init_scale", c.train.init_scale);
    t.finish();
  }
  {
    auto e = top.sub("eval");
    auto g = e.sub("grid");
    if (!g.has("min") && !g.has("max") && !g.has("points") && c.model.d >= 1) {
      const auto def = EvalGrid::default_for(c.model.d);
      c.eval.grid_min.assign(def.lo.data(), def.lo.data() + def.lo.size());
      c.eval.grid_max.assign(def.hi.data(), def.hi.data() + def.hi.size());
      c.eval.grid_points = def.points;
    }
    g.read("min", c.eval.grid_min);
    g.read("max", c.eval.grid_max);
    g.read("points", c.eval.grid_points);
    g.finish();
    e.read("oracle_samples", c.eval.oracle_samples);
    auto b = e.sub("bands");
    b.read("samples", c.eval.band_samples);
    b.read("latents", c.eval.band_latents);
    b.read("param_batch", c.eval.band_param_batch);
    b.read("latent_batch", c.eval.band_latent_batch);
    b.read("q_lo", c.eval.q_lo);
    b.read("q_hi", c.eval.q_hi);
    b.finish();
    e.read("drift_latents", c.eval.drift_latents);
    auto pth = e.sub("paths");
    pth.read("split_time", c.eval.split_time);
    pth.read("horizon", c.eval.path_horizon);
    pth.finish();
    auto l = e.sub("law");
    l.read("times", c.eval.law_times);
    l.read("paths", c.eval.law_paths);
    l.read("dt", c.eval.law_dt);
    l.read("kde_points", c.eval.kde_points);
    l.read("component", c.eval.law_component);
    l.finish();
    auto tab = e.sub("drift_table");
    tab.read("points", c.eval.table_points);
    tab.read("margin", c.eval.table_margin);
    tab.finish();
    e.finish();
  }
  if (const json* cells = top.raw("table1")) {
    if (!cells->is_array()) throw ConfigError("table1: expected an array of {d, N, n}");
    c.table1.clear();
    for (std::size_t i = 0; i < cells->size(); ++i) {
      Section cell((*cells)[i], "table1[" + std::to_string(i) + "]");
      Table1Cell t;
      cell.read("d", t.d);
      cell.read("N", t.N);
      cell.read("n", t.n);
      cell.finish();
      c.table1.push_back(t);
    }
  }
  {
    auto s = top.sub("seeds");
    s.read("master", c.seed);
    s.finish();
  }
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  json root;
  const auto& m = c.model;
  root["model"] = {
      {"kernel", m.kernel},
      {"d", m.d},
      {"N", m.N},
      {"sigma", m.sigma},
      {"n_scale", m.n_scale},
      {"solvent", {{"a", m.a}, {"kappa", m.kappa}, {"gamma", m.gamma}, {"zeta", m.zeta}}},
      {"separable", {{"b0", m.b0}, {"power", m.power}}},
      {"custom", {{"components", m.components}, {"fast_dim", m.custom_fast_dim}}},
      {"fast",
       {{"kind", m.fast},
        {"ou_rate", m.ou_rate},
        {"ou_alpha", m.ou_alpha},
        {"von_mises_concentration", m.vm_concentration},
        {"von_mises_location", m.vm_location}}},
  };
  root["data"] = {{"x0", c.data.x0},
                  {"y0", c.data.y0},
                  {"horizon", c.data.horizon},
                  {"dt", c.data.dt},
                  {"delta", c.data.delta}};
  const auto& t = c.train;
  const auto& o = t.optimizer;
  root["train"] = {
      {"mode", t.mode},
      {"latent_flow", write_flow(t.latent_flow)},
      {"posterior_flow", write_flow(t.posterior_flow)},
      {"baseline", {{"hidden", t.baseline_hidden}, {"activation", t.baseline_activation}}},
      {"optimizer",
       {{"learning_rate", o.learning_rate},
        {"clip", o.clip},
        {"iterations", o.iterations},
        {"batch", o.batch},
        {"beta1", o.beta1},
        {"beta2", o.beta2},
        {"eps", o.eps}}},
      {"penalty", {{"lambda", t.penalty.lambda}, {"p", t.penalty.p}}},
      {"K", t.K},
      {"L", t.L},
      {"param_batch", t.param_batch},
      {"latent_batch", t.latent_batch},
      {"prior_scale", t.prior_scale},
      {"init_scale", t.init_scale},
  };
  const auto& e = c.eval;
  root["eval"] = {
      {"grid", {{"min", e.grid_min}, {"max", e.grid_max}, {"points", e.grid_points}}},
      {"oracle_samples", e.oracle_samples},
      {"bands",
       {{"samples", e.band_samples},
        {"latents", e.band_latents},
        {"param_batch", e.band_param_batch},
        {"latent_batch", e.band_latent_batch},
        {"q_lo", e.q_lo},
        {"q_hi", e.q_hi}}},
      {"drift_latents", e.drift_latents},
      {"paths", {{"split_time", e.split_time}, {"horizon", e.path_horizon}}},
      {"law",
       {{"times", e.law_times},
        {"paths", e.law_paths},
        {"dt", e.law_dt},
        {"kde_points", e.kde_points},
        {"component", e.law_component}}},
      {"drift_table", {{"points", e.table_points}, {"margin", e.table_margin}}},
  };
  json cells = json::array();
  for (const auto& cell : c.table1) cells.push_back({{"d", cell.d}, {"N", cell.N}, {"n", cell.n}});
  root["table1"] = cells;
  root["seeds"] = {{"master", c.seed}};
  return root.dump(2) + "\n";
}

MultiscaleModel build_model(const ModelSection& m) {
  require(m.d >= 1, "model.d", "must be >= 1");
  require(std::isfinite(m.sigma) && m.sigma > 0, "model.sigma", "must be > 0");
  require(std::isfinite(m.n_scale) && m.n_scale > 0, "model.n_scale", "must be > 0");
  std::string fast = m.fast;
  std::optional<DriftKernel> kernel;
  SolventParams sp;
  if (m.kernel == "solvent") {
    sp.N = m.N;
    sp.d = m.d;
    sp.a = m.a;
    sp.kappa = m.kappa;
    sp.gamma = m.gamma;
    sp.zeta = m.zeta;
    sp.validate();
    kernel = DriftKernel::solvent(sp);
    if (fast == "auto") fast = "solvent_langevin";
  } else if (m.kernel == "double_well") {
    require(m.d == 1, "model.d", "the double-well kernel is one-dimensional");
    kernel = DriftKernel::double_well();
    if (fast == "auto") fast = "von_mises";
  } else if (m.kernel == "separable") {
    std::vector<Expression> b0;
    for (const auto& s : m.b0) b0.push_back(Expression::parse(s));
    require(static_cast<int>(b0.size()) == m.d, "model.separable.b0", "needs one expression per slow coordinate");
    kernel = DriftKernel::separable(std::move(b0), m.power);
    if (fast == "auto") fast = "ou";
  } else if (m.kernel == "custom") {
    std::vector<Expression> comps;
    for (const auto& s : m.components) comps.push_back(Expression::parse(s));
    require(static_cast<int>(comps.size()) == m.d, "model.custom.components",
            "needs one expression per slow coordinate");
    kernel = DriftKernel(CustomKernel{std::move(comps), m.custom_fast_dim});
    if (fast == "auto") fast = "ou";
  } else {
    throw ConfigError("model.kernel: unknown kernel '" + m.kernel + "' (solvent, double_well, separable, custom)");
  }

  FastDynamics fd;
  if (fast == "solvent_langevin") {
    require(m.kernel == "solvent", "model.fast.kind", "solvent_langevin needs the solvent kernel");
    fd = SolventLangevinFast{sp};
  } else if (fast == "von_mises") {
    require(m.vm_concentration.size() == 4 && m.vm_location.size() == 4, "model.fast",
            "von Mises concentration and location need 4 entries");
    VonMisesLangevinFast vm;
    for (int i = 0; i < 4; ++i) {
      vm.concentration(i) = m.vm_concentration[static_cast<std::size_t>(i)];
      vm.location(i) = m.vm_location[static_cast<std::size_t>(i)];
    }
    require((vm.concentration.array() > 0).all(), "model.fast.von_mises_concentration", "must be > 0");
    fd = vm;
  } else if (fast == "ou") {
    require(m.ou_rate > 0 && m.ou_alpha > 0, "model.fast", "ou_rate and ou_alpha must be > 0");
    fd = OrnsteinUhlenbeckFast{kernel->fast_dim(), m.ou_rate, m.ou_alpha};
  } else {
    throw ConfigError("model.fast.kind: unknown fast dynamics '" + fast + "'");
  }
  MultiscaleModel model{*kernel, diffusion_matrix(m.sigma, m.d), fd, m.n_scale};
  model.validate();
  return model;
}

ad::CouplingFlowSpec latent_flow_spec(const ExperimentConfig& c) {
  const auto& f = c.train.latent_flow;
  const auto model = build_model(c.model);
  auto spec = ad::CouplingFlowSpec::alternating(model.kernel.fast_dim(), f.layers, f.hidden,
                                                ad::parse_activation(f.activation));
  spec.validate();
  return spec;
}

PosteriorConfig posterior_config(const ExperimentConfig& c) {
  PosteriorConfig p;
  p.layers = c.train.posterior_flow.layers;
  p.hidden = c.train.posterior_flow.hidden;
  p.activation = ad::parse_activation(c.train.posterior_flow.activation);
  p.prior_scale = c.train.prior_scale;
  p.init_scale = c.train.init_scale;
  p.K = c.train.K;
  p.L = c.train.L;
  p.param_batch = c.train.param_batch;
  p.latent_batch = c.train.latent_batch;
  p.validate();
  return p;
}

ad::MlpSpec baseline_spec(const ExperimentConfig& c) {
  ad::MlpSpec s;
  s.widths.push_back(c.model.d);
  for (int h : c.train.baseline_hidden) s.widths.push_back(h);
  s.widths.push_back(c.model.d);
  s.activation = ad::parse_activation(c.train.baseline_activation);
  s.validate();
  return s;
}

EvalGrid eval_grid(const ExperimentConfig& c) {
  const auto& e = c.eval;
  require(e.grid_min.size() == static_cast<std::size_t>(c.model.d) && e.grid_max.size() == e.grid_min.size() &&
              e.grid_points.size() == e.grid_min.size(),
          "eval.grid", "min, max and points need one entry per slow coordinate");
  EvalGrid g;
  g.lo = Eigen::Map<const Eigen::VectorXd>(e.grid_min.data(), static_cast<Eigen::Index>(e.grid_min.size()));
  g.hi = Eigen::Map<const Eigen::VectorXd>(e.grid_max.data(), static_cast<Eigen::Index>(e.grid_max.size()));
  g.points = e.grid_points;
  try {
    g.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(std::string("eval.") + err.what());
  }
  return g;
}

Eigen::Index ExperimentConfig::observation_stride() const {
  try {
    return step_count(data.delta, data.dt);
  } catch (const ConfigError&) {
    throw ConfigError("data.delta: must be an integer multiple of data.dt (" + std::to_string(data.delta) + " vs " +
                      std::to_string(data.dt) + ")");
  }
}

Eigen::Index ExperimentConfig::observation_count() const {
  try {
    return step_count(data.horizon, data.delta);
  } catch (const ConfigError&) {
    throw ConfigError("data.horizon: must be an integer multiple of data.delta");
  }
}

void ExperimentConfig::validate() const {
  const auto m = build_model(model);
  const int d = model.d;
  require(data.x0.size() == static_cast<std::size_t>(d), "data.x0", "needs " + std::to_string(d) + " entries");
  require(data.y0.empty() || data.y0.size() == static_cast<std::size_t>(m.fast_dim()), "data.y0",
          "must be empty or have " + std::to_string(m.fast_dim()) + " entries");
  require(data.dt > 0 && std::isfinite(data.dt), "data.dt", "must be > 0");
  require(data.delta > 0 && std::isfinite(data.delta), "data.delta", "must be > 0");
  require(data.horizon > 0 && std::isfinite(data.horizon), "data.horizon", "must be > 0");
  require(data.dt * model.n_scale <= kFastStabilityLimit, "data.dt",
          "dt * n_scale must be <= " + std::to_string(kFastStabilityLimit) + " for a stable fast scale");
  observation_stride();
  const Eigen::Index M0 = observation_count();

  require(train.mode == "mle" || train.mode == "vi" || train.mode == "baseline", "train.mode",
          "must be mle, vi or baseline");
  try {
    train.optimizer.validate(M0);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("train.optimizer: ") + e.what());
  }
  try {
    train.penalty.validate(m.kernel);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("train.penalty: ") + e.what());
  }
  require(train.K >= 1 && train.L >= 1, "train", "K and L must be >= 1");
  latent_flow_spec(*this);
  posterior_config(*this);
  baseline_spec(*this);

  eval_grid(*this);
  require(eval.oracle_samples >= 1, "eval.oracle_samples", "must be >= 1");
  require(eval.band_samples >= 1 && eval.band_latents >= 1 && eval.band_param_batch >= 1 && eval.band_latent_batch >= 1,
          "eval.bands", "sizes must be >= 1");
  require(0 < eval.q_lo && eval.q_lo < eval.q_hi && eval.q_hi < 1, "eval.bands", "need 0 < q_lo < q_hi < 1");
  require(eval.drift_latents >= 1, "eval.drift_latents", "must be >= 1");
  require(eval.split_time > 0 && eval.path_horizon > eval.split_time, "eval.paths", "need 0 < split_time < horizon");
  step_count(eval.path_horizon, data.delta);
  require(!eval.law_times.empty(), "eval.law.times", "needs at least one time");
  for (double t : eval.law_times) require(t >= 0 && std::isfinite(t), "eval.law.times", "must be finite and >= 0");
  require(eval.law_paths >= 1, "eval.law.paths", "must be >= 1");
  require(eval.law_dt > 0, "eval.law.dt", "must be > 0");
  require(eval.kde_points >= 2, "eval.law.kde_points", "must be >= 2");
  require(eval.law_component >= 0 && eval.law_component < d, "eval.law.component", "out of range");
  require(eval.table_points >= 2 && eval.table_margin >= 0, "eval.drift_table", "need points >= 2 and margin >= 0");
  require(!table1.empty(), "table1", "needs at least one cell");
  for (const auto& cell : table1)
    require(cell.d >= 1 && cell.N >= 1 && cell.n > 0, "table1", "cells need d >= 1, N >= 1, n > 0");
}

ExperimentConfig with_cell(const ExperimentConfig& cfg, const Table1Cell& cell) {
  ExperimentConfig c = cfg;
  c.model.d = cell.d;
  c.model.N = cell.N;
  c.model.n_scale = cell.n;
  const double dt_max = std::min(c.data.dt, kFastStabilityLimit / cell.n);
  c.data.dt = c.data.delta / std::ceil(c.data.delta / dt_max * (1 - 1e-12));
  if (c.data.x0.size() != static_cast<std::size_t>(cell.d)) c.data.x0.assign(static_cast<std::size_t>(cell.d), c.data.x0.front());
  c.data.y0.clear();
  if (c.eval.grid_min.size() != static_cast<std::size_t>(cell.d)) {
    const auto def = EvalGrid::default_for(cell.d);
    c.eval.grid_min.assign(def.lo.data(), def.lo.data() + def.lo.size());
    c.eval.grid_max.assign(def.hi.data(), def.hi.data() + def.hi.size());
    c.eval.grid_points = def.points;
  }
  c.eval.law_component = 0;
  return c;
}

}  // namespace avgflow::exp
