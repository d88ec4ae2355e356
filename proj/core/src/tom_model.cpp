#include "tomxrl/tom_model.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace tomxrl {

using nlohmann::json;

void TomConfig::validate() const {
  if (window < 1) throw ConfigError("tom window must be >= 1");
  if (!(ess > 0.0)) throw ConfigError("tom ess must be > 0");
  if (threshold_grid.empty()) throw ConfigError("threshold grid is empty");
  for (double t : threshold_grid) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("threshold grid values must be in [0,1]");
  }
  if (!(initial_threshold >= 0.0 && initial_threshold <= 1.0)) {
    throw ConfigError("initial threshold must be in [0,1]");
  }
  if (prior_pseudo_count < 0.0) throw ConfigError("prior pseudo-count must be >= 0");
}

void to_json(json& j, const TomConfig& c) {
  j = json{{"window", c.window},
           {"ess", c.ess},
           {"initial_threshold", c.initial_threshold},
           {"threshold_grid", c.threshold_grid},
           {"prior_pseudo_count", c.prior_pseudo_count}};
}

void from_json(const json& j, TomConfig& c) {
  try {
    c.window = j.value("window", c.window);
    c.ess = j.value("ess", c.ess);
    c.initial_threshold = j.value("initial_threshold", c.initial_threshold);
    if (j.contains("threshold_grid")) c.threshold_grid = j.at("threshold_grid").get<std::vector<double>>();
    c.prior_pseudo_count = j.value("prior_pseudo_count", c.prior_pseudo_count);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed tom config: ") + e.what());
  }
  c.validate();
}

Row to_row(const TomObservation& obs) {
  return {obs.state.bomb_type - 1, obs.state.distance_bin, obs.state.time_bin,
          static_cast<int>(obs.action)};
}

Row evidence_row(const DiscreteState& state) {
  return {state.bomb_type - 1, state.distance_bin, state.time_bin, 0};
}

TomModel::TomModel(const PayoffSpec& spec, TomConfig config)
    : TomModel(spec.bomb_levels(), spec.distance_bins(), spec.time_bins(), std::move(config)) {}

TomModel::TomModel(int bomb_levels, int distance_bins, int time_bins, TomConfig config)
    : config_(std::move(config)),
      dag_(Dag::tom(bomb_levels, distance_bins, time_bins)),
      threshold_(config_.initial_threshold) {
  config_.validate();
  cpds_ = uniform_cpds(dag_, config_.prior_pseudo_count);
}

Prediction TomModel::infer(const DiscreteState& state) const {
  const std::vector<double> post = posterior(dag_, cpds_, kActionNode, evidence_row(state));
  Prediction p;
  p.action = post[1] > post[0] ? Action::Call : Action::Solo;
  p.confidence = post[static_cast<std::size_t>(p.action)];
  return p;
}

Prediction TomModel::predict(const DiscreteState& state) const {
  if (!initialized_) throw StateError("theory-of-mind model is not initialized");
  return infer(state);
}

TomStepReport TomModel::observe(const TomObservation& obs) {
  TomStepReport report;
  memory_.push_back(obs);
  bayesian_update_in_place(cpds_, to_row(obs));
  if (static_cast<int>(memory_.size()) <= config_.window) return report;

  std::vector<Row> rows;
  rows.reserve(memory_.size());
  for (const auto& o : memory_) rows.push_back(to_row(o));
  const Dag learned = hill_climb(rows, dag_, ConstraintSet::tom_default(), config_.ess);
  report.maintenance = true;
  if (!(learned == dag_)) {
    // Priors are discarded and the tables refit on the remembered rounds
    // before the memory is cleared.
    dag_ = learned;
    cpds_ = fit_mle(dag_, rows);
    report.structure_changed = true;
  }
  threshold_ = update_threshold(*this, memory_, config_.threshold_grid);
  memory_.clear();
  initialized_ = true;
  ++passes_;
  return report;
}

void TomModel::set_structure(const Dag& dag, const Cpds& cpds) {
  if (dag.cardinalities() != dag_.cardinalities()) throw UsageError("DAG node set mismatch");
  dag_ = dag;
  cpds_ = cpds;
}

Prediction predict(const TomModel& model, const DiscreteState& state) { return model.predict(state); }

double update_threshold(const TomModel& model, std::span<const TomObservation> memory,
                        std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("threshold grid is empty");
  std::vector<Prediction> preds;
  preds.reserve(memory.size());
  for (const auto& o : memory) preds.push_back(model.infer(o.state));

  double best_t = grid[0];
  double best_acc = -1.0;
  for (double t : grid) {
    int covered = 0;
    int correct = 0;
    for (std::size_t i = 0; i < memory.size(); ++i) {
      if (preds[i].confidence >= t) {
        ++covered;
        if (preds[i].action == memory[i].action) ++correct;
      }
    }
    const double acc = covered > 0 ? static_cast<double>(correct) / covered : 0.0;
    if (acc > best_acc || (acc == best_acc && t < best_t)) {
      best_acc = acc;
      best_t = t;
    }
  }
  return best_t;
}

TomModel tom_step(TomModel model, const TomObservation& obs) {
  model.observe(obs);
  return model;
}

json snapshot(const TomModel& model) {
  return json{{"dag", model.dag()},
              {"cpds", model.cpds()},
              {"threshold", model.threshold()},
              {"initialized", model.initialized()},
              {"passes", model.passes()}};
}

TomModel restore_snapshot(const json& j, const TomConfig& config) {
  try {
    const json& nodes = j.at("dag").at("nodes");
    if (nodes.size() != static_cast<std::size_t>(kTomNodes)) throw ConfigError("snapshot node count");
    TomModel model(nodes.at(0).at("cardinality").get<int>(), nodes.at(1).at("cardinality").get<int>(),
                   nodes.at(2).at("cardinality").get<int>(), config);
    Dag dag = model.dag();
    for (const auto& e : j.at("dag").at("edges")) {
      int from = -1;
      int to = -1;
      for (int i = 0; i < dag.size(); ++i) {
        if (dag.name(i) == e.at(0).get<std::string>()) from = i;
        if (dag.name(i) == e.at(1).get<std::string>()) to = i;
      }
      if (from < 0 || to < 0) throw ConfigError("snapshot edge names unknown node");
      dag.add_edge(from, to);
    }
    Cpds cpds = uniform_cpds(dag, 0.0);
    const json& tables = j.at("cpds");
    for (Cpd& c : cpds.nodes) {
      c.counts = tables.at(static_cast<std::size_t>(c.node)).at("counts").get<std::vector<double>>();
      if (c.counts.size() != c.probs.size()) throw ConfigError("snapshot table size mismatch");
      for (int r = 0; r < c.configs(); ++r) c.normalize_row(r);
    }
    model.set_structure(dag, cpds);
    model.set_threshold(j.at("threshold").get<double>());
    if (j.at("initialized").get<bool>()) model.mark_initialized();
    return model;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed tom snapshot: ") + e.what());
  }
}

}  // namespace tomxrl
