#pragma once

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tomxrl/bayes_net.hpp"
#include "tomxrl/task_env.hpp"

namespace tomxrl {

struct TomConfig {
  int window = 60;
  double ess = 10.0;
  double initial_threshold = 0.6;
  std::vector<double> threshold_grid{0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
  // Dirichlet pseudo-count of every cell before the first structure pass.
  double prior_pseudo_count = 1.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TomConfig& c);
void from_json(const nlohmann::json& j, TomConfig& c);

// One observed round: the discretized observation and the human's action.
// bombs_remaining in `state` is carried along but never enters the network.
struct TomObservation {
  DiscreteState state;
  Action action = Action::Solo;
};

Row to_row(const TomObservation& obs);
Row evidence_row(const DiscreteState& state);

struct Prediction {
  Action action = Action::Solo;
  double confidence = 0.5;
};

struct TomStepReport {
  bool maintenance = false;        // a structure-learning pass ran
  bool structure_changed = false;  // and it changed the DAG
};

class TomModel {
 public:
  TomModel(const PayoffSpec& spec, TomConfig config);
  TomModel(int bomb_levels, int distance_bins, int time_bins, TomConfig config);

  const Dag& dag() const { return dag_; }
  const Cpds& cpds() const { return cpds_; }
  const std::vector<TomObservation>& memory() const { return memory_; }
  const TomConfig& config() const { return config_; }
  double threshold() const { return threshold_; }
  bool initialized() const { return initialized_; }
  int passes() const { return passes_; }

  // Argmax of P(action | parents of action) and its probability, without the
  // initialization check. Ties go to Solo.
  Prediction infer(const DiscreteState& state) const;
  // Throws StateError before the first structure pass.
  Prediction predict(const DiscreteState& state) const;

  // Online update: remember the observation and update the counts; once the
  // memory exceeds the window, learn the structure, refit on a change,
  // recalibrate the threshold and clear the memory.
  TomStepReport observe(const TomObservation& obs);

  // For tests and snapshots.
  void set_structure(const Dag& dag, const Cpds& cpds);
  void set_threshold(double t) { threshold_ = t; }
  void mark_initialized() { initialized_ = true; }

 private:
  TomConfig config_;
  Dag dag_;
  Cpds cpds_;
  std::vector<TomObservation> memory_;
  double threshold_;
  bool initialized_ = false;
  int passes_ = 0;
};

Prediction predict(const TomModel& model, const DiscreteState& state);

// Threshold with the best accuracy over the remembered rounds, counting only
// rounds predicted with confidence >= t; zero coverage scores 0. Ties go to
// the smallest grid value.
double update_threshold(const TomModel& model, std::span<const TomObservation> memory,
                        std::span<const double> grid);

TomModel tom_step(TomModel model, const TomObservation& obs);

// Snapshot: structure, pseudo-counts and threshold.
nlohmann::json snapshot(const TomModel& model);
TomModel restore_snapshot(const nlohmann::json& j, const TomConfig& config);

}  // namespace tomxrl
