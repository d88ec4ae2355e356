#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tomxrl/common.hpp"
#include "tomxrl/task_env.hpp"

namespace tomxrl {

// Dense index over bomb_type x distance_bin x time_bin x bombs_remaining
// (bombs_remaining in 1..n_bombs). Index size() is the absorbing terminal.
struct StateIndexer {
  int bomb_levels = 3;
  int distance_bins = 3;
  int time_bins = 3;
  int n_bombs = 12;

  static StateIndexer from_spec(const PayoffSpec& spec) {
    return {spec.bomb_levels(), spec.distance_bins(), spec.time_bins(), spec.n_bombs};
  }

  std::size_t size() const {
    return static_cast<std::size_t>(bomb_levels) * distance_bins * time_bins * n_bombs;
  }
  std::size_t terminal() const { return size(); }
  bool contains(const DiscreteState& s) const;
  std::size_t index(const DiscreteState& s) const;
  DiscreteState state_at(std::size_t i) const;
  // Number of values of a perturbable feature.
  int domain_size(Feature f) const;
  int domain_min(Feature f) const { return f == Feature::BombType ? 1 : 0; }

  friend bool operator==(const StateIndexer&, const StateIndexer&) = default;
};

struct Transition {
  std::size_t next = 0;
  double prob = 0.0;
};

struct MdpOptions {
  double gamma = 1.0;
  std::size_t state_cap = 200000;
};

struct DiscreteMdp {
  StateIndexer indexer;
  double gamma = 1.0;
  // Indexed [state][action]; the terminal state is the last entry.
  std::vector<std::array<std::vector<Transition>, 2>> transitions;
  std::vector<std::array<double, 2>> rewards;

  std::size_t num_states() const { return transitions.size(); }
};

// Transitions follow the generator: fresh bomb level uniform, fresh distance
// from the two-uniform-points distribution, time decremented by the action's
// cost. Within a time bin the exact remaining time is taken as uniform over
// the bin's whole seconds, and within a distance bin the exact distance
// follows its conditional distribution.
DiscreteMdp build_mdp(const PayoffSpec& spec, const MdpOptions& options = {});

class Policy {
 public:
  Policy() = default;
  Policy(StateIndexer indexer, std::vector<Action> actions, std::vector<double> values);

  // A policy that returns `a` everywhere; handy for baselines and tests.
  static Policy constant(const StateIndexer& indexer, Action a);

  const StateIndexer& indexer() const { return indexer_; }
  bool contains(const DiscreteState& s) const { return indexer_.contains(s); }
  // Throws UsageError for states outside the index.
  Action action(const DiscreteState& s) const;
  double value(const DiscreteState& s) const;
  const std::vector<Action>& actions() const { return actions_; }
  const std::vector<double>& values() const { return values_; }

  double gamma = 1.0;
  double tolerance = 0.0;
  std::uint64_t spec_hash = 0;
  int iterations = 0;

  friend bool operator==(const Policy&, const Policy&) = default;

 private:
  StateIndexer indexer_;
  std::vector<Action> actions_;
  std::vector<double> values_;
};

struct SolverOptions {
  double tol = 1e-9;
  int max_iterations = 100000;
};

// One-step backups Q(s, Solo), Q(s, Call) under the given value table.
std::array<double, 2> q_values(const DiscreteMdp& mdp, const std::vector<double>& values,
                               std::size_t state);

// Solo wins ties; a tie is a difference within 1e-10 of the larger magnitude.
Action greedy_action(const std::array<double, 2>& q);

Policy value_iteration(const DiscreteMdp& mdp, const SolverOptions& options = {});

Action recommend(const Policy& policy, const DiscreteState& state);
Action recommend(const Policy& policy, const RoundState& state, const PayoffSpec& spec);

std::string state_key(const DiscreteState& s, const StateIndexer& indexer);

// {"bomb_type": 1, "distance_bin": "near" | 0, "time_bin": "low" | 0,
//  "bombs_remaining": 3}. Throws DataError when malformed or out of range.
DiscreteState parse_discrete_state(const nlohmann::json& j, const StateIndexer& indexer);

void to_json(nlohmann::json& j, const Policy& p);
void from_json(const nlohmann::json& j, Policy& p);
void save_policy(const Policy& p, const std::string& path);
Policy load_policy(const std::string& path);

// Convenience: build, solve and stamp the spec hash.
Policy train_policy(const PayoffSpec& spec, const MdpOptions& mdp_options = {},
                    const SolverOptions& solver_options = {});

}  // namespace tomxrl
