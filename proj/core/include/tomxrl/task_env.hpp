#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tomxrl/common.hpp"

namespace tomxrl {

// Payoffs, time costs and discretization cut points of the bomb-defusal task.
// Time quantities are whole seconds; distances are Manhattan grid units.
struct PayoffSpec {
  // reward[level - 1][action]
  std::vector<std::array<double, 2>> reward{{20.0, 10.0}, {15.0, 20.0}, {10.0, 30.0}};
  std::vector<int> solo_time_cost{10, 15, 20};
  int call_time_base = 10;
  int call_time_per_distance = 2;
  int episode_time_limit = 240;
  int n_bombs = 12;
  std::vector<int> distance_cuts{3, 7};
  std::vector<int> time_cuts{80, 160};
  // Side of the square map; agent and team positions are uniform on it.
  int grid_size = 16;

  int bomb_levels() const { return static_cast<int>(reward.size()); }
  int distance_bins() const { return static_cast<int>(distance_cuts.size()) + 1; }
  int time_bins() const { return static_cast<int>(time_cuts.size()) + 1; }
  int max_distance() const { return 2 * (grid_size - 1); }

  double reward_for(int bomb_type, Action a) const;
  int time_cost(int bomb_type, Action a, int distance_raw) const;
  int distance_bin(int distance_raw) const;
  int time_bin(int time_remaining) const;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;

  // Stable hash of the canonical JSON form.
  std::uint64_t hash() const;

  friend bool operator==(const PayoffSpec&, const PayoffSpec&) = default;
};

void to_json(nlohmann::json& j, const PayoffSpec& spec);
void from_json(const nlohmann::json& j, PayoffSpec& spec);
PayoffSpec load_payoff_spec(const std::string& path);

std::string distance_bin_name(int bin, int n_bins);
std::string time_bin_name(int bin, int n_bins);

struct GridPos {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
};

// The discretized observation used by the policy, the explainer and the
// theory-of-mind model. bomb_type is the 1-based level; bins are 0-based.
struct DiscreteState {
  int bomb_type = 1;
  int distance_bin = 0;
  int time_bin = 0;
  int bombs_remaining = 0;

  int feature(Feature f) const;
  DiscreteState with_feature(Feature f, int value) const;

  friend auto operator<=>(const DiscreteState&, const DiscreteState&) = default;
};

struct RoundState {
  int bomb_type = 1;
  int distance_raw = 0;
  int distance_bin = 0;
  int time_remaining = 0;
  int time_bin = 0;
  int bombs_remaining = 0;
  GridPos agent_pos;
  GridPos team_pos;

  DiscreteState discrete() const {
    return {bomb_type, distance_bin, time_bin, bombs_remaining};
  }
  bool terminal() const { return bombs_remaining <= 0 || time_remaining <= 0; }

  friend bool operator==(const RoundState&, const RoundState&) = default;
};

void to_json(nlohmann::json& j, const RoundState& s);
void from_json(const nlohmann::json& j, RoundState& s);

struct StepOutcome {
  double reward = 0.0;
  int time_cost = 0;
  RoundState next;
  bool done = false;
};

// Round-1 state of a fresh episode; deterministic in the seed.
RoundState new_episode(const PayoffSpec& spec, std::uint64_t seed);

// One round. The fresh bomb and positions for the next round are always drawn,
// so the number of RNG draws per step does not depend on the action.
StepOutcome step(const RoundState& state, Action action, const PayoffSpec& spec, Rng& rng);

DiscreteState discretize(const RoundState& state, const PayoffSpec& spec);

// Recomputes distance and bins from positions and time.
RoundState make_round_state(const PayoffSpec& spec, int bomb_type, GridPos agent, GridPos team,
                            int time_remaining, int bombs_remaining);

// Probability mass of the Manhattan distance between two independent uniform
// points on the grid, indexed by distance.
std::vector<double> distance_pmf(int grid_size);

// An episode with its own random stream, for callers that just want to play.
class Episode {
 public:
  Episode(const PayoffSpec& spec, std::uint64_t seed);

  const RoundState& state() const { return state_; }
  bool done() const { return done_; }
  double total_reward() const { return total_reward_; }
  int elapsed() const { return elapsed_; }
  int rounds() const { return rounds_; }

  StepOutcome play(Action a);

 private:
  const PayoffSpec* spec_;
  Rng rng_;
  RoundState state_;
  bool done_ = false;
  double total_reward_ = 0.0;
  int elapsed_ = 0;
  int rounds_ = 0;
};

}  // namespace tomxrl
