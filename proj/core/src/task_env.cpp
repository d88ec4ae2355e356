#include "tomxrl/task_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace tomxrl {

using nlohmann::json;

double PayoffSpec::reward_for(int bomb_type, Action a) const {
  if (bomb_type < 1 || bomb_type > bomb_levels()) {
    throw UsageError("bomb_type out of range: " + std::to_string(bomb_type));
  }
  return reward[static_cast<std::size_t>(bomb_type - 1)][static_cast<std::size_t>(a)];
}

int PayoffSpec::time_cost(int bomb_type, Action a, int distance_raw) const {
  if (bomb_type < 1 || bomb_type > bomb_levels()) {
    throw UsageError("bomb_type out of range: " + std::to_string(bomb_type));
  }
  if (a == Action::Solo) return solo_time_cost[static_cast<std::size_t>(bomb_type - 1)];
  return call_time_base + call_time_per_distance * distance_raw;
}

namespace {

// Values on a cut point fall into the lower bin.
int bin_of(int value, const std::vector<int>& cuts) {
  return static_cast<int>(std::lower_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
}

void check_cuts(const std::vector<int>& cuts, const char* name) {
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (cuts[i] <= 0) throw ConfigError(std::string(name) + " must be positive");
    if (i > 0 && cuts[i] <= cuts[i - 1]) {
      throw ConfigError(std::string(name) + " must be strictly increasing");
    }
  }
}

// Reads a time quantity and insists on whole seconds.
int whole_seconds(const json& j, const char* name) {
  const double v = j.get<double>();
  if (std::floor(v) != v) throw ConfigError(std::string(name) + " must be whole seconds");
  return static_cast<int>(v);
}

}  // namespace

int PayoffSpec::distance_bin(int distance_raw) const { return bin_of(distance_raw, distance_cuts); }

int PayoffSpec::time_bin(int time_remaining) const { return bin_of(time_remaining, time_cuts); }

void PayoffSpec::validate() const {
  if (n_bombs <= 0) throw ConfigError("n_bombs must be positive");
  if (reward.empty()) throw ConfigError("reward table is empty");
  if (solo_time_cost.size() != reward.size()) {
    throw ConfigError("solo_time_cost must have one entry per bomb level");
  }
  for (const auto& row : reward) {
    for (double r : row) {
      if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("rewards must be finite and >= 0");
    }
  }
  if (reward.size() >= 3 && !(reward[2][1] > reward[2][0])) {
    throw ConfigError("level-3 Call reward must exceed level-3 Solo reward");
  }
  for (int c : solo_time_cost) {
    if (c <= 0) throw ConfigError("solo_time_cost entries must be > 0");
  }
  if (call_time_base <= 0) throw ConfigError("call_time_base must be > 0");
  if (call_time_per_distance <= 0) throw ConfigError("call_time_per_distance must be > 0");
  if (episode_time_limit <= 0) throw ConfigError("episode_time_limit must be > 0");
  if (grid_size < 1) throw ConfigError("grid_size must be >= 1");
  check_cuts(distance_cuts, "distance_cuts");
  check_cuts(time_cuts, "time_cuts");
  if (!time_cuts.empty() && time_cuts.back() >= episode_time_limit) {
    throw ConfigError("time_cuts must lie below episode_time_limit");
  }
}

std::uint64_t PayoffSpec::hash() const { return fnv1a(json(*this).dump()); }

void to_json(json& j, const PayoffSpec& spec) {
  json rewards = json::array();
  for (const auto& row : spec.reward) rewards.push_back({{"Solo", row[0]}, {"Call", row[1]}});
  j = json{{"reward", rewards},
           {"solo_time_cost", spec.solo_time_cost},
           {"call_time_base", spec.call_time_base},
           {"call_time_per_distance", spec.call_time_per_distance},
           {"episode_time_limit", spec.episode_time_limit},
           {"n_bombs", spec.n_bombs},
           {"distance_cuts", spec.distance_cuts},
           {"time_cuts", spec.time_cuts},
           {"grid_size", spec.grid_size}};
}

void from_json(const json& j, PayoffSpec& spec) {
  if (!j.is_object()) throw ConfigError("payoff spec must be a JSON object");
  try {
    if (j.contains("reward")) {
      spec.reward.clear();
      for (const auto& row : j.at("reward")) {
        spec.reward.push_back({row.at("Solo").get<double>(), row.at("Call").get<double>()});
      }
    }
    if (j.contains("solo_time_cost")) {
      spec.solo_time_cost.clear();
      for (const auto& c : j.at("solo_time_cost")) {
        spec.solo_time_cost.push_back(whole_seconds(c, "solo_time_cost"));
      }
    }
    if (j.contains("call_time_base")) {
      spec.call_time_base = whole_seconds(j.at("call_time_base"), "call_time_base");
    }
    if (j.contains("call_time_per_distance")) {
      spec.call_time_per_distance =
          whole_seconds(j.at("call_time_per_distance"), "call_time_per_distance");
    }
    if (j.contains("episode_time_limit")) {
      spec.episode_time_limit = whole_seconds(j.at("episode_time_limit"), "episode_time_limit");
    }
    if (j.contains("n_bombs")) spec.n_bombs = j.at("n_bombs").get<int>();
    if (j.contains("distance_cuts")) spec.distance_cuts = j.at("distance_cuts").get<std::vector<int>>();
    if (j.contains("time_cuts")) {
      spec.time_cuts.clear();
      for (const auto& c : j.at("time_cuts")) spec.time_cuts.push_back(whole_seconds(c, "time_cuts"));
    }
    if (j.contains("grid_size")) spec.grid_size = j.at("grid_size").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed payoff spec: ") + e.what());
  }
  spec.validate();
}

PayoffSpec load_payoff_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open payoff spec: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return j.get<PayoffSpec>();
}

std::string distance_bin_name(int bin, int n_bins) {
  if (n_bins == 3) {
    static const char* kNames[] = {"near", "medium", "far"};
    if (bin >= 0 && bin < 3) return kNames[bin];
  }
  return "d" + std::to_string(bin);
}

std::string time_bin_name(int bin, int n_bins) {
  if (n_bins == 3) {
    static const char* kNames[] = {"low", "medium", "high"};
    if (bin >= 0 && bin < 3) return kNames[bin];
  }
  return "t" + std::to_string(bin);
}

int DiscreteState::feature(Feature f) const {
  switch (f) {
    case Feature::BombType:
      return bomb_type;
    case Feature::Distance:
      return distance_bin;
    case Feature::Time:
      return time_bin;
  }
  return 0;
}

DiscreteState DiscreteState::with_feature(Feature f, int value) const {
  DiscreteState out = *this;
  switch (f) {
    case Feature::BombType:
      out.bomb_type = value;
      break;
    case Feature::Distance:
      out.distance_bin = value;
      break;
    case Feature::Time:
      out.time_bin = value;
      break;
  }
  return out;
}

void to_json(json& j, const RoundState& s) {
  j = json{{"bomb_type", s.bomb_type},
           {"distance_raw", s.distance_raw},
           {"distance_bin", s.distance_bin},
           {"time_remaining", s.time_remaining},
           {"time_bin", s.time_bin},
           {"bombs_remaining", s.bombs_remaining},
           {"agent_pos", {s.agent_pos.x, s.agent_pos.y}},
           {"team_pos", {s.team_pos.x, s.team_pos.y}}};
}

void from_json(const json& j, RoundState& s) {
  s.bomb_type = j.at("bomb_type").get<int>();
  s.distance_raw = j.at("distance_raw").get<int>();
  s.distance_bin = j.at("distance_bin").get<int>();
  s.time_remaining = j.at("time_remaining").get<int>();
  s.time_bin = j.at("time_bin").get<int>();
  s.bombs_remaining = j.at("bombs_remaining").get<int>();
  s.agent_pos = {j.at("agent_pos").at(0).get<int>(), j.at("agent_pos").at(1).get<int>()};
  s.team_pos = {j.at("team_pos").at(0).get<int>(), j.at("team_pos").at(1).get<int>()};
}

RoundState make_round_state(const PayoffSpec& spec, int bomb_type, GridPos agent, GridPos team,
                            int time_remaining, int bombs_remaining) {
  RoundState s;
  s.bomb_type = bomb_type;
  s.agent_pos = agent;
  s.team_pos = team;
  s.distance_raw = std::abs(agent.x - team.x) + std::abs(agent.y - team.y);
  s.distance_bin = spec.distance_bin(s.distance_raw);
  s.time_remaining = time_remaining;
  s.time_bin = spec.time_bin(time_remaining);
  s.bombs_remaining = bombs_remaining;
  return s;
}

namespace {

RoundState draw_round(const PayoffSpec& spec, Rng& rng, int time_remaining, int bombs_remaining) {
  const int bomb = rng.uniform_int(1, spec.bomb_levels());
  GridPos agent{rng.uniform_int(0, spec.grid_size - 1), rng.uniform_int(0, spec.grid_size - 1)};
  GridPos team{rng.uniform_int(0, spec.grid_size - 1), rng.uniform_int(0, spec.grid_size - 1)};
  return make_round_state(spec, bomb, agent, team, time_remaining, bombs_remaining);
}

}  // namespace

RoundState new_episode(const PayoffSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  return draw_round(spec, rng, spec.episode_time_limit, spec.n_bombs);
}

StepOutcome step(const RoundState& state, Action action, const PayoffSpec& spec, Rng& rng) {
  if (state.terminal()) throw UsageError("step called on a terminal state");
  StepOutcome out;
  out.reward = spec.reward_for(state.bomb_type, action);
  out.time_cost = spec.time_cost(state.bomb_type, action, state.distance_raw);
  const int time_left = std::max(0, state.time_remaining - out.time_cost);
  const int bombs_left = state.bombs_remaining - 1;
  out.next = draw_round(spec, rng, time_left, bombs_left);
  out.done = bombs_left <= 0 || time_left <= 0;
  return out;
}

DiscreteState discretize(const RoundState& state, const PayoffSpec& spec) {
  return {state.bomb_type, spec.distance_bin(state.distance_raw), spec.time_bin(state.time_remaining),
          state.bombs_remaining};
}

std::vector<double> distance_pmf(int grid_size) {
  // |dx| for two independent uniform coordinates on {0..g-1}:
  // P(0) = g / g^2, P(k) = 2 (g - k) / g^2.
  const int g = grid_size;
  std::vector<double> axis(static_cast<std::size_t>(g));
  const double g2 = static_cast<double>(g) * g;
  for (int k = 0; k < g; ++k) axis[static_cast<std::size_t>(k)] = (k == 0 ? g : 2.0 * (g - k)) / g2;
  std::vector<double> pmf(static_cast<std::size_t>(2 * g - 1), 0.0);
  for (int a = 0; a < g; ++a) {
    for (int b = 0; b < g; ++b) {
      pmf[static_cast<std::size_t>(a + b)] += axis[static_cast<std::size_t>(a)] * axis[static_cast<std::size_t>(b)];
    }
  }
  return pmf;
}

Episode::Episode(const PayoffSpec& spec, std::uint64_t seed)
    : spec_(&spec), rng_(derive_seed(seed, 1)), state_(new_episode(spec, seed)) {}

StepOutcome Episode::play(Action a) {
  if (done_) throw UsageError("episode already finished");
  StepOutcome out = step(state_, a, *spec_, rng_);
  total_reward_ += out.reward;
  elapsed_ += out.time_cost;
  ++rounds_;
  done_ = out.done;
  state_ = out.next;
  return out;
}

}  // namespace tomxrl
