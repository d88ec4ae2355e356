#include "tomxrl/expert_policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace tomxrl {

using nlohmann::json;

bool StateIndexer::contains(const DiscreteState& s) const {
  return s.bomb_type >= 1 && s.bomb_type <= bomb_levels && s.distance_bin >= 0 &&
         s.distance_bin < distance_bins && s.time_bin >= 0 && s.time_bin < time_bins &&
         s.bombs_remaining >= 1 && s.bombs_remaining <= n_bombs;
}

std::size_t StateIndexer::index(const DiscreteState& s) const {
  if (!contains(s)) throw UsageError("state is not indexed by the policy");
  std::size_t i = static_cast<std::size_t>(s.bomb_type - 1);
  i = i * distance_bins + static_cast<std::size_t>(s.distance_bin);
  i = i * time_bins + static_cast<std::size_t>(s.time_bin);
  i = i * n_bombs + static_cast<std::size_t>(s.bombs_remaining - 1);
  return i;
}

DiscreteState StateIndexer::state_at(std::size_t i) const {
  if (i >= size()) throw UsageError("state index out of range");
  DiscreteState s;
  s.bombs_remaining = static_cast<int>(i % n_bombs) + 1;
  i /= n_bombs;
  s.time_bin = static_cast<int>(i % time_bins);
  i /= time_bins;
  s.distance_bin = static_cast<int>(i % distance_bins);
  i /= distance_bins;
  s.bomb_type = static_cast<int>(i) + 1;
  return s;
}

int StateIndexer::domain_size(Feature f) const {
  switch (f) {
    case Feature::BombType:
      return bomb_levels;
    case Feature::Distance:
      return distance_bins;
    case Feature::Time:
      return time_bins;
  }
  return 0;
}

namespace {

// Distribution of the time-bin outcome for one (bin, cost distribution):
// entry k < time_bins is "next time bin k", entry time_bins is "time ran out".
std::vector<double> time_outcomes(const PayoffSpec& spec, int time_bin,
                                  const std::vector<std::pair<int, double>>& costs) {
  std::vector<double> out(static_cast<std::size_t>(spec.time_bins()) + 1, 0.0);
  std::vector<int> times;
  for (int t = 1; t <= spec.episode_time_limit; ++t) {
    if (spec.time_bin(t) == time_bin) times.push_back(t);
  }
  if (times.empty()) return out;
  const double w = 1.0 / static_cast<double>(times.size());
  for (int t : times) {
    for (const auto& [cost, p] : costs) {
      const int left = t - cost;
      const std::size_t k = left <= 0 ? static_cast<std::size_t>(spec.time_bins())
                                      : static_cast<std::size_t>(spec.time_bin(left));
      out[k] += w * p;
    }
  }
  return out;
}

}  // namespace

DiscreteMdp build_mdp(const PayoffSpec& spec, const MdpOptions& options) {
  spec.validate();
  if (!(options.gamma >= 0.0 && options.gamma <= 1.0)) throw ConfigError("gamma must be in [0,1]");
  DiscreteMdp mdp;
  mdp.indexer = StateIndexer::from_spec(spec);
  mdp.gamma = options.gamma;
  const StateIndexer& ix = mdp.indexer;
  if (ix.size() + 1 > options.state_cap) {
    throw ConfigError("state space of " + std::to_string(ix.size() + 1) +
                      " states exceeds the configured cap");
  }

  // Distance bins: marginal probability and conditional distance distribution.
  const std::vector<double> pmf = distance_pmf(spec.grid_size);
  std::vector<double> bin_prob(static_cast<std::size_t>(ix.distance_bins), 0.0);
  std::vector<std::vector<std::pair<int, double>>> bin_distances(
      static_cast<std::size_t>(ix.distance_bins));
  for (int d = 0; d < static_cast<int>(pmf.size()); ++d) {
    const auto b = static_cast<std::size_t>(spec.distance_bin(d));
    bin_prob[b] += pmf[static_cast<std::size_t>(d)];
    bin_distances[b].emplace_back(d, pmf[static_cast<std::size_t>(d)]);
  }
  for (std::size_t b = 0; b < bin_distances.size(); ++b) {
    if (bin_prob[b] > 0.0) {
      for (auto& [d, p] : bin_distances[b]) p /= bin_prob[b];
    } else {
      // Unreachable bin: use its lower edge so costs stay defined.
      const int lo = b == 0 ? 0 : spec.distance_cuts[b - 1] + 1;
      bin_distances[b] = {{lo, 1.0}};
    }
  }

  const std::size_t n = ix.size();
  mdp.transitions.resize(n + 1);
  mdp.rewards.assign(n + 1, {0.0, 0.0});
  const double bomb_p = 1.0 / ix.bomb_levels;

  for (std::size_t i = 0; i < n; ++i) {
    const DiscreteState s = ix.state_at(i);
    for (Action a : kActions) {
      const auto ai = static_cast<std::size_t>(a);
      mdp.rewards[i][ai] = spec.reward_for(s.bomb_type, a);
      auto& row = mdp.transitions[i][ai];
      if (s.bombs_remaining == 1) {
        row.push_back({ix.terminal(), 1.0});
        continue;
      }
      std::vector<std::pair<int, double>> costs;
      if (a == Action::Solo) {
        costs.emplace_back(spec.time_cost(s.bomb_type, a, 0), 1.0);
      } else {
        for (const auto& [d, p] : bin_distances[static_cast<std::size_t>(s.distance_bin)]) {
          costs.emplace_back(spec.time_cost(s.bomb_type, a, d), p);
        }
      }
      const std::vector<double> tb = time_outcomes(spec, s.time_bin, costs);
      const double p_timeout = tb.back();
      if (p_timeout > 0.0) row.push_back({ix.terminal(), p_timeout});
      for (int b = 1; b <= ix.bomb_levels; ++b) {
        for (int db = 0; db < ix.distance_bins; ++db) {
          const double pd = bin_prob[static_cast<std::size_t>(db)];
          if (pd <= 0.0) continue;
          for (int t = 0; t < ix.time_bins; ++t) {
            const double pt = tb[static_cast<std::size_t>(t)];
            if (pt <= 0.0) continue;
            row.push_back({ix.index({b, db, t, s.bombs_remaining - 1}), bomb_p * pd * pt});
          }
        }
      }
    }
  }
  mdp.transitions[n][0] = {{ix.terminal(), 1.0}};
  mdp.transitions[n][1] = {{ix.terminal(), 1.0}};
  return mdp;
}

std::array<double, 2> q_values(const DiscreteMdp& mdp, const std::vector<double>& values,
                               std::size_t state) {
  std::array<double, 2> q{};
  for (Action a : kActions) {
    const auto ai = static_cast<std::size_t>(a);
    double future = 0.0;
    for (const Transition& t : mdp.transitions[state][ai]) future += t.prob * values[t.next];
    q[ai] = mdp.rewards[state][ai] + mdp.gamma * future;
  }
  return q;
}

Action greedy_action(const std::array<double, 2>& q) {
  const double scale = std::max(std::abs(q[0]), std::abs(q[1]));
  return q[1] - q[0] > 1e-10 * scale ? Action::Call : Action::Solo;
}

Policy::Policy(StateIndexer indexer, std::vector<Action> actions, std::vector<double> values)
    : indexer_(indexer), actions_(std::move(actions)), values_(std::move(values)) {
  if (actions_.size() != indexer_.size() || values_.size() != indexer_.size()) {
    throw UsageError("policy tables do not match the state index");
  }
}

Policy Policy::constant(const StateIndexer& indexer, Action a) {
  return Policy(indexer, std::vector<Action>(indexer.size(), a),
                std::vector<double>(indexer.size(), 0.0));
}

Action Policy::action(const DiscreteState& s) const { return actions_[indexer_.index(s)]; }

double Policy::value(const DiscreteState& s) const { return values_[indexer_.index(s)]; }

Policy value_iteration(const DiscreteMdp& mdp, const SolverOptions& options) {
  if (mdp.gamma >= 1.0) {
    // Undiscounted solving relies on every non-terminal action making progress
    // towards the absorbing state, which holds when bombs_remaining decreases.
    for (std::size_t i = 0; i + 1 < mdp.num_states(); ++i) {
      const int bombs = mdp.indexer.state_at(i).bombs_remaining;
      for (const auto& row : mdp.transitions[i]) {
        for (const Transition& t : row) {
          if (t.next != mdp.indexer.terminal() &&
              mdp.indexer.state_at(t.next).bombs_remaining >= bombs) {
            throw SolverError("gamma = 1 requires guaranteed episode termination");
          }
        }
      }
    }
  }
  const std::size_t n = mdp.num_states();
  std::vector<double> v(n, 0.0);
  std::vector<double> next(n, 0.0);
  int iter = 0;
  for (;; ++iter) {
    if (iter >= options.max_iterations) {
      throw SolverError("value iteration did not converge within " +
                        std::to_string(options.max_iterations) + " iterations");
    }
    double residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const auto q = q_values(mdp, v, s);
      next[s] = std::max(q[0], q[1]);
      residual = std::max(residual, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (residual <= options.tol) break;
  }

  const std::size_t live = mdp.indexer.size();
  std::vector<Action> actions(live);
  std::vector<double> values(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(live));
  for (std::size_t s = 0; s < live; ++s) actions[s] = greedy_action(q_values(mdp, v, s));
  Policy p(mdp.indexer, std::move(actions), std::move(values));
  p.gamma = mdp.gamma;
  p.tolerance = options.tol;
  p.iterations = iter + 1;
  return p;
}

Action recommend(const Policy& policy, const DiscreteState& state) { return policy.action(state); }

Action recommend(const Policy& policy, const RoundState& state, const PayoffSpec& spec) {
  return policy.action(discretize(state, spec));
}

std::string state_key(const DiscreteState& s, const StateIndexer& ix) {
  return "bomb_type=" + std::to_string(s.bomb_type) +
         ",distance=" + distance_bin_name(s.distance_bin, ix.distance_bins) +
         ",time=" + time_bin_name(s.time_bin, ix.time_bins) +
         ",bombs_remaining=" + std::to_string(s.bombs_remaining);
}

DiscreteState parse_discrete_state(const json& j, const StateIndexer& ix) {
  auto bin = [](const json& v, int n, std::string (*name)(int, int), const char* what) {
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_string()) {
      for (int b = 0; b < n; ++b) {
        if (name(b, n) == v.get<std::string>()) return b;
      }
    }
    throw DataError(std::string("bad ") + what + ": " + v.dump());
  };
  DiscreteState s;
  try {
    s.bomb_type = j.at("bomb_type").get<int>();
    s.distance_bin = bin(j.at("distance_bin"), ix.distance_bins, distance_bin_name, "distance_bin");
    s.time_bin = bin(j.at("time_bin"), ix.time_bins, time_bin_name, "time_bin");
    s.bombs_remaining = j.at("bombs_remaining").get<int>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed state: ") + e.what());
  }
  if (!ix.contains(s)) throw DataError("state out of range: " + j.dump());
  return s;
}

void to_json(json& j, const Policy& p) {
  const StateIndexer& ix = p.indexer();
  json states = json::object();
  for (std::size_t i = 0; i < ix.size(); ++i) {
    const DiscreteState s = ix.state_at(i);
    states[state_key(s, ix)] = {{"action", to_string(p.actions()[i])}, {"value", p.values()[i]}};
  }
  j = json{{"format", "tomxrl-policy"},
           {"version", 1},
           {"gamma", p.gamma},
           {"tolerance", p.tolerance},
           {"iterations", p.iterations},
           {"spec_hash", hex64(p.spec_hash)},
           {"dims",
            {{"bomb_levels", ix.bomb_levels},
             {"distance_bins", ix.distance_bins},
             {"time_bins", ix.time_bins},
             {"n_bombs", ix.n_bombs}}},
           {"states", states}};
}

void from_json(const json& j, Policy& p) {
  try {
    if (j.at("format").get<std::string>() != "tomxrl-policy") {
      throw ConfigError("not a policy file");
    }
    const json& d = j.at("dims");
    StateIndexer ix{d.at("bomb_levels").get<int>(), d.at("distance_bins").get<int>(),
                    d.at("time_bins").get<int>(), d.at("n_bombs").get<int>()};
    std::vector<Action> actions(ix.size());
    std::vector<double> values(ix.size());
    const json& states = j.at("states");
    for (std::size_t i = 0; i < ix.size(); ++i) {
      const std::string key = state_key(ix.state_at(i), ix);
      const json& entry = states.at(key);
      auto a = parse_action(entry.at("action").get<std::string>());
      if (!a) throw ConfigError("invalid action for state " + key);
      actions[i] = *a;
      values[i] = entry.at("value").get<double>();
    }
    p = Policy(ix, std::move(actions), std::move(values));
    p.gamma = j.at("gamma").get<double>();
    p.tolerance = j.at("tolerance").get<double>();
    p.iterations = j.value("iterations", 0);
    p.spec_hash = std::stoull(j.at("spec_hash").get<std::string>(), nullptr, 16);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed policy: ") + e.what());
  }
}

void save_policy(const Policy& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write policy to " + path);
  out << json(p).dump(2) << '\n';
}

Policy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open policy: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return j.get<Policy>();
}

Policy train_policy(const PayoffSpec& spec, const MdpOptions& mdp_options,
                    const SolverOptions& solver_options) {
  Policy p = value_iteration(build_mdp(spec, mdp_options), solver_options);
  p.spec_hash = spec.hash();
  return p;
}

}  // namespace tomxrl
