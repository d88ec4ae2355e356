#pragma once

#include <array>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tomxrl/expert_policy.hpp"

namespace tomxrl {

// Closest single-feature counterfactual for one feature. `steps` is the
// minimal number of ordinal steps b_q that flips the policy's action, or
// nullopt when no value of the feature flips it.
struct FeatureCounterfactual {
  Feature feature = Feature::BombType;
  std::optional<int> steps;
  int direction = 0;  // -1 or +1 when reachable, 0 otherwise
  std::optional<Action> action;
  std::optional<DiscreteState> counterfactual;

  bool reachable() const { return steps.has_value(); }
};

struct CounterfactualResult {
  DiscreteState state;
  Action action = Action::Solo;
  std::array<FeatureCounterfactual, 3> features;

  const FeatureCounterfactual& at(Feature f) const {
    return features[static_cast<std::size_t>(f)];
  }
};

struct RankedFeature {
  Feature feature = Feature::BombType;
  std::optional<int> steps;
};

// Ascending by steps; ties and unreachable features keep the fixed feature
// order (bomb_type, distance, time); unreachable features come last.
using ImportanceRanking = std::vector<RankedFeature>;

// Scans b = 1, 2, ... in both directions within each feature's domain and
// keeps the first flip per direction; the smaller wins, ties go to -1.
// bombs_remaining is held fixed.
CounterfactualResult counterfactual_search(const Policy& policy, const DiscreteState& state);

ImportanceRanking feature_importance(const CounterfactualResult& cf);

void to_json(nlohmann::json& j, const CounterfactualResult& cf);
nlohmann::json ranking_to_json(const ImportanceRanking& ranking);

}  // namespace tomxrl
