#include "tomxrl/xrl_explain.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace tomxrl {

using nlohmann::json;

CounterfactualResult counterfactual_search(const Policy& policy, const DiscreteState& state) {
  const StateIndexer& ix = policy.indexer();
  CounterfactualResult out;
  out.state = state;
  out.action = policy.action(state);

  for (Feature f : kFeatures) {
    FeatureCounterfactual& fc = out.features[static_cast<std::size_t>(f)];
    fc.feature = f;
    const int lo = ix.domain_min(f);
    const int hi = lo + ix.domain_size(f) - 1;
    const int origin = state.feature(f);
    for (int direction : {-1, +1}) {
      for (int b = 1;; ++b) {
        const int v = origin + direction * b;
        if (v < lo || v > hi) break;
        if (fc.steps && b >= *fc.steps) break;
        const DiscreteState probe = state.with_feature(f, v);
        const Action a = policy.action(probe);
        if (a != out.action) {
          fc.steps = b;
          fc.direction = direction;
          fc.action = a;
          fc.counterfactual = probe;
          break;
        }
      }
    }
  }
  return out;
}

ImportanceRanking feature_importance(const CounterfactualResult& cf) {
  ImportanceRanking ranking;
  for (const auto& fc : cf.features) ranking.push_back({fc.feature, fc.steps});
  std::stable_sort(ranking.begin(), ranking.end(), [](const RankedFeature& a, const RankedFeature& b) {
    if (a.steps.has_value() != b.steps.has_value()) return a.steps.has_value();
    if (!a.steps) return false;
    return *a.steps < *b.steps;
  });
  return ranking;
}

void to_json(json& j, const CounterfactualResult& cf) {
  json features = json::object();
  for (const auto& fc : cf.features) {
    json entry;
    if (fc.steps) {
      entry = {{"steps", *fc.steps},
               {"direction", fc.direction < 0 ? "-" : "+"},
               {"counterfactual_action", to_string(*fc.action)},
               {"counterfactual_value", fc.counterfactual->feature(fc.feature)}};
    } else {
      entry = {{"steps", "unreachable"}};
    }
    features[std::string(to_string(fc.feature))] = entry;
  }
  j = json{{"state",
            {{"bomb_type", cf.state.bomb_type},
             {"distance_bin", cf.state.distance_bin},
             {"time_bin", cf.state.time_bin},
             {"bombs_remaining", cf.state.bombs_remaining}}},
           {"action", to_string(cf.action)},
           {"features", features}};
}

json ranking_to_json(const ImportanceRanking& ranking) {
  json out = json::array();
  for (const auto& r : ranking) {
    out.push_back({{"feature", to_string(r.feature)},
                   {"steps", r.steps ? json(*r.steps) : json("unreachable")}});
  }
  return out;
}

}  // namespace tomxrl
