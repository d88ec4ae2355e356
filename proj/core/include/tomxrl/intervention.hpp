#pragma once

#include <array>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "tomxrl/expert_policy.hpp"
#include "tomxrl/tom_model.hpp"
#include "tomxrl/xrl_explain.hpp"

namespace tomxrl {

// Sentence templates: one leading recommendation per action, one explanation
// clause per (action, feature), and one generic tip per feature.
struct Templates {
  std::array<std::string, 2> lead;
  std::array<std::array<std::string, 3>, 2> clause;
  std::array<std::string, 3> tips;

  static Templates defaults();
};

void to_json(nlohmann::json& j, const Templates& t);
void from_json(const nlohmann::json& j, Templates& t);

// Throws ConfigError when the needed template is missing.
std::string render(const Templates& t, Action recommended, Feature feature);
std::string render_lead(const Templates& t, Action recommended);
std::string render_tip(const Templates& t, Feature feature);

struct Emphasis {
  Feature feature = Feature::BombType;
  bool has_counterfactual = false;
};

// Most important reachable feature whose edge into action is missing from the
// human's DAG; otherwise the most important feature overall.
Emphasis select_emphasis(const ImportanceRanking& ranking, const Dag& human_dag);

enum class InterventionKind { Recommendation, Tip };

struct Intervention {
  InterventionKind kind = InterventionKind::Recommendation;
  std::optional<Action> recommended;  // unset for tips
  Feature feature = Feature::BombType;
  bool has_counterfactual = true;
  std::string text;
  int round = 0;
  std::optional<Action> a_pred;
  std::optional<double> confidence;
  std::optional<double> threshold;

  friend bool operator==(const Intervention&, const Intervention&) = default;
};

void to_json(nlohmann::json& j, const Intervention& i);
void from_json(const nlohmann::json& j, Intervention& i);

// Issues a recommendation iff the model is initialized, its confidence is
// strictly above its threshold, and the predicted action differs from the
// expert's.
std::optional<Intervention> decide(const DiscreteState& state, const TomModel& tom,
                                   const Policy& policy, const Templates& templates, int round);

// The expert action with the top-ranked feature as explanation, no gating.
Intervention explain_expert(const DiscreteState& state, const Policy& policy,
                            const Templates& templates, int round);

// Generic strategy tip keyed to the previous action: calling is governed by
// the distance to the team, soloing by the bomb type.
Intervention strategy_tip(Action last_action, const Templates& templates, int round);

}  // namespace tomxrl
