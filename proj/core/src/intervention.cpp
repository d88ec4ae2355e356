#include "tomxrl/intervention.hpp"

#include <nlohmann/json.hpp>

namespace tomxrl {

using nlohmann::json;

Templates Templates::defaults() {
  Templates t;
  t.lead = {"Consider soloing this round.", "Consider calling for help this round."};
  // [action][feature]; feature order bomb_type, distance, time.
  t.clause[0] = {
      "This bomb type can be defused alone for a good score.",
      "Your teammates are far away, so waiting for them would take a long time.",
      "Calling for help may cost too much time and reduce the number of bombs you can attend to.",
  };
  t.clause[1] = {
      "This bomb type earns far more points when your teammates help.",
      "Your teammates are close by, so help will arrive quickly.",
      "You still have enough time left to wait for your teammates.",
  };
  t.tips = {
      "Harder bombs are worth much more when defused with help, easier ones are worth more alone.",
      "Calling for help takes longer the farther away your teammates are.",
      "Keep an eye on the clock: every action uses up some of the remaining time.",
  };
  return t;
}

void to_json(json& j, const Templates& t) {
  j = json::object();
  for (Action a : kActions) {
    json entry{{"lead", t.lead[static_cast<std::size_t>(a)]}};
    for (Feature f : kFeatures) {
      entry[std::string(to_string(f))] = t.clause[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)];
    }
    j[std::string(to_string(a))] = entry;
  }
  json tips = json::object();
  for (Feature f : kFeatures) tips[std::string(to_string(f))] = t.tips[static_cast<std::size_t>(f)];
  j["tips"] = tips;
}

void from_json(const json& j, Templates& t) {
  try {
    for (Action a : kActions) {
      const json& entry = j.at(std::string(to_string(a)));
      t.lead[static_cast<std::size_t>(a)] = entry.at("lead").get<std::string>();
      for (Feature f : kFeatures) {
        t.clause[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)] =
            entry.at(std::string(to_string(f))).get<std::string>();
      }
    }
    const json& tips = j.at("tips");
    for (Feature f : kFeatures) {
      t.tips[static_cast<std::size_t>(f)] = tips.at(std::string(to_string(f))).get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("missing or malformed template: ") + e.what());
  }
}

std::string render_lead(const Templates& t, Action recommended) {
  const std::string& lead = t.lead[static_cast<std::size_t>(recommended)];
  if (lead.empty()) throw ConfigError("missing lead template for " + std::string(to_string(recommended)));
  return lead;
}

std::string render(const Templates& t, Action recommended, Feature feature) {
  const std::string& clause = t.clause[static_cast<std::size_t>(recommended)][static_cast<std::size_t>(feature)];
  if (clause.empty()) {
    throw ConfigError("missing template for (" + std::string(to_string(recommended)) + ", " +
                      std::string(to_string(feature)) + ")");
  }
  return render_lead(t, recommended) + " " + clause;
}

std::string render_tip(const Templates& t, Feature feature) {
  const std::string& tip = t.tips[static_cast<std::size_t>(feature)];
  if (tip.empty()) throw ConfigError("missing tip template for " + std::string(to_string(feature)));
  return tip;
}

Emphasis select_emphasis(const ImportanceRanking& ranking, const Dag& human_dag) {
  if (ranking.empty()) throw UsageError("empty importance ranking");
  for (const RankedFeature& r : ranking) {
    if (!r.steps) continue;
    if (!human_dag.has_edge(node_of(r.feature), kActionNode)) return {r.feature, true};
  }
  return {ranking.front().feature, ranking.front().steps.has_value()};
}

namespace {

std::string render_emphasis(const Templates& t, Action a, const Emphasis& e) {
  return e.has_counterfactual ? render(t, a, e.feature) : render_lead(t, a);
}

json optional_action(const std::optional<Action>& a) {
  return a ? json(std::string(to_string(*a))) : json(nullptr);
}

std::optional<Action> read_optional_action(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return parse_action(j.at(key).get<std::string>());
}

std::optional<double> read_optional_double(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::optional<Intervention> decide(const DiscreteState& state, const TomModel& tom,
                                   const Policy& policy, const Templates& templates, int round) {
  if (!tom.initialized()) return std::nullopt;
  const Prediction pred = tom.predict(state);
  const Action expert = recommend(policy, state);
  if (!(pred.confidence > tom.threshold() && pred.action != expert)) return std::nullopt;

  const ImportanceRanking ranking = feature_importance(counterfactual_search(policy, state));
  const Emphasis e = select_emphasis(ranking, tom.dag());
  Intervention out;
  out.kind = InterventionKind::Recommendation;
  out.recommended = expert;
  out.feature = e.feature;
  out.has_counterfactual = e.has_counterfactual;
  out.text = render_emphasis(templates, expert, e);
  out.round = round;
  out.a_pred = pred.action;
  out.confidence = pred.confidence;
  out.threshold = tom.threshold();
  return out;
}

Intervention explain_expert(const DiscreteState& state, const Policy& policy,
                            const Templates& templates, int round) {
  const Action expert = recommend(policy, state);
  const ImportanceRanking ranking = feature_importance(counterfactual_search(policy, state));
  const Emphasis e{ranking.front().feature, ranking.front().steps.has_value()};
  Intervention out;
  out.kind = InterventionKind::Recommendation;
  out.recommended = expert;
  out.feature = e.feature;
  out.has_counterfactual = e.has_counterfactual;
  out.text = render_emphasis(templates, expert, e);
  out.round = round;
  return out;
}

Intervention strategy_tip(Action last_action, const Templates& templates, int round) {
  Intervention out;
  out.kind = InterventionKind::Tip;
  out.feature = last_action == Action::Call ? Feature::Distance : Feature::BombType;
  out.has_counterfactual = false;
  out.text = render_tip(templates, out.feature);
  out.round = round;
  return out;
}

void to_json(json& j, const Intervention& i) {
  j = json{{"kind", i.kind == InterventionKind::Tip ? "tip" : "recommendation"},
           {"recommended", optional_action(i.recommended)},
           {"feature", std::string(to_string(i.feature))},
           {"has_counterfactual", i.has_counterfactual},
           {"text", i.text},
           {"round", i.round},
           {"a_pred", optional_action(i.a_pred)},
           {"confidence", i.confidence ? json(*i.confidence) : json(nullptr)},
           {"threshold", i.threshold ? json(*i.threshold) : json(nullptr)}};
}

void from_json(const json& j, Intervention& i) {
  i.kind = j.at("kind").get<std::string>() == "tip" ? InterventionKind::Tip : InterventionKind::Recommendation;
  i.recommended = read_optional_action(j, "recommended");
  auto f = parse_feature(j.at("feature").get<std::string>());
  if (!f) throw DataError("unknown feature in intervention");
  i.feature = *f;
  i.has_counterfactual = j.value("has_counterfactual", true);
  i.text = j.at("text").get<std::string>();
  i.round = j.at("round").get<int>();
  i.a_pred = read_optional_action(j, "a_pred");
  i.confidence = read_optional_double(j, "confidence");
  i.threshold = read_optional_double(j, "threshold");
}

}  // namespace tomxrl
