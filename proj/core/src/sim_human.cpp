#include "tomxrl/sim_human.hpp"

#include <nlohmann/json.hpp>

namespace tomxrl {

using nlohmann::json;

std::string_view to_string(RuleKind k) {
  switch (k) {
    case RuleKind::Myopic:
      return "myopic";
    case RuleKind::Projection:
      return "projection";
    case RuleKind::Expert:
      return "expert";
  }
  return "unknown";
}

void ProfileSpec::validate() const {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(p_short) || !in_unit(p_long) || !in_unit(epsilon)) {
    throw ConfigError("profile " + name + ": probabilities must be in [0,1]");
  }
}

void to_json(json& j, const ProfileSpec& p) {
  json attended = json::array();
  for (Feature f : p.attended) attended.push_back(std::string(to_string(f)));
  j = json{{"name", p.name},
           {"attended", attended},
           {"rule", std::string(to_string(p.rule))},
           {"p_short", p.p_short},
           {"p_long", p.p_long},
           {"epsilon", p.epsilon}};
}

void from_json(const json& j, ProfileSpec& p) {
  try {
    p.name = j.value("name", p.name);
    if (j.contains("attended")) {
      p.attended.clear();
      for (const auto& f : j.at("attended")) {
        auto parsed = parse_feature(f.get<std::string>());
        if (!parsed) throw ConfigError("unknown feature " + f.get<std::string>());
        p.attended.push_back(*parsed);
      }
    }
    if (j.contains("rule")) {
      const std::string r = j.at("rule").get<std::string>();
      if (r == "myopic") {
        p.rule = RuleKind::Myopic;
      } else if (r == "projection") {
        p.rule = RuleKind::Projection;
      } else if (r == "expert") {
        p.rule = RuleKind::Expert;
      } else {
        throw ConfigError("unknown rule " + r);
      }
    }
    p.p_short = j.value("p_short", p.p_short);
    p.p_long = j.value("p_long", p.p_long);
    p.epsilon = j.value("epsilon", p.epsilon);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed profile: ") + e.what());
  }
  p.validate();
}

std::map<std::string, ProfileSpec> default_profiles() {
  std::map<std::string, ProfileSpec> out;
  out["time_blind"] = {"time_blind", {Feature::BombType}, RuleKind::Myopic, 0.87, 0.48, 0.05};
  out["distance_blind"] = {"distance_blind", {Feature::BombType, Feature::Time}, RuleKind::Projection,
                           0.87, 0.48, 0.05};
  out["noisy_expert"] = {"noisy_expert", {Feature::BombType, Feature::Distance, Feature::Time},
                         RuleKind::Expert, 0.87, 0.48, 0.05};
  return out;
}

HumanProfile::HumanProfile(const ProfileSpec& spec, std::shared_ptr<const Policy> policy,
                           std::shared_ptr<const PayoffSpec> payoff)
    : p_short(spec.p_short),
      p_long(spec.p_long),
      epsilon(spec.epsilon),
      name_(spec.name),
      rule_(spec.rule),
      policy_(std::move(policy)),
      payoff_(std::move(payoff)) {
  spec.validate();
  if (!policy_ || !payoff_) throw UsageError("profile needs a policy and a payoff spec");
  for (Feature f : spec.attended) attended_ |= static_cast<std::uint8_t>(1U << static_cast<int>(f));
  rebuild();
}

void HumanProfile::attend(Feature f) {
  if (attends(f)) return;
  attended_ |= static_cast<std::uint8_t>(1U << static_cast<int>(f));
  if (rule_ != RuleKind::Expert) rule_ = RuleKind::Projection;
  rebuild();
}

void HumanProfile::rebuild() {
  const StateIndexer& ix = policy_->indexer();
  call_prob_.assign(ix.size(), 0.0);
  switch (rule_) {
    case RuleKind::Myopic:
      for (std::size_t i = 0; i < ix.size(); ++i) {
        const DiscreteState s = ix.state_at(i);
        call_prob_[i] =
            payoff_->reward_for(s.bomb_type, Action::Call) > payoff_->reward_for(s.bomb_type, Action::Solo)
                ? 1.0
                : 0.0;
      }
      break;
    case RuleKind::Expert:
      for (std::size_t i = 0; i < ix.size(); ++i) {
        call_prob_[i] = policy_->actions()[i] == Action::Call ? 1.0 : 0.0;
      }
      break;
    case RuleKind::Projection: {
      // Group states by their attended feature values and take the expert's
      // majority action within each group.
      auto key = [&](const DiscreteState& s) {
        int k = 0;
        for (Feature f : kFeatures) {
          k = k * 16 + (attends(f) ? s.feature(f) + 1 : 0);
        }
        return k;
      };
      std::map<int, std::pair<int, int>> tally;  // key -> (calls, total)
      for (std::size_t i = 0; i < ix.size(); ++i) {
        auto& t = tally[key(ix.state_at(i))];
        t.first += policy_->actions()[i] == Action::Call ? 1 : 0;
        t.second += 1;
      }
      for (std::size_t i = 0; i < ix.size(); ++i) {
        const auto& t = tally[key(ix.state_at(i))];
        call_prob_[i] = 2 * t.first > t.second ? 1.0 : 0.0;
      }
      break;
    }
  }
}

double HumanProfile::call_probability(const DiscreteState& s) const {
  return call_prob_[policy_->indexer().index(s)];
}

Action act(const HumanProfile& profile, const DiscreteState& state,
           const std::optional<Intervention>& pending, Rng& rng) {
  if (pending && pending->recommended && rng.bernoulli(profile.p_short)) return *pending->recommended;
  if (rng.bernoulli(profile.epsilon)) return rng.uniform_int(0, 1) == 1 ? Action::Call : Action::Solo;
  return rng.bernoulli(profile.call_probability(state)) ? Action::Call : Action::Solo;
}

HumanProfile absorb(HumanProfile profile, const Intervention& intervention, Rng& rng) {
  if (rng.bernoulli(profile.p_long)) profile.attend(intervention.feature);
  return profile;
}

}  // namespace tomxrl
