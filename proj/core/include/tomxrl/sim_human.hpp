#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tomxrl/expert_policy.hpp"
#include "tomxrl/intervention.hpp"

namespace tomxrl {

// How a simulated player maps what it pays attention to onto an action.
//   Myopic:     the action with the larger immediate reward for the bomb type.
//   Projection: the expert's majority action over everything it ignores
//               (unattended features and bombs remaining, uniformly weighted).
//   Expert:     the expert policy itself.
enum class RuleKind { Myopic, Projection, Expert };

std::string_view to_string(RuleKind k);

struct ProfileSpec {
  std::string name;
  std::vector<Feature> attended;
  RuleKind rule = RuleKind::Projection;
  double p_short = 0.87;
  double p_long = 0.48;
  double epsilon = 0.05;

  void validate() const;
};

void to_json(nlohmann::json& j, const ProfileSpec& p);
void from_json(const nlohmann::json& j, ProfileSpec& p);

// time_blind, distance_blind, noisy_expert.
std::map<std::string, ProfileSpec> default_profiles();

class HumanProfile {
 public:
  HumanProfile(const ProfileSpec& spec, std::shared_ptr<const Policy> policy,
               std::shared_ptr<const PayoffSpec> payoff);

  const std::string& name() const { return name_; }
  std::uint8_t attended_mask() const { return attended_; }
  bool attends(Feature f) const { return (attended_ >> static_cast<int>(f)) & 1U; }
  RuleKind rule() const { return rule_; }
  double p_short = 0.0;
  double p_long = 0.0;
  double epsilon = 0.0;

  // Probability of Call under the base rule (before noise and compliance).
  double call_probability(const DiscreteState& s) const;

  // Adds a feature to the attended set and re-derives the rule as a projection
  // of the expert policy; no-op when already attended.
  void attend(Feature f);

 private:
  void rebuild();

  std::string name_;
  std::uint8_t attended_ = 0;
  RuleKind rule_ = RuleKind::Projection;
  std::shared_ptr<const Policy> policy_;
  std::shared_ptr<const PayoffSpec> payoff_;
  std::vector<double> call_prob_;  // indexed like the policy
};

// With a pending recommendation, follows it with probability p_short;
// otherwise applies the base rule with epsilon-uniform noise.
Action act(const HumanProfile& profile, const DiscreteState& state,
           const std::optional<Intervention>& pending, Rng& rng);

// With probability p_long the emphasized feature becomes attended for good.
HumanProfile absorb(HumanProfile profile, const Intervention& intervention, Rng& rng);

}  // namespace tomxrl
