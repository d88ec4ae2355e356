#include "tomxrl/session.hpp"

#include <map>

#include <nlohmann/json.hpp>

namespace tomxrl {

using nlohmann::json;

std::string_view to_string(ConditionKind k) {
  switch (k) {
    case ConditionKind::TomXrl:
      return "ToM+XRL";
    case ConditionKind::XrlOnly:
      return "XRL-only";
    case ConditionKind::TomOnly:
      return "ToM-only";
    case ConditionKind::None:
      return "None";
  }
  return "unknown";
}

std::optional<ConditionKind> parse_condition(std::string_view s) {
  for (ConditionKind k : {ConditionKind::TomXrl, ConditionKind::XrlOnly, ConditionKind::TomOnly,
                          ConditionKind::None}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

EngineContext make_context(PayoffSpec payoff, Policy policy, Templates templates, TomConfig tom) {
  payoff.validate();
  tom.validate();
  if (!(policy.indexer() == StateIndexer::from_spec(payoff))) {
    throw ConfigError("policy dimensions do not match the payoff spec");
  }
  EngineContext ctx;
  ctx.payoff = std::make_shared<const PayoffSpec>(std::move(payoff));
  ctx.policy = std::make_shared<const Policy>(std::move(policy));
  ctx.templates = std::make_shared<const Templates>(std::move(templates));
  ctx.tom = std::move(tom);
  return ctx;
}

std::uint64_t episode_seed(std::uint64_t session_seed, int trial) {
  return derive_seed(session_seed, 1000 + static_cast<std::uint64_t>(trial));
}

SessionEngine::SessionEngine(EngineContext context, SessionOptions options)
    : context_(std::move(context)),
      options_(std::move(options)),
      filter_rng_(derive_seed(options_.seed, 7)),
      tom_(*context_.payoff, context_.tom),
      episode_(*context_.payoff, episode_seed(options_.seed, 1)) {
  if (options_.trials < 1) throw ConfigError("trials must be >= 1");
  if (!(options_.rho >= 0.0 && options_.rho <= 1.0)) throw ConfigError("rho must be in [0,1]");
  start_round();
}

void SessionEngine::start_round() {
  pending_.reset();
  const DiscreteState s = discretize(episode_.state(), *context_.payoff);
  const int next_round = round_ + 1;
  switch (options_.condition) {
    case ConditionKind::TomXrl:
      pending_ = decide(s, tom_, *context_.policy, *context_.templates, next_round);
      break;
    case ConditionKind::XrlOnly:
      if (filter_rng_.bernoulli(options_.rho)) {
        pending_ = explain_expert(s, *context_.policy, *context_.templates, next_round);
      }
      break;
    case ConditionKind::TomOnly:
      if (filter_rng_.bernoulli(options_.rho) && last_action_) {
        pending_ = strategy_tip(*last_action_, *context_.templates, next_round);
      }
      break;
    case ConditionKind::None:
      break;
  }
}

ActionResult SessionEngine::apply(Action a) {
  if (finished_) throw UsageError("session already finished");
  RoundRecord rec;
  rec.participant = options_.participant;
  rec.condition = std::string(to_string(options_.condition));
  rec.trial = trial_;
  rec.training = training();
  rec.round = round_ + 1;
  rec.round_in_trial = episode_.rounds() + 1;
  rec.state = episode_.state();
  rec.intervention = pending_;
  rec.action = a;
  const DiscreteState s = discretize(rec.state, *context_.payoff);
  rec.expert_action = recommend(*context_.policy, s);
  rec.tom_initialized = tom_.initialized();
  if (tom_.initialized()) {
    const Prediction p = tom_.predict(s);
    rec.a_pred = p.action;
    rec.confidence = p.confidence;
  }
  rec.threshold = tom_.threshold();
  rec.dag_before = tom_.dag().edge_string();

  const StepOutcome out = episode_.play(a);
  rec.reward = out.reward;
  rec.time_cost = out.time_cost;
  rec.trial_score = episode_.total_reward();
  rec.episode_done = out.done;

  const TomStepReport report = tom_.observe({s, a});
  rec.structure_pass = report.maintenance;
  rec.structure_changed = report.structure_changed;
  rec.dag_after = tom_.dag().edge_string();
  rec.dag_hash = hex64(tom_.dag().hash());
  log_.push_back(rec);

  ++round_;
  total_score_ += out.reward;
  last_action_ = a;

  ActionResult result{out.reward, out.time_cost, out.done, false};
  if (out.done) {
    if (trial_ >= options_.trials) {
      finished_ = true;
      pending_.reset();
      result.finished = true;
      return result;
    }
    ++trial_;
    episode_ = Episode(*context_.payoff, episode_seed(options_.seed, trial_));
  }
  start_round();
  return result;
}

json SessionEngine::view() const {
  const RoundState& s = episode_.state();
  const PayoffSpec& spec = *context_.payoff;
  json intervention = nullptr;
  if (pending_) {
    intervention = {{"kind", pending_->kind == InterventionKind::Tip ? "tip" : "recommendation"},
                    {"recommended", pending_->recommended ? json(std::string(to_string(*pending_->recommended)))
                                                          : json(nullptr)},
                    {"feature", std::string(to_string(pending_->feature))},
                    {"text", pending_->text}};
  }
  return json{{"condition", std::string(to_string(options_.condition))},
              {"trial", trial_},
              {"trials", options_.trials},
              {"training", training()},
              {"round", round_in_trial()},
              {"bomb_type", s.bomb_type},
              {"distance_bin", distance_bin_name(s.distance_bin, spec.distance_bins())},
              {"positions", {{"agent", {s.agent_pos.x, s.agent_pos.y}}, {"team", {s.team_pos.x, s.team_pos.y}}}},
              {"grid_size", spec.grid_size},
              {"payoff",
               {{"Solo", spec.reward_for(s.bomb_type, Action::Solo)},
                {"Call", spec.reward_for(s.bomb_type, Action::Call)}}},
              {"time_remaining", s.time_remaining},
              {"bombs_remaining", s.bombs_remaining},
              {"bombs_handled", bombs_handled()},
              {"score", trial_score()},
              {"total_score", total_score_},
              {"intervention", intervention},
              {"finished", finished_}};
}

void to_json(json& j, const RoundRecord& r) {
  j = json{{"participant", r.participant},
           {"condition", r.condition},
           {"trial", r.trial},
           {"training", r.training},
           {"round", r.round},
           {"round_in_trial", r.round_in_trial},
           {"state", r.state},
           {"intervention", r.intervention ? json(*r.intervention) : json(nullptr)},
           {"action", std::string(to_string(r.action))},
           {"expert_action", std::string(to_string(r.expert_action))},
           {"reward", r.reward},
           {"time_cost", r.time_cost},
           {"a_pred", r.a_pred ? json(std::string(to_string(*r.a_pred))) : json(nullptr)},
           {"confidence", r.confidence ? json(*r.confidence) : json(nullptr)},
           {"threshold", r.threshold},
           {"tom_initialized", r.tom_initialized},
           {"dag_before", r.dag_before},
           {"dag_after", r.dag_after},
           {"dag_hash", r.dag_hash},
           {"structure_pass", r.structure_pass},
           {"structure_changed", r.structure_changed},
           {"trial_score", r.trial_score},
           {"episode_done", r.episode_done}};
}

void from_json(const json& j, RoundRecord& r) {
  try {
    auto action = [](const json& v) {
      auto a = parse_action(v.get<std::string>());
      if (!a) throw DataError("invalid action in log");
      return *a;
    };
    r.participant = j.at("participant").get<std::string>();
    r.condition = j.at("condition").get<std::string>();
    r.trial = j.at("trial").get<int>();
    r.training = j.at("training").get<bool>();
    r.round = j.at("round").get<int>();
    r.round_in_trial = j.at("round_in_trial").get<int>();
    r.state = j.at("state").get<RoundState>();
    r.intervention.reset();
    if (!j.at("intervention").is_null()) r.intervention = j.at("intervention").get<Intervention>();
    r.action = action(j.at("action"));
    r.expert_action = action(j.at("expert_action"));
    r.reward = j.at("reward").get<double>();
    r.time_cost = j.at("time_cost").get<int>();
    r.a_pred.reset();
    if (!j.at("a_pred").is_null()) r.a_pred = action(j.at("a_pred"));
    r.confidence.reset();
    if (!j.at("confidence").is_null()) r.confidence = j.at("confidence").get<double>();
    r.threshold = j.at("threshold").get<double>();
    r.tom_initialized = j.at("tom_initialized").get<bool>();
    r.dag_before = j.at("dag_before").get<std::string>();
    r.dag_after = j.at("dag_after").get<std::string>();
    r.dag_hash = j.at("dag_hash").get<std::string>();
    r.structure_pass = j.at("structure_pass").get<bool>();
    r.structure_changed = j.at("structure_changed").get<bool>();
    r.trial_score = j.at("trial_score").get<double>();
    r.episode_done = j.at("episode_done").get<bool>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed log record: ") + e.what());
  }
}

std::vector<double> trial_scores(const std::vector<RoundRecord>& log) {
  std::map<int, double> by_trial;
  for (const RoundRecord& r : log) by_trial[r.trial] += r.reward;
  std::vector<double> out;
  for (const auto& [t, s] : by_trial) out.push_back(s);
  return out;
}

}  // namespace tomxrl
