#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tomxrl/expert_policy.hpp"
#include "tomxrl/intervention.hpp"
#include "tomxrl/task_env.hpp"
#include "tomxrl/tom_model.hpp"

namespace tomxrl {

enum class ConditionKind { TomXrl, XrlOnly, TomOnly, None };

std::string_view to_string(ConditionKind k);
std::optional<ConditionKind> parse_condition(std::string_view s);

// Immutable pieces shared by every session.
struct EngineContext {
  std::shared_ptr<const PayoffSpec> payoff;
  std::shared_ptr<const Policy> policy;
  std::shared_ptr<const Templates> templates;
  TomConfig tom;
};

EngineContext make_context(PayoffSpec payoff, Policy policy, Templates templates, TomConfig tom);

// One logged round. Everything the metrics need is recoverable from these.
struct RoundRecord {
  std::string participant;
  std::string condition;
  int trial = 1;
  bool training = false;
  int round = 0;           // 1-based, strictly increasing within a participant
  int round_in_trial = 0;  // 1-based
  RoundState state;
  std::optional<Intervention> intervention;
  Action action = Action::Solo;
  Action expert_action = Action::Solo;
  double reward = 0.0;
  int time_cost = 0;
  std::optional<Action> a_pred;
  std::optional<double> confidence;
  double threshold = 0.0;
  bool tom_initialized = false;
  std::string dag_before;
  std::string dag_after;
  std::string dag_hash;
  bool structure_pass = false;
  bool structure_changed = false;
  double trial_score = 0.0;  // running score within the trial after this round
  bool episode_done = false;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

void to_json(nlohmann::json& j, const RoundRecord& r);
void from_json(const nlohmann::json& j, RoundRecord& r);

struct SessionOptions {
  ConditionKind condition = ConditionKind::TomXrl;
  double rho = 0.095;  // Bernoulli filter rate for XRL-only and ToM-only
  int trials = 12;
  int training_trials = 3;
  std::uint64_t seed = 0;
  std::string participant;
};

struct ActionResult {
  double reward = 0.0;
  int time_cost = 0;
  bool episode_done = false;
  bool finished = false;
};

// A participant's full run: consecutive trials (episodes), one theory-of-mind
// model carried across them, and the condition's intervention rule applied
// at the start of every round. Requests are processed serially by the owner.
class SessionEngine {
 public:
  SessionEngine(EngineContext context, SessionOptions options);

  const SessionOptions& options() const { return options_; }
  const EngineContext& context() const { return context_; }
  const RoundState& state() const { return episode_.state(); }
  const std::optional<Intervention>& pending() const { return pending_; }
  const TomModel& tom() const { return tom_; }
  const std::vector<RoundRecord>& log() const { return log_; }
  int trial() const { return trial_; }
  bool training() const { return trial_ <= options_.training_trials; }
  int round_in_trial() const { return episode_.rounds() + 1; }
  int bombs_handled() const { return episode_.rounds(); }
  double trial_score() const { return episode_.total_reward(); }
  double total_score() const { return total_score_; }
  bool finished() const { return finished_; }

  // Throws UsageError once every trial is finished.
  ActionResult apply(Action a);

  // Client-facing view of the current round; exact time costs are omitted.
  nlohmann::json view() const;

 private:
  void start_round();

  EngineContext context_;
  SessionOptions options_;
  Rng filter_rng_;
  TomModel tom_;
  Episode episode_;
  int trial_ = 1;
  int round_ = 0;
  double total_score_ = 0.0;
  bool finished_ = false;
  std::optional<Action> last_action_;
  std::optional<Intervention> pending_;
  std::vector<RoundRecord> log_;
};

std::uint64_t episode_seed(std::uint64_t session_seed, int trial);

// Per-trial total reward from a log, in trial order.
std::vector<double> trial_scores(const std::vector<RoundRecord>& log);

}  // namespace tomxrl
