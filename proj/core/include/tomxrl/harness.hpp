#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tomxrl/config.hpp"
#include "tomxrl/session.hpp"
#include "tomxrl/sim_human.hpp"

namespace tomxrl {

struct ConditionSpec {
  ConditionKind kind = ConditionKind::None;
  double rho = 0.095;
  int trials = 12;
  int training_trials = 3;
  int participants = 20;
  std::uint64_t seed = 0;
  // Assigned round-robin by participant index.
  std::vector<std::string> profiles{"time_blind"};

  void validate() const;
};

struct ParticipantRun {
  std::string id;
  std::string profile;
  std::vector<RoundRecord> rounds;
};

struct ConditionRun {
  ConditionSpec spec;
  std::vector<ParticipantRun> participants;

  std::size_t rounds() const;
  std::size_t interventions() const;
  double intervention_rate() const;
};

// Seeds depend on the participant index only, so the same index sees the same
// bomb sequence in every condition.
std::uint64_t participant_seed(std::uint64_t seed, int index);
std::string condition_slug(ConditionKind k);

// Plays one simulated participant through a full session.
ParticipantRun simulate_participant(const EngineContext& ctx, const SessionOptions& options,
                                    const ProfileSpec& profile);

// threads <= 0 uses the hardware concurrency.
ConditionRun run_condition(const ConditionSpec& cond, const std::map<std::string, ProfileSpec>& profiles,
                           const EngineContext& ctx, int threads = 0);

// Flattened rounds of every participant, in participant order.
std::vector<RoundRecord> flatten(const ConditionRun& run);

// Metrics. All are pure functions of round records.

struct CurveRow {
  std::string condition;
  int trial = 0;
  bool training = false;
  double mean = 0.0;
  std::optional<double> se;  // undefined for a single participant
  int n = 0;
};

std::vector<CurveRow> learning_curves(const std::vector<RoundRecord>& rounds);

struct ComplianceRow {
  std::string condition;
  int interventions = 0;
  int recommendations = 0;  // interventions carrying a recommended action
  int followed = 0;
  std::optional<double> short_term;
  int eligible = 0;  // edge absent at issue and a later structure pass exists
  int adopted = 0;
  std::optional<double> long_term;
};

std::vector<ComplianceRow> compliance_metrics(const std::vector<RoundRecord>& rounds);

// Plain one-hot logistic regression, trained by batch gradient descent.
struct LogisticModel {
  std::vector<double> weights;  // bias first
  std::vector<double> loss_history;

  double probability(const std::vector<int>& active) const;
};

struct LogisticOptions {
  double learning_rate = 0.5;
  int iterations = 300;
};

// `features` holds the active one-hot column indices per row (bias excluded).
LogisticModel train_logistic(const std::vector<std::vector<int>>& features, const std::vector<int>& labels,
                             int n_columns, const LogisticOptions& options = {});

struct PredictionRow {
  std::string condition;
  std::string method;  // tom, majority, logistic
  int folds = 0;
  long n = 0;
  long correct = 0;
  std::optional<double> accuracy;
};

// Online ToM accuracy after initialization and two baselines cross-validated
// over participants, all scored on the same post-initialization rounds.
// Throws ConfigError when a condition has fewer participants than folds.
std::vector<PredictionRow> prediction_eval(const std::vector<RoundRecord>& rounds, const PayoffSpec& spec,
                                           int folds, const LogisticOptions& options = {});

struct TrialScore {
  std::string condition;
  std::string participant;
  int trial = 0;
  bool training = false;
  double score = 0.0;
};

std::vector<TrialScore> participant_scores(const std::vector<RoundRecord>& rounds);

// Percentile bootstrap CI of mean(a) - mean(b).
std::pair<double, double> bootstrap_mean_diff_ci(const std::vector<double>& a, const std::vector<double>& b,
                                                 int samples, double level, std::uint64_t seed);

// Output files.
void write_curves_csv(std::ostream& out, const std::vector<CurveRow>& rows);
void write_compliance_csv(std::ostream& out, const std::vector<ComplianceRow>& rows);
void write_predictions_csv(std::ostream& out, const std::vector<PredictionRow>& rows);
void write_participants_csv(std::ostream& out, const std::vector<TrialScore>& rows);
void write_jsonl(std::ostream& out, const std::vector<RoundRecord>& rounds);
std::vector<RoundRecord> read_jsonl(std::istream& in);
std::vector<CurveRow> read_curves_csv(std::istream& in);

// Final-trial score of ToM+XRL minus None.
struct FinalTrialContrast {
  int trial = 0;
  double mean_diff = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int n_a = 0;
  int n_b = 0;
};

std::optional<FinalTrialContrast> final_trial_contrast(const std::vector<RoundRecord>& rounds, int samples,
                                                       std::uint64_t seed);

struct ExperimentResult {
  std::vector<ConditionRun> runs;
  std::vector<CurveRow> curves;
  std::vector<ComplianceRow> compliance;
  std::vector<PredictionRow> predictions;
  std::optional<FinalTrialContrast> contrast;
  double rho = 0.0;
};

ExperimentResult run_experiment(const AppConfig& config, const EngineContext& ctx, std::uint64_t seed);
void write_experiment(const ExperimentResult& result, const std::filesystem::path& out_dir);

}  // namespace tomxrl
