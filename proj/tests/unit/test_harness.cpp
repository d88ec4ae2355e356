#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "tomxrl/harness.hpp"

namespace tomxrl {
namespace {

namespace fs = std::filesystem;

const EngineContext& ctx() {
  static const EngineContext c =
      make_context(PayoffSpec{}, train_policy(PayoffSpec{}), Templates::defaults(), TomConfig{});
  return c;
}

AppConfig small_config(int participants = 4, int trials = 4) {
  AppConfig c;
  c.experiment.participants = participants;
  c.experiment.trials = trials;
  c.experiment.training_trials = 1;
  c.experiment.folds = 2;
  c.experiment.bootstrap_samples = 200;
  c.experiment.threads = 2;
  return c;
}

const ExperimentResult& small_run() {
  static const ExperimentResult r = run_experiment(small_config(), ctx(), 11);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("tomxrl-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RoundRecord record(int round, std::optional<Feature> emphasised, std::optional<Action> recommended, Action action,
                   std::string dag_before, bool pass = false, std::string dag_after = {}) {
  RoundRecord r;
  r.participant = "a";
  r.condition = "ToM+XRL";
  r.round = round;
  r.round_in_trial = round;
  r.action = action;
  r.dag_before = dag_before;
  r.dag_after = pass ? dag_after : dag_before;
  r.structure_pass = pass;
  if (emphasised) {
    Intervention i;
    i.feature = *emphasised;
    i.recommended = recommended;
    i.text = "t";
    r.intervention = i;
  }
  return r;
}

TEST(Harness, NoneHasNoInterventions) {
  for (const ConditionRun& run : small_run().runs) {
    if (run.spec.kind == ConditionKind::None) EXPECT_EQ(run.interventions(), 0U);
  }
}

TEST(Harness, OnlyRecommendingConditionsCarryRecommendations) {
  for (const ConditionRun& run : small_run().runs) {
    const bool recommends = run.spec.kind == ConditionKind::TomXrl || run.spec.kind == ConditionKind::XrlOnly;
    for (const RoundRecord& r : flatten(run)) {
      if (r.intervention && !recommends) EXPECT_FALSE(r.intervention->recommended);
      if (r.intervention && recommends) EXPECT_TRUE(r.intervention->recommended);
    }
  }
}

TEST(Harness, ParticipantsShareBombsAcrossConditions) {
  // Same participant index, same first trial, same first bomb.
  const auto& runs = small_run().runs;
  for (std::size_t i = 0; i < runs.front().participants.size(); ++i) {
    const RoundState& ref = runs.front().participants[i].rounds.front().state;
    for (const ConditionRun& run : runs) EXPECT_EQ(run.participants[i].rounds.front().state, ref);
  }
}

TEST(Harness, ThreadCountDoesNotChangeResults) {
  ConditionSpec c;
  c.kind = ConditionKind::TomXrl;
  c.trials = 3;
  c.training_trials = 1;
  c.participants = 5;
  c.seed = 4;
  const auto a = flatten(run_condition(c, default_profiles(), ctx(), 1));
  const auto b = flatten(run_condition(c, default_profiles(), ctx(), 3));
  EXPECT_EQ(a, b);
}

TEST(Harness, MetricFilesAreDeterministic) {
  TempDir d1("det1"), d2("det2");
  write_experiment(run_experiment(small_config(), ctx(), 11), d1.path);
  write_experiment(run_experiment(small_config(), ctx(), 11), d2.path);
  for (const char* f : {"curves.csv", "compliance.csv", "predictions.csv", "participants.csv", "summary.json",
                        "logs/tom_xrl.jsonl", "logs/none.jsonl"}) {
    EXPECT_EQ(slurp(d1.path / f), slurp(d2.path / f)) << f;
    EXPECT_FALSE(slurp(d1.path / f).empty()) << f;
  }
}

TEST(Harness, CurvesRecomputedFromLogs) {
  // Independent recomputation: sum rewards per (participant, trial) straight
  // from the jsonl logs, then mean and standard error per trial.
  TempDir d("curves");
  write_experiment(small_run(), d.path);
  std::ifstream curves_in(d.path / "curves.csv");
  const std::vector<CurveRow> curves = read_curves_csv(curves_in);

  std::map<std::pair<std::string, int>, std::map<std::string, double>> totals;
  for (const auto& entry : fs::directory_iterator(d.path / "logs")) {
    std::ifstream in(entry.path());
    std::string line;
    while (std::getline(in, line)) {
      const nlohmann::json j = nlohmann::json::parse(line);
      totals[{j.at("condition"), j.at("trial")}][j.at("participant")] += j.at("reward").get<double>();
    }
  }
  ASSERT_EQ(curves.size(), totals.size());
  for (const CurveRow& row : curves) {
    const auto& per = totals.at({row.condition, row.trial});
    const double n = static_cast<double>(per.size());
    double mean = 0.0;
    for (const auto& [p, s] : per) mean += s / n;
    double ss = 0.0;
    for (const auto& [p, s] : per) ss += (s - mean) * (s - mean);
    EXPECT_EQ(row.n, static_cast<int>(per.size()));
    EXPECT_NEAR(row.mean, mean, 1e-9);
    ASSERT_TRUE(row.se);
    EXPECT_NEAR(*row.se, std::sqrt(ss / (n - 1)) / std::sqrt(n), 1e-9);
  }
}

TEST(Harness, SingleParticipantHasNoStandardError) {
  RoundRecord r = record(1, std::nullopt, std::nullopt, Action::Solo, "");
  r.reward = 10;
  const auto curves = learning_curves({r});
  ASSERT_EQ(curves.size(), 1U);
  EXPECT_FALSE(curves[0].se);
  std::stringstream ss;
  write_curves_csv(ss, curves);
  EXPECT_NE(ss.str().find(",NA,"), std::string::npos);
  const auto back = read_curves_csv(ss);
  ASSERT_EQ(back.size(), 1U);
  EXPECT_FALSE(back[0].se);
  EXPECT_DOUBLE_EQ(back[0].mean, 10.0);
}

TEST(Harness, CurvesCsvHeader) {
  std::stringstream ss;
  write_curves_csv(ss, small_run().curves);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header.rfind("condition,trial,mean,se,n", 0), 0U);
  std::stringstream bad("what,ever\n");
  EXPECT_THROW(read_curves_csv(bad), DataError);
}

TEST(Harness, HandTracedCompliance) {
  // 1: time emphasised, no edge yet; the pass at 3 adds time -> adopted.
  // 2: distance emphasised, no edge; the pass at 3 lacks it -> not adopted.
  // 3: the structure pass itself, no intervention.
  // 4: bomb_type emphasised but already an edge -> not eligible.
  // 5: distance emphasised, no later pass -> not eligible.
  const std::vector<RoundRecord> log{
      record(1, Feature::Time, Action::Solo, Action::Solo, ""),
      record(2, Feature::Distance, Action::Call, Action::Solo, ""),
      record(3, std::nullopt, std::nullopt, Action::Call, "", true, "bomb_type->action;time->action"),
      record(4, Feature::BombType, Action::Call, Action::Call, "bomb_type->action;time->action"),
      record(5, Feature::Distance, Action::Solo, Action::Solo, "bomb_type->action;time->action"),
  };
  const auto rows = compliance_metrics(log);
  ASSERT_EQ(rows.size(), 1U);
  const ComplianceRow& c = rows[0];
  EXPECT_EQ(c.interventions, 4);
  EXPECT_EQ(c.recommendations, 4);
  EXPECT_EQ(c.followed, 3);
  EXPECT_DOUBLE_EQ(*c.short_term, 0.75);
  EXPECT_EQ(c.eligible, 2);
  EXPECT_EQ(c.adopted, 1);
  EXPECT_DOUBLE_EQ(*c.long_term, 0.5);
}

TEST(Harness, TipsCountAsInterventionsButNotRecommendations) {
  RoundRecord r = record(1, Feature::Distance, std::nullopt, Action::Call, "");
  r.condition = "ToM-only";
  const auto rows = compliance_metrics({r});
  EXPECT_EQ(rows[0].interventions, 1);
  EXPECT_EQ(rows[0].recommendations, 0);
  EXPECT_FALSE(rows[0].short_term);
}

TEST(Harness, FullShortTermComplianceIsOne) {
  AppConfig c = small_config(3, 4);
  c.experiment.conditions = {ConditionKind::XrlOnly};
  c.experiment.rho = 0.5;
  c.profiles.at("time_blind").p_short = 1.0;
  const ExperimentResult r = run_experiment(c, ctx(), 2);
  ASSERT_EQ(r.compliance.size(), 1U);
  ASSERT_GT(r.compliance[0].recommendations, 0);
  EXPECT_DOUBLE_EQ(*r.compliance[0].short_term, 1.0);
}

TEST(Harness, LogisticLossNonincreasing) {
  Rng rng(6);
  std::vector<std::vector<int>> x;
  std::vector<int> y;
  for (int i = 0; i < 500; ++i) {
    const int a = rng.uniform_int(0, 2), b = rng.uniform_int(3, 5);
    x.push_back({a, b});
    y.push_back(rng.bernoulli(a == 2 ? 0.8 : 0.3) ? 1 : 0);
  }
  const LogisticModel m = train_logistic(x, y, 6);
  ASSERT_EQ(m.loss_history.size(), 300U);
  for (std::size_t i = 1; i < m.loss_history.size(); ++i) {
    EXPECT_LE(m.loss_history[i], m.loss_history[i - 1] + 1e-12);
  }
  EXPECT_GT(m.probability({2, 4}), m.probability({0, 4}));
  EXPECT_THROW(train_logistic(x, {1}, 6), UsageError);
}

TEST(Harness, PredictionEvalNeedsEnoughParticipants) {
  const auto all = flatten(small_run().runs.front());
  EXPECT_THROW(prediction_eval(all, PayoffSpec{}, 10), ConfigError);
  EXPECT_THROW(prediction_eval(all, PayoffSpec{}, 1), ConfigError);
  EXPECT_THROW(prediction_eval({}, PayoffSpec{}, 2), DataError);
}

TEST(Harness, PredictionEvalOnDeterministicPlayer) {
  // A player whose action is a fixed function of the observation: after
  // initialization the model and the logistic baseline are always right.
  std::vector<RoundRecord> log;
  Rng rng(3);
  for (int p = 0; p < 4; ++p) {
    for (int i = 0; i < 150; ++i) {
      RoundRecord r;
      r.participant = "p" + std::to_string(p);
      r.condition = "None";
      r.state = make_round_state(PayoffSpec{}, rng.uniform_int(1, 3), {0, 0}, {1, 1}, 200, 5);
      r.action = r.state.bomb_type == 3 ? Action::Call : Action::Solo;
      if (i >= 61) r.a_pred = r.action;
      log.push_back(r);
    }
  }
  const auto rows = prediction_eval(log, PayoffSpec{}, 2);
  std::map<std::string, double> acc;
  for (const PredictionRow& r : rows) acc[r.method] = *r.accuracy;
  EXPECT_DOUBLE_EQ(acc.at("tom"), 1.0);
  EXPECT_DOUBLE_EQ(acc.at("logistic"), 1.0);
  EXPECT_LT(acc.at("majority"), 1.0);
  for (const PredictionRow& r : rows) EXPECT_EQ(r.n, 4 * (150 - 61));
}

TEST(Harness, BootstrapBracketsTheDifference) {
  std::vector<double> a(50), b(50);
  Rng rng(1);
  for (double& v : a) v = 10 + rng.uniform01();
  for (double& v : b) v = rng.uniform01();
  const auto [lo, hi] = bootstrap_mean_diff_ci(a, b, 1000, 0.95, 5);
  EXPECT_LT(lo, 10.0);
  EXPECT_GT(hi, 10.0);
  EXPECT_GT(lo, 9.0);
  EXPECT_EQ(bootstrap_mean_diff_ci(a, b, 1000, 0.95, 5), std::make_pair(lo, hi));
  EXPECT_THROW(bootstrap_mean_diff_ci({}, b, 10, 0.95, 1), DataError);
}

TEST(Harness, JsonlRoundTrip) {
  const auto rounds = flatten(small_run().runs.front());
  std::stringstream ss;
  write_jsonl(ss, rounds);
  EXPECT_EQ(read_jsonl(ss), rounds);
}

TEST(Harness, SummaryHasContrast) {
  ASSERT_TRUE(small_run().contrast);
  EXPECT_EQ(small_run().contrast->trial, 4);
  EXPECT_EQ(small_run().contrast->n_a, 4);
  EXPECT_LE(small_run().contrast->lo, small_run().contrast->hi);
}

TEST(Harness, ConditionSpecValidation) {
  ConditionSpec c;
  c.training_trials = 20;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ConditionSpec{};
  c.profiles = {"nobody"};
  EXPECT_THROW(run_condition(c, default_profiles(), ctx(), 1), ConfigError);
}

}  // namespace
}  // namespace tomxrl
