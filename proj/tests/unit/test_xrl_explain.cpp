#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tomxrl/xrl_explain.hpp"

namespace tomxrl {
namespace {

void expect_matches_oracle(const Policy& p) {
  for (const DiscreteState& s : testing::all_states(p.indexer())) {
    const CounterfactualResult cf = counterfactual_search(p, s);
    const auto want = oracle::counterfactuals(p, s);
    for (Feature f : kFeatures) {
      const auto& got = cf.at(f);
      const auto& exp = want[static_cast<std::size_t>(f)];
      EXPECT_EQ(got.steps, exp.steps) << state_key(s, p.indexer()) << " " << to_string(f);
      EXPECT_EQ(got.direction, exp.direction);
      EXPECT_EQ(got.action, exp.action);
    }
    const ImportanceRanking r = feature_importance(cf);
    const std::vector<Feature> order = oracle::ranking(want);
    ASSERT_EQ(r.size(), 3U);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r[i].feature, order[i]);
  }
}

TEST(XrlExplain, ReducedInstanceMatchesOracle) {
  expect_matches_oracle(train_policy(testing::reduced_spec()));
}

TEST(XrlExplain, DefaultPolicyMatchesOracle) {
  expect_matches_oracle(train_policy(PayoffSpec{}));
}

TEST(XrlExplain, ConstantPolicyUnreachable) {
  const Policy p = Policy::constant(StateIndexer::from_spec(PayoffSpec{}), Action::Solo);
  const CounterfactualResult cf = counterfactual_search(p, {2, 1, 1, 5});
  for (Feature f : kFeatures) {
    EXPECT_FALSE(cf.at(f).reachable());
    EXPECT_EQ(cf.at(f).direction, 0);
  }
  const ImportanceRanking r = feature_importance(cf);
  EXPECT_EQ(r[0].feature, Feature::BombType);
  EXPECT_EQ(r[1].feature, Feature::Distance);
  EXPECT_EQ(r[2].feature, Feature::Time);
  for (const auto& e : r) EXPECT_FALSE(e.steps);
}

TEST(XrlExplain, RankingSortsBySteps) {
  CounterfactualResult cf;
  cf.features[0] = {Feature::BombType, std::nullopt, 0, std::nullopt, std::nullopt};
  cf.features[1] = {Feature::Distance, 2, 1, Action::Call, std::nullopt};
  cf.features[2] = {Feature::Time, 1, -1, Action::Call, std::nullopt};
  const ImportanceRanking r = feature_importance(cf);
  EXPECT_EQ(r[0].feature, Feature::Time);
  EXPECT_EQ(r[1].feature, Feature::Distance);
  EXPECT_EQ(r[2].feature, Feature::BombType);
  EXPECT_FALSE(r[2].steps);
}

TEST(XrlExplain, TiesKeepFixedOrderAndNegativeDirection) {
  // Call only in the middle distance bin: both neighbours flip, -1 wins.
  const StateIndexer ix = StateIndexer::from_spec(PayoffSpec{});
  std::vector<Action> acts(ix.size(), Action::Solo);
  for (std::size_t i = 0; i < ix.size(); ++i) {
    if (ix.state_at(i).distance_bin == 1) acts[i] = Action::Call;
  }
  const Policy p(ix, acts, std::vector<double>(ix.size(), 0.0));
  const CounterfactualResult cf = counterfactual_search(p, {2, 1, 1, 3});
  EXPECT_EQ(cf.at(Feature::Distance).steps, 1);
  EXPECT_EQ(cf.at(Feature::Distance).direction, -1);
  EXPECT_EQ(cf.at(Feature::Distance).counterfactual->distance_bin, 0);
}

TEST(XrlExplain, OnlyLowerTimeFlipsCall) {
  // Call everywhere except the lowest time bin.
  const StateIndexer ix = StateIndexer::from_spec(PayoffSpec{});
  std::vector<Action> acts(ix.size(), Action::Call);
  for (std::size_t i = 0; i < ix.size(); ++i) {
    if (ix.state_at(i).time_bin == 0) acts[i] = Action::Solo;
  }
  const Policy p(ix, acts, std::vector<double>(ix.size(), 0.0));
  const CounterfactualResult cf = counterfactual_search(p, {3, 2, 1, 6});
  EXPECT_EQ(cf.action, Action::Call);
  EXPECT_EQ(cf.at(Feature::Time).steps, 1);
  EXPECT_EQ(cf.at(Feature::Time).direction, -1);
  EXPECT_EQ(cf.at(Feature::Time).action, Action::Solo);
  EXPECT_FALSE(cf.at(Feature::BombType).reachable());
  EXPECT_FALSE(cf.at(Feature::Distance).reachable());
  EXPECT_EQ(feature_importance(cf)[0].feature, Feature::Time);
}

TEST(XrlExplain, MinimalValidLocal) {
  const Policy p = train_policy(PayoffSpec{});
  const StateIndexer& ix = p.indexer();
  for (const DiscreteState& s : testing::all_states(ix)) {
    const CounterfactualResult cf = counterfactual_search(p, s);
    for (Feature f : kFeatures) {
      const auto& fc = cf.at(f);
      if (!fc.reachable()) continue;
      ASSERT_TRUE(fc.counterfactual);
      const DiscreteState& c = *fc.counterfactual;
      EXPECT_NE(p.action(c), p.action(s));
      EXPECT_EQ(*fc.action, p.action(c));
      EXPECT_LE(*fc.steps, ix.domain_size(f) - 1);
      EXPECT_EQ(c.feature(f), s.feature(f) + fc.direction * *fc.steps);
      for (Feature g : kFeatures) {
        if (g != f) EXPECT_EQ(c.feature(g), s.feature(g));
      }
      EXPECT_EQ(c.bombs_remaining, s.bombs_remaining);
      for (int b = 1; b < *fc.steps; ++b) {
        EXPECT_EQ(p.action(s.with_feature(f, s.feature(f) + fc.direction * b)), p.action(s));
      }
    }
  }
}

TEST(XrlExplain, JsonShape) {
  const Policy p = train_policy(PayoffSpec{});
  const nlohmann::json j = counterfactual_search(p, {3, 0, 2, 12});
  EXPECT_EQ(j.at("action"), "Call");
  for (const char* f : {"bomb_type", "distance", "time"}) EXPECT_TRUE(j.at("features").contains(f)) << f;
  const nlohmann::json r = ranking_to_json(feature_importance(counterfactual_search(p, {3, 0, 2, 12})));
  EXPECT_EQ(r.size(), 3U);
}

}  // namespace
}  // namespace tomxrl
