#include <benchmark/benchmark.h>

#include "tomxrl/bayes_net.hpp"
#include "tomxrl/expert_policy.hpp"
#include "tomxrl/tom_model.hpp"
#include "tomxrl/xrl_explain.hpp"

namespace {

using namespace tomxrl;

std::vector<Row> tom_rows(int n) {
  Rng rng(1);
  std::vector<Row> rows;
  for (int i = 0; i < n; ++i) {
    const int b = rng.uniform_int(0, 2);
    const int t = rng.uniform_int(0, 2);
    rows.push_back({b, rng.uniform_int(0, 2), t, rng.bernoulli(0.2 + 0.3 * b - 0.1 * t) ? 1 : 0});
  }
  return rows;
}

void BM_BdeuScore(benchmark::State& state) {
  const auto rows = tom_rows(static_cast<int>(state.range(0)));
  Dag d = Dag::tom(3, 3, 3);
  d.add_edge(0, kActionNode);
  d.add_edge(2, kActionNode);
  for (auto _ : state) benchmark::DoNotOptimize(bdeu_score(d, rows, 10.0));
}
BENCHMARK(BM_BdeuScore)->Arg(60)->Arg(2000);

void BM_HillClimb(benchmark::State& state) {
  const auto rows = tom_rows(static_cast<int>(state.range(0)));
  const ConstraintSet c = ConstraintSet::tom_default();
  for (auto _ : state) benchmark::DoNotOptimize(hill_climb(rows, Dag::tom(3, 3, 3), c, 10.0));
}
BENCHMARK(BM_HillClimb)->Arg(60)->Arg(2000);

void BM_ValueIteration(benchmark::State& state) {
  const PayoffSpec spec;
  for (auto _ : state) benchmark::DoNotOptimize(train_policy(spec));
}
BENCHMARK(BM_ValueIteration)->Unit(benchmark::kMillisecond);

void BM_CounterfactualSearch(benchmark::State& state) {
  const Policy p = train_policy(PayoffSpec{});
  const StateIndexer& ix = p.indexer();
  std::size_t i = 0;
  for (auto _ : state) {
    const DiscreteState s = ix.state_at(i++ % ix.size());
    benchmark::DoNotOptimize(feature_importance(counterfactual_search(p, s)));
  }
}
BENCHMARK(BM_CounterfactualSearch);

void BM_TomStep(benchmark::State& state) {
  TomModel m(PayoffSpec{}, TomConfig{});
  Rng rng(2);
  for (auto _ : state) {
    const DiscreteState s{rng.uniform_int(1, 3), rng.uniform_int(0, 2), rng.uniform_int(0, 2), 5};
    benchmark::DoNotOptimize(m.observe({s, s.bomb_type == 3 ? Action::Call : Action::Solo}));
  }
}
BENCHMARK(BM_TomStep);

}  // namespace

BENCHMARK_MAIN();
