#pragma once

#include <cstdint>
#include <vector>

#include "tomxrl/bayes_net.hpp"
#include "tomxrl/expert_policy.hpp"
#include "tomxrl/task_env.hpp"

namespace tomxrl::testing {

// Four bombs on a 4x4 map with 3x3x3 bins, small enough for an exhaustive
// episode tree.
PayoffSpec reduced_spec();

// Every state of an indexer, in index order.
std::vector<DiscreteState> all_states(const StateIndexer& ix);

// The eight admissible ToM structures: observation subsets -> action.
std::vector<Dag> admissible_structures(int bomb_levels = 3, int distance_bins = 3, int time_bins = 3);
Dag structure_from_mask(unsigned mask, int bomb_levels = 3, int distance_bins = 3, int time_bins = 3);

// Random acyclic graph: a random node order and each forward edge with probability 1/2.
Dag random_dag(const std::vector<int>& cards, Rng& rng);

// Probabilities drawn uniformly on each row's simplex.
Cpds random_cpds(const Dag& dag, Rng& rng);

// Ancestral sampling.
std::vector<Row> sample_rows(const Dag& dag, const Cpds& cpds, int n, Rng& rng);

// Uniform observations and an action drawn from P(Call | parents in mask),
// with one probability per parent configuration.
std::vector<Row> sample_tom_rows(unsigned mask, const std::vector<double>& p_call, int n, Rng& rng);

// Four rows over (bomb_type, distance, time, action) and its BDeu score with the
// single edge bomb_type -> action at ess 10, frozen from the 50-digit oracle.
std::vector<Row> bdeu_fixture();
inline constexpr double kBdeuFixtureScore = -16.111188402027956;

// Datasets for the structure-search checks: random tables over every
// admissible generating structure at several sizes, plus parity tables where
// no single parent helps on its own.
std::vector<std::vector<Row>> structure_suite();

}  // namespace tomxrl::testing
