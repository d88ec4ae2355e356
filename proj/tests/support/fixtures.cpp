#include "fixtures.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace tomxrl::testing {

PayoffSpec reduced_spec() {
  PayoffSpec s;
  s.solo_time_cost = {5, 8, 12};
  s.call_time_base = 4;
  s.call_time_per_distance = 3;
  s.episode_time_limit = 60;
  s.n_bombs = 4;
  s.distance_cuts = {1, 3};
  s.time_cuts = {20, 40};
  s.grid_size = 4;
  s.validate();
  return s;
}

std::vector<DiscreteState> all_states(const StateIndexer& ix) {
  std::vector<DiscreteState> out;
  out.reserve(ix.size());
  for (std::size_t i = 0; i < ix.size(); ++i) out.push_back(ix.state_at(i));
  return out;
}

Dag structure_from_mask(unsigned mask, int bomb_levels, int distance_bins, int time_bins) {
  Dag d = Dag::tom(bomb_levels, distance_bins, time_bins);
  for (int f = 0; f < 3; ++f) {
    if ((mask >> f) & 1U) d.add_edge(f, kActionNode);
  }
  return d;
}

std::vector<Dag> admissible_structures(int bomb_levels, int distance_bins, int time_bins) {
  std::vector<Dag> out;
  for (unsigned m = 0; m < 8; ++m) out.push_back(structure_from_mask(m, bomb_levels, distance_bins, time_bins));
  return out;
}

Dag random_dag(const std::vector<int>& cards, Rng& rng) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < cards.size(); ++i) names.push_back("x" + std::to_string(i));
  Dag d(cards, names);
  std::vector<int> order(cards.size());
  std::iota(order.begin(), order.end(), 0);
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (rng.bernoulli(0.5)) d.add_edge(order[i], order[j]);
    }
  }
  return d;
}

Cpds random_cpds(const Dag& dag, Rng& rng) {
  Cpds c = uniform_cpds(dag, 1.0);
  for (Cpd& cpd : c.nodes) {
    for (int j = 0; j < cpd.configs(); ++j) {
      // Exponential spacings give a uniform point on the simplex.
      for (int k = 0; k < cpd.cardinality; ++k) {
        cpd.counts[static_cast<std::size_t>(j * cpd.cardinality + k)] = -std::log(1.0 - rng.uniform01());
      }
      cpd.normalize_row(j);
    }
  }
  return c;
}

namespace {

int draw(const std::vector<double>& probs, std::size_t offset, int card, Rng& rng) {
  double u = rng.uniform01();
  for (int k = 0; k < card - 1; ++k) {
    u -= probs[offset + static_cast<std::size_t>(k)];
    if (u < 0.0) return k;
  }
  return card - 1;
}

std::vector<int> topological_order(const Dag& dag) {
  std::vector<int> order;
  std::vector<bool> placed(static_cast<std::size_t>(dag.size()), false);
  while (static_cast<int>(order.size()) < dag.size()) {
    for (int v = 0; v < dag.size(); ++v) {
      if (placed[static_cast<std::size_t>(v)]) continue;
      const auto ps = dag.parents(v);
      if (std::all_of(ps.begin(), ps.end(), [&](int p) { return placed[static_cast<std::size_t>(p)]; })) {
        order.push_back(v);
        placed[static_cast<std::size_t>(v)] = true;
      }
    }
  }
  return order;
}

}  // namespace

std::vector<Row> sample_rows(const Dag& dag, const Cpds& cpds, int n, Rng& rng) {
  const std::vector<int> order = topological_order(dag);
  std::vector<Row> rows(static_cast<std::size_t>(n), Row(static_cast<std::size_t>(dag.size()), 0));
  for (Row& r : rows) {
    for (int v : order) {
      const Cpd& cpd = cpds.at(v);
      const std::size_t offset = static_cast<std::size_t>(cpd.config_of(r) * cpd.cardinality);
      r[static_cast<std::size_t>(v)] = draw(cpd.probs, offset, cpd.cardinality, rng);
    }
  }
  return rows;
}

std::vector<Row> sample_tom_rows(unsigned mask, const std::vector<double>& p_call, int n, Rng& rng) {
  std::vector<Row> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Row r{rng.uniform_int(0, 2), rng.uniform_int(0, 2), rng.uniform_int(0, 2), 0};
    std::size_t c = 0;
    for (int f = 0; f < 3; ++f) {
      if ((mask >> f) & 1U) c = c * 3 + static_cast<std::size_t>(r[static_cast<std::size_t>(f)]);
    }
    r[3] = rng.bernoulli(p_call.at(c)) ? 1 : 0;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<Row> bdeu_fixture() {
  return {{0, 0, 0, 0}, {0, 1, 2, 0}, {2, 2, 1, 1}, {2, 0, 0, 1}};
}

std::vector<std::vector<Row>> structure_suite() {
  std::vector<std::vector<Row>> suite;
  Rng rng(41);
  for (int rep = 0; rep < 40; ++rep) {
    for (int n : {5, 13, 61, 300, 1000}) {
      const unsigned mask = static_cast<unsigned>(rng.uniform_int(0, 7));
      const int configs = 1 << (2 * std::popcount(mask));  // 4^k covers 3^k
      std::vector<double> p(static_cast<std::size_t>(configs));
      for (double& x : p) x = rng.uniform01();
      suite.push_back(sample_tom_rows(mask, p, n, rng));
    }
  }
  for (int n : {100, 500, 2000}) {
    std::vector<Row> parity;
    for (int i = 0; i < n; ++i) {
      Row r{rng.uniform_int(0, 2), rng.uniform_int(0, 2), rng.uniform_int(0, 2), 0};
      r[3] = (r[0] + r[2]) % 2 == 0 ? (rng.bernoulli(0.9) ? 1 : 0) : (rng.bernoulli(0.1) ? 1 : 0);
      parity.push_back(r);
    }
    suite.push_back(std::move(parity));
  }
  return suite;
}

}  // namespace tomxrl::testing
