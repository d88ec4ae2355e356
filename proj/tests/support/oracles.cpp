#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>

namespace tomxrl::oracle {

namespace {

// Parent values of configuration j; the first parent is the most significant digit.
std::vector<int> decode(int j, const std::vector<int>& parent_cards) {
  std::vector<int> v(parent_cards.size());
  for (std::size_t i = parent_cards.size(); i-- > 0;) {
    v[i] = j % parent_cards[i];
    j /= parent_cards[i];
  }
  return v;
}

template <typename Real, typename LogGamma>
Real bdeu_sum(const Dag& dag, const std::vector<Row>& data, double ess, LogGamma lg) {
  Real total = 0;
  for (int i = 0; i < dag.size(); ++i) {
    const int r = dag.cardinality(i);
    const std::vector<int> ps = dag.parents(i);
    std::vector<int> pcards;
    int q = 1;
    for (int p : ps) {
      pcards.push_back(dag.cardinality(p));
      q *= dag.cardinality(p);
    }
    const Real a_ij = Real(ess) / Real(q);
    const Real a_ijk = Real(ess) / Real(r * q);
    for (int j = 0; j < q; ++j) {
      const std::vector<int> want = decode(j, pcards);
      std::vector<long> n_ijk(static_cast<std::size_t>(r), 0);
      for (const Row& row : data) {
        bool match = true;
        for (std::size_t t = 0; t < ps.size(); ++t) match = match && row[static_cast<std::size_t>(ps[t])] == want[t];
        if (match) ++n_ijk[static_cast<std::size_t>(row[static_cast<std::size_t>(i)])];
      }
      long n_ij = 0;
      for (long n : n_ijk) n_ij += n;
      total += lg(a_ij) - lg(a_ij + Real(n_ij));
      for (long n : n_ijk) total += lg(a_ijk + Real(n)) - lg(a_ijk);
    }
  }
  return total;
}

bool preferred(const Dag& a, double sa, const Dag& b, double sb) {
  const double tol = 1e-9 * std::max({1.0, std::abs(sa), std::abs(sb)});
  if (std::abs(sa - sb) > tol) return sa > sb;
  if (a.num_edges() != b.num_edges()) return a.num_edges() < b.num_edges();
  return a.edges() < b.edges();
}

}  // namespace

double bdeu_direct(const Dag& dag, const std::vector<Row>& data, double ess) {
  return bdeu_sum<double>(dag, data, ess, [](double x) { return std::lgamma(x); });
}

double bdeu_direct_mp(const Dag& dag, const std::vector<Row>& data, double ess) {
  using boost::multiprecision::cpp_dec_float_50;
  const cpp_dec_float_50 s = bdeu_sum<cpp_dec_float_50>(
      dag, data, ess, [](const cpp_dec_float_50& x) { return cpp_dec_float_50(boost::math::lgamma(x)); });
  return s.convert_to<double>();
}

Dag exhaustive_structure(const std::vector<Row>& data, double ess) {
  std::optional<Dag> best;
  double best_score = 0.0;
  for (unsigned mask = 0; mask < 8; ++mask) {
    Dag d = Dag::tom(3, 3, 3);
    for (int f = 0; f < 3; ++f) {
      if ((mask >> f) & 1U) d.add_edge(f, kActionNode);
    }
    const double s = bdeu_direct(d, data, ess);
    if (!best || preferred(d, s, *best, best_score)) {
      best = d;
      best_score = s;
    }
  }
  return *best;
}

std::vector<double> joint_posterior(const Dag& dag, const Cpds& cpds, int target, const Row& evidence) {
  const int n = dag.size();
  long assignments = 1;
  for (int i = 0; i < n; ++i) assignments *= dag.cardinality(i);

  std::vector<long double> mass(static_cast<std::size_t>(dag.cardinality(target)), 0.0L);
  Row x(static_cast<std::size_t>(n), 0);
  for (long a = 0; a < assignments; ++a) {
    long rest = a;
    for (int i = 0; i < n; ++i) {
      x[static_cast<std::size_t>(i)] = static_cast<int>(rest % dag.cardinality(i));
      rest /= dag.cardinality(i);
    }
    long double p = 1.0L;
    for (int i = 0; i < n; ++i) {
      const Cpd& cpd = cpds.at(i);
      if (cpd.parents != dag.parents(i)) throw std::logic_error("CPD parents do not match the DAG");
      int j = 0;
      for (int par : cpd.parents) j = j * dag.cardinality(par) + x[static_cast<std::size_t>(par)];
      p *= cpd.probs[static_cast<std::size_t>(j * dag.cardinality(i) + x[static_cast<std::size_t>(i)])];
    }
    bool consistent = true;
    for (int i = 0; i < n; ++i) {
      if (i != target && x[static_cast<std::size_t>(i)] != evidence[static_cast<std::size_t>(i)]) consistent = false;
    }
    if (consistent) mass[static_cast<std::size_t>(x[static_cast<std::size_t>(target)])] += p;
  }
  long double z = 0.0L;
  for (long double m : mass) z += m;
  std::vector<double> out;
  for (long double m : mass) out.push_back(static_cast<double>(m / z));
  return out;
}

EpisodeTree::EpisodeTree(PayoffSpec spec, bool memoize) : spec_(std::move(spec)), memoize_(memoize) {
  const int g = spec_.grid_size;
  pairs_at_distance_.assign(static_cast<std::size_t>(2 * (g - 1) + 1), 0);
  for (int ax = 0; ax < g; ++ax)
    for (int ay = 0; ay < g; ++ay)
      for (int tx = 0; tx < g; ++tx)
        for (int ty = 0; ty < g; ++ty) {
          ++pairs_at_distance_[static_cast<std::size_t>(std::abs(ax - tx) + std::abs(ay - ty))];
          ++total_pairs_;
        }
}

const EpisodeTree::Branch& EpisodeTree::branch(const DiscreteState& s, Action a) {
  const auto key = std::make_pair(s, static_cast<int>(a));
  if (const auto it = cache_.find(key); it != cache_.end()) return it->second;

  std::vector<int> seconds;
  for (int t = 1; t <= spec_.episode_time_limit; ++t) {
    if (spec_.time_bin(t) == s.time_bin) seconds.push_back(t);
  }
  long pairs_in_bin = 0;
  for (std::size_t d = 0; d < pairs_at_distance_.size(); ++d) {
    if (spec_.distance_bin(static_cast<int>(d)) == s.distance_bin) pairs_in_bin += pairs_at_distance_[d];
  }
  if (seconds.empty() || pairs_in_bin == 0) throw std::logic_error("state has no raw realization");

  // Weight of each time bin after the step, then the fresh bomb and pair.
  std::vector<double> left_bin(static_cast<std::size_t>(spec_.time_bins()), 0.0);
  for (int t : seconds) {
    for (std::size_t d = 0; d < pairs_at_distance_.size(); ++d) {
      if (spec_.distance_bin(static_cast<int>(d)) != s.distance_bin) continue;
      const double w = static_cast<double>(pairs_at_distance_[d]) /
                       (static_cast<double>(seconds.size()) * static_cast<double>(pairs_in_bin));
      const int left = t - spec_.time_cost(s.bomb_type, a, static_cast<int>(d));
      if (s.bombs_remaining - 1 <= 0 || left <= 0) continue;
      left_bin[static_cast<std::size_t>(spec_.time_bin(left))] += w;
    }
  }
  std::map<DiscreteState, double> next;
  const int levels = spec_.bomb_levels();
  for (int tb = 0; tb < spec_.time_bins(); ++tb) {
    if (left_bin[static_cast<std::size_t>(tb)] == 0.0) continue;
    for (int b = 1; b <= levels; ++b) {
      for (std::size_t d2 = 0; d2 < pairs_at_distance_.size(); ++d2) {
        const DiscreteState n{b, spec_.distance_bin(static_cast<int>(d2)), tb, s.bombs_remaining - 1};
        next[n] += left_bin[static_cast<std::size_t>(tb)] / levels * static_cast<double>(pairs_at_distance_[d2]) /
                   static_cast<double>(total_pairs_);
      }
    }
  }
  Branch br;
  br.reward = spec_.reward_for(s.bomb_type, a);
  br.next.assign(next.begin(), next.end());
  return cache_.emplace(key, std::move(br)).first->second;
}

std::array<double, 2> EpisodeTree::q(const DiscreteState& s) {
  std::array<double, 2> out{};
  for (Action a : {Action::Solo, Action::Call}) {
    const Branch& br = branch(s, a);
    double v = br.reward;
    for (const auto& [n, p] : br.next) v += p * optimum(n);
    out[static_cast<std::size_t>(a)] = v;
  }
  return out;
}

double EpisodeTree::optimum(const DiscreteState& s) {
  if (memoize_) {
    if (const auto it = memo_.find(s); it != memo_.end()) return it->second;
  }
  ++nodes_;
  const auto qs = q(s);
  const double best = std::max(qs[0], qs[1]);
  if (memoize_) memo_.emplace(s, best);
  return best;
}

std::array<CfExpect, 3> counterfactuals(const Policy& policy, const DiscreteState& s) {
  const StateIndexer& ix = policy.indexer();
  const Action here = policy.action(s);
  std::array<CfExpect, 3> out{};
  for (int q = 0; q < 3; ++q) {
    const Feature f = static_cast<Feature>(q);
    const int lo = f == Feature::BombType ? 1 : 0;
    const int hi = f == Feature::BombType ? ix.bomb_levels : (f == Feature::Distance ? ix.distance_bins : ix.time_bins) - 1;
    const int cur = s.feature(f);
    for (int v = lo; v <= hi; ++v) {
      if (v == cur) continue;
      const Action there = policy.action(s.with_feature(f, v));
      if (there == here) continue;
      const int steps = std::abs(v - cur);
      const int dir = v < cur ? -1 : 1;
      CfExpect& e = out[static_cast<std::size_t>(q)];
      if (!e.steps || steps < *e.steps || (steps == *e.steps && dir < e.direction)) e = {steps, dir, there};
    }
  }
  return out;
}

std::vector<Feature> ranking(const std::array<CfExpect, 3>& cf) {
  std::vector<Feature> fs(kFeatures.begin(), kFeatures.end());
  auto key = [&](Feature f) {
    const auto& e = cf[static_cast<std::size_t>(f)];
    return std::make_pair(e.steps.value_or(std::numeric_limits<int>::max()), static_cast<int>(f));
  };
  std::sort(fs.begin(), fs.end(), [&](Feature a, Feature b) { return key(a) < key(b); });
  return fs;
}

Emphasis emphasis(const ImportanceRanking& ranking, const Dag& human_dag) {
  std::optional<std::pair<int, int>> best;  // (steps, feature)
  for (const RankedFeature& r : ranking) {
    if (!r.steps || human_dag.has_edge(static_cast<int>(r.feature), kActionNode)) continue;
    const auto k = std::make_pair(*r.steps, static_cast<int>(r.feature));
    if (!best || k < *best) best = k;
  }
  if (best) return {static_cast<Feature>(best->second), true};
  return {ranking.front().feature, ranking.front().steps.has_value()};
}

}  // namespace tomxrl::oracle
