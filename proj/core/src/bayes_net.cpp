#include "tomxrl/bayes_net.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace tomxrl {

using nlohmann::json;

namespace {

// glibc's lgamma writes the global signgam; the reentrant form does not.
double log_gamma(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

std::vector<int> mask_nodes(std::uint32_t mask) {
  std::vector<int> out;
  for (int i = 0; mask != 0; ++i, mask >>= 1) {
    if (mask & 1U) out.push_back(i);
  }
  return out;
}

void validate_rows(const Dag& dag, std::span<const Row> data) {
  for (const Row& row : data) {
    if (static_cast<int>(row.size()) != dag.size()) {
      throw DataError("observation has " + std::to_string(row.size()) + " values, expected " +
                      std::to_string(dag.size()));
    }
    for (int i = 0; i < dag.size(); ++i) {
      const int v = row[static_cast<std::size_t>(i)];
      if (v < 0 || v >= dag.cardinality(i)) {
        throw DataError("value " + std::to_string(v) + " out of range for node " + dag.name(i));
      }
    }
  }
}

}  // namespace

Dag::Dag(std::vector<int> cardinalities, std::vector<std::string> names)
    : cards_(std::move(cardinalities)), names_(std::move(names)), parents_(cards_.size(), 0U) {
  if (cards_.size() > 32) throw UsageError("Dag supports at most 32 nodes");
  if (names_.size() != cards_.size()) throw UsageError("Dag needs one name per node");
  for (int c : cards_) {
    if (c < 1) throw UsageError("node cardinality must be >= 1");
  }
}

Dag Dag::tom(int bomb_levels, int distance_bins, int time_bins) {
  return Dag({bomb_levels, distance_bins, time_bins, 2}, {"bomb_type", "distance", "time", "action"});
}

std::vector<int> Dag::parents(int node) const { return mask_nodes(parent_mask(node)); }

std::vector<int> Dag::children(int node) const {
  std::vector<int> out;
  for (int v = 0; v < size(); ++v) {
    if (has_edge(node, v)) out.push_back(v);
  }
  return out;
}

std::vector<Edge> Dag::edges() const {
  std::vector<Edge> out;
  for (int u = 0; u < size(); ++u) {
    for (int v = 0; v < size(); ++v) {
      if (has_edge(u, v)) out.emplace_back(u, v);
    }
  }
  return out;
}

int Dag::num_edges() const {
  int n = 0;
  for (std::uint32_t m : parents_) n += __builtin_popcount(m);
  return n;
}

bool Dag::reaches(int from, int to) const {
  if (from == to) return true;
  std::vector<int> stack{from};
  std::uint32_t seen = 1U << from;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v = 0; v < size(); ++v) {
      if (!has_edge(u, v) || ((seen >> v) & 1U)) continue;
      if (v == to) return true;
      seen |= 1U << v;
      stack.push_back(v);
    }
  }
  return false;
}

bool Dag::can_add_without_cycle(int from, int to) const { return from != to && !reaches(to, from); }

bool Dag::is_acyclic() const {
  for (const auto& [u, v] : edges()) {
    Dag probe = *this;
    probe.remove_edge(u, v);
    if (probe.reaches(v, u)) return false;
  }
  return true;
}

void Dag::add_edge(int from, int to) {
  if (from < 0 || to < 0 || from >= size() || to >= size()) throw UsageError("edge endpoint out of range");
  parents_[static_cast<std::size_t>(to)] |= 1U << from;
}

void Dag::remove_edge(int from, int to) {
  parents_[static_cast<std::size_t>(to)] &= ~(1U << from);
}

std::string Dag::edge_string() const {
  std::string out;
  for (const auto& [u, v] : edges()) {
    if (!out.empty()) out += ';';
    out += name(u) + "->" + name(v);
  }
  return out;
}

std::string Dag::to_dot() const {
  std::string out = "digraph tom {\n";
  for (int i = 0; i < size(); ++i) out += "  " + name(i) + ";\n";
  for (const auto& [u, v] : edges()) out += "  " + name(u) + " -> " + name(v) + ";\n";
  out += "}\n";
  return out;
}

ConstraintSet::ConstraintSet(int nodes)
    : nodes_(nodes), forbidden_(static_cast<std::size_t>(nodes) * static_cast<std::size_t>(nodes), false) {}

ConstraintSet ConstraintSet::tom_default() {
  ConstraintSet c(kTomNodes);
  for (int u = 0; u < kTomNodes; ++u) {
    for (int v = 0; v < kTomNodes; ++v) {
      if (u == v) continue;
      if (u == kActionNode || v != kActionNode) c.forbid(u, v);
    }
  }
  return c;
}

void ConstraintSet::forbid(int from, int to) {
  forbidden_[static_cast<std::size_t>(from * nodes_ + to)] = true;
}

bool ConstraintSet::allowed(int from, int to) const {
  if (from == to || from < 0 || to < 0 || from >= nodes_ || to >= nodes_) return false;
  return !forbidden_[static_cast<std::size_t>(from * nodes_ + to)];
}

double bdeu_family_score(const Dag& dag, int node, std::uint32_t parent_mask,
                         std::span<const Row> data, double ess) {
  const int r = dag.cardinality(node);
  const std::vector<int> parents = mask_nodes(parent_mask);
  int q = 1;
  for (int p : parents) q *= dag.cardinality(p);

  std::vector<double> counts(static_cast<std::size_t>(q) * static_cast<std::size_t>(r), 0.0);
  for (const Row& row : data) {
    int j = 0;
    for (int p : parents) j = j * dag.cardinality(p) + row[static_cast<std::size_t>(p)];
    counts[static_cast<std::size_t>(j * r + row[static_cast<std::size_t>(node)])] += 1.0;
  }

  const double a_ij = ess / q;
  const double a_ijk = ess / (static_cast<double>(q) * r);
  const double lg_ij = log_gamma(a_ij);
  const double lg_ijk = log_gamma(a_ijk);
  double score = 0.0;
  for (int j = 0; j < q; ++j) {
    double n_ij = 0.0;
    double inner = 0.0;
    for (int k = 0; k < r; ++k) {
      const double n = counts[static_cast<std::size_t>(j * r + k)];
      n_ij += n;
      if (n > 0.0) inner += log_gamma(a_ijk + n) - lg_ijk;
    }
    if (n_ij == 0.0) continue;
    score += lg_ij - log_gamma(a_ij + n_ij) + inner;
  }
  return score;
}

double bdeu_score(const Dag& dag, std::span<const Row> data, double ess) {
  if (!(ess > 0.0)) throw UsageError("ess must be > 0");
  validate_rows(dag, data);
  double score = 0.0;
  for (int i = 0; i < dag.size(); ++i) score += bdeu_family_score(dag, i, dag.parent_mask(i), data, ess);
  return score;
}

bool structure_preferred(const Dag& a, double score_a, const Dag& b, double score_b) {
  const double tol = 1e-9 * std::max({1.0, std::abs(score_a), std::abs(score_b)});
  if (score_a > score_b + tol) return true;
  if (score_b > score_a + tol) return false;
  if (a.num_edges() != b.num_edges()) return a.num_edges() < b.num_edges();
  return a.edges() < b.edges();
}

namespace {

Dag local_search(Dag current, std::span<const Row> data, const ConstraintSet& constraints, double ess) {
  double current_score = bdeu_score(current, data, ess);

  // Each accepted move is strictly better in a total order over finitely many
  // graphs, so the loop terminates.
  for (;;) {
    bool found = false;
    Dag best;
    double best_score = 0.0;
    auto consider = [&](const Dag& cand) {
      const double s = bdeu_score(cand, data, ess);
      if (!found || structure_preferred(cand, s, best, best_score)) {
        best = cand;
        best_score = s;
        found = true;
      }
    };
    for (int u = 0; u < current.size(); ++u) {
      for (int v = 0; v < current.size(); ++v) {
        if (u == v) continue;
        if (current.has_edge(u, v)) {
          Dag removed = current;
          removed.remove_edge(u, v);
          consider(removed);
          if (constraints.allowed(v, u) && removed.can_add_without_cycle(v, u)) {
            Dag reversed = removed;
            reversed.add_edge(v, u);
            consider(reversed);
          }
        } else if (constraints.allowed(u, v) && current.can_add_without_cycle(u, v)) {
          Dag added = current;
          added.add_edge(u, v);
          consider(added);
        }
      }
    }
    if (!found || !structure_preferred(best, best_score, current, current_score)) break;
    current = best;
    current_score = best_score;
  }
  return current;
}

}  // namespace

Dag hill_climb(std::span<const Row> data, const Dag& empty, const ConstraintSet& constraints,
               double ess) {
  if (data.empty()) throw UsageError("hill_climb needs data");
  if (constraints.nodes() != empty.size()) throw UsageError("constraint set does not match the DAG");
  Dag bare = empty;
  for (const auto& [u, v] : empty.edges()) bare.remove_edge(u, v);
  // From the empty graph alone the search stalls whenever the action depends on
  // a joint configuration but no single parent helps on its own (parity-like
  // tables, about 10% of random three-parent tables). A second start from the
  // densest admissible graph climbs down to those.
  Dag dense = bare;
  for (int u = 0; u < dense.size(); ++u) {
    for (int v = 0; v < dense.size(); ++v) {
      if (u != v && constraints.allowed(u, v) && dense.can_add_without_cycle(u, v)) dense.add_edge(u, v);
    }
  }
  const Dag a = local_search(bare, data, constraints, ess);
  if (dense == bare) return a;
  const Dag b = local_search(dense, data, constraints, ess);
  return structure_preferred(b, bdeu_score(b, data, ess), a, bdeu_score(a, data, ess)) ? b : a;
}

int Cpd::config_of(const Row& row) const {
  int j = 0;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    j = j * parent_cards[i] + row[static_cast<std::size_t>(parents[i])];
  }
  return j;
}

void Cpd::normalize_row(int config) {
  const auto base = static_cast<std::size_t>(config * cardinality);
  double sum = 0.0;
  for (int k = 0; k < cardinality; ++k) sum += counts[base + static_cast<std::size_t>(k)];
  for (int k = 0; k < cardinality; ++k) {
    probs[base + static_cast<std::size_t>(k)] =
        sum > 0.0 ? counts[base + static_cast<std::size_t>(k)] / sum : 1.0 / cardinality;
  }
}

double Cpds::prob(int node, const Row& row) const {
  const Cpd& c = at(node);
  return c.prob(c.config_of(row), row[static_cast<std::size_t>(node)]);
}

namespace {

Cpd empty_cpd(const Dag& dag, int node, double fill) {
  Cpd c;
  c.node = node;
  c.cardinality = dag.cardinality(node);
  c.parents = dag.parents(node);
  int q = 1;
  for (int p : c.parents) {
    c.parent_cards.push_back(dag.cardinality(p));
    q *= dag.cardinality(p);
  }
  c.counts.assign(static_cast<std::size_t>(q * c.cardinality), fill);
  c.probs.assign(c.counts.size(), 1.0 / c.cardinality);
  return c;
}

}  // namespace

Cpds uniform_cpds(const Dag& dag, double pseudo_count) {
  if (pseudo_count < 0.0) throw UsageError("pseudo-counts must be >= 0");
  Cpds out;
  for (int i = 0; i < dag.size(); ++i) out.nodes.push_back(empty_cpd(dag, i, pseudo_count));
  return out;
}

Cpds fit_mle(const Dag& dag, std::span<const Row> data) {
  validate_rows(dag, data);
  Cpds out = uniform_cpds(dag, 0.0);
  for (const Row& row : data) {
    for (Cpd& c : out.nodes) {
      c.counts[static_cast<std::size_t>(c.config_of(row) * c.cardinality + row[static_cast<std::size_t>(c.node)])] += 1.0;
    }
  }
  for (Cpd& c : out.nodes) {
    for (int j = 0; j < c.configs(); ++j) c.normalize_row(j);
  }
  return out;
}

void bayesian_update_in_place(Cpds& cpds, const Row& row) {
  for (Cpd& c : cpds.nodes) {
    const int v = row[static_cast<std::size_t>(c.node)];
    if (v < 0 || v >= c.cardinality) throw DataError("observation value out of range");
    const int j = c.config_of(row);
    c.counts[static_cast<std::size_t>(j * c.cardinality + v)] += 1.0;
    c.normalize_row(j);
  }
}

Cpds bayesian_update(Cpds cpds, const Row& row) {
  bayesian_update_in_place(cpds, row);
  return cpds;
}

std::vector<double> posterior(const Dag& dag, const Cpds& cpds, int target, const Row& evidence) {
  const int r = dag.cardinality(target);
  const std::vector<int> children = dag.children(target);
  Row e = evidence;
  std::vector<double> out(static_cast<std::size_t>(r), 0.0);
  double total = 0.0;
  for (int k = 0; k < r; ++k) {
    e[static_cast<std::size_t>(target)] = k;
    double p = cpds.prob(target, e);
    for (int c : children) p *= cpds.prob(c, e);
    out[static_cast<std::size_t>(k)] = p;
    total += p;
  }
  for (double& p : out) p = total > 0.0 ? p / total : 1.0 / r;
  return out;
}

void to_json(json& j, const Dag& dag) {
  json nodes = json::array();
  for (int i = 0; i < dag.size(); ++i) {
    nodes.push_back({{"name", dag.name(i)}, {"cardinality", dag.cardinality(i)}});
  }
  json edges = json::array();
  for (const auto& [u, v] : dag.edges()) edges.push_back({dag.name(u), dag.name(v)});
  j = json{{"nodes", nodes}, {"edges", edges}};
}

void to_json(json& j, const Cpds& cpds) {
  j = json::array();
  for (const Cpd& c : cpds.nodes) {
    j.push_back({{"node", c.node},
                 {"cardinality", c.cardinality},
                 {"parents", c.parents},
                 {"counts", c.counts},
                 {"probs", c.probs}});
  }
}

}  // namespace tomxrl
