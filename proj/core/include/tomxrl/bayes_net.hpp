#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tomxrl/common.hpp"

namespace tomxrl {

// Node layout of the theory-of-mind network.
inline constexpr int kBombNode = 0;
inline constexpr int kDistanceNode = 1;
inline constexpr int kTimeNode = 2;
inline constexpr int kActionNode = 3;
inline constexpr int kTomNodes = 4;

constexpr int node_of(Feature f) { return static_cast<int>(f); }

// One categorical observation per node, values in [0, cardinality).
using Row = std::vector<int>;

using Edge = std::pair<int, int>;

// Directed acyclic graph over a fixed node set (at most 32 nodes), with the
// per-node state cardinalities.
class Dag {
 public:
  Dag() = default;
  Dag(std::vector<int> cardinalities, std::vector<std::string> names);

  // Empty DAG over {bomb_type, distance, time, action}.
  static Dag tom(int bomb_levels, int distance_bins, int time_bins);

  int size() const { return static_cast<int>(cards_.size()); }
  int cardinality(int node) const { return cards_[static_cast<std::size_t>(node)]; }
  const std::vector<int>& cardinalities() const { return cards_; }
  const std::string& name(int node) const { return names_[static_cast<std::size_t>(node)]; }

  bool has_edge(int from, int to) const { return (parents_[static_cast<std::size_t>(to)] >> from) & 1U; }
  std::uint32_t parent_mask(int node) const { return parents_[static_cast<std::size_t>(node)]; }
  std::vector<int> parents(int node) const;
  std::vector<int> children(int node) const;
  // Sorted lexicographically by (from, to).
  std::vector<Edge> edges() const;
  int num_edges() const;

  // True when adding from->to keeps the graph acyclic.
  bool can_add_without_cycle(int from, int to) const;
  bool is_acyclic() const;

  void add_edge(int from, int to);
  void remove_edge(int from, int to);

  std::string edge_string() const;  // "bomb_type->action;time->action"
  std::uint64_t hash() const { return fnv1a(edge_string()); }
  std::string to_dot() const;

  friend bool operator==(const Dag&, const Dag&) = default;

 private:
  bool reaches(int from, int to) const;

  std::vector<int> cards_;
  std::vector<std::string> names_;
  std::vector<std::uint32_t> parents_;
};

// Edges the search may not use.
class ConstraintSet {
 public:
  explicit ConstraintSet(int nodes = 0);

  // Observations are exogenous: only observation -> action edges are allowed.
  static ConstraintSet tom_default();
  static ConstraintSet unrestricted(int nodes) { return ConstraintSet(nodes); }

  void forbid(int from, int to);
  bool allowed(int from, int to) const;
  int nodes() const { return nodes_; }

 private:
  int nodes_;
  std::vector<bool> forbidden_;
};

// BDeu log marginal likelihood.
double bdeu_score(const Dag& dag, std::span<const Row> data, double ess);

// Family term of one node with the given parent mask.
double bdeu_family_score(const Dag& dag, int node, std::uint32_t parent_mask,
                         std::span<const Row> data, double ess);

// Strict total order used for structure selection: higher score, then fewer
// edges, then the lexicographically smaller edge list. Scores within 1e-9
// (relative) are ties.
bool structure_preferred(const Dag& a, double score_a, const Dag& b, double score_b);

// Best-improvement local search using add, remove and reverse moves that
// respect the constraints and acyclicity. Runs from the empty graph and from
// the densest admissible graph and keeps the preferred result.
Dag hill_climb(std::span<const Row> data, const Dag& empty, const ConstraintSet& constraints,
               double ess);

// Conditional probability table of one node.
struct Cpd {
  int node = 0;
  int cardinality = 0;
  std::vector<int> parents;       // ascending node ids
  std::vector<int> parent_cards;  // same order
  std::vector<double> counts;     // configs x cardinality pseudo-counts
  std::vector<double> probs;      // row-normalized counts, uniform when a row is empty

  int configs() const { return static_cast<int>(counts.size()) / cardinality; }
  // Parent configuration of a row; the first parent is the most significant digit.
  int config_of(const Row& row) const;
  double prob(int config, int state) const {
    return probs[static_cast<std::size_t>(config * cardinality + state)];
  }
  void normalize_row(int config);

  friend bool operator==(const Cpd&, const Cpd&) = default;
};

struct Cpds {
  std::vector<Cpd> nodes;

  const Cpd& at(int node) const { return nodes[static_cast<std::size_t>(node)]; }
  // P(x_node | parents) for a fully observed row.
  double prob(int node, const Row& row) const;

  friend bool operator==(const Cpds&, const Cpds&) = default;
};

// Every cell seeded with the same pseudo-count.
Cpds uniform_cpds(const Dag& dag, double pseudo_count);

// Relative frequencies; parent configurations without data are uniform.
Cpds fit_mle(const Dag& dag, std::span<const Row> data);

// Adds one to the matching count of every node and renormalizes those rows.
void bayesian_update_in_place(Cpds& cpds, const Row& row);
Cpds bayesian_update(Cpds cpds, const Row& row);

// Posterior of `target` given every other node observed in `evidence`
// (the target's entry is ignored). Uses the target's Markov blanket.
std::vector<double> posterior(const Dag& dag, const Cpds& cpds, int target, const Row& evidence);

void to_json(nlohmann::json& j, const Dag& dag);
void to_json(nlohmann::json& j, const Cpds& cpds);

}  // namespace tomxrl
