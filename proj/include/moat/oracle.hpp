#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "moat/evidence.hpp"
#include "moat/inference.hpp"
#include "moat/likelihood.hpp"
#include "moat/model.hpp"
#include "moat/rng.hpp"
#include "moat/tree.hpp"

// Exhaustive reference implementations, capped at small sizes. Everything
// here is slow on purpose and shares no code path with the fast routines
// beyond the tree likelihood.
namespace moat::oracle {

struct Graph {
  int n = 0;
  std::vector<Edge> edges;

  static Graph complete(int n);
  static Graph path(int n);
  static Graph star(int n);  // centre 0
  // 0/1 weights over the pairs of K_n.
  std::vector<double> weights() const;
  bool connected() const;
};

// Every labelled connected graph on n vertices, in order of the edge bitmask.
std::vector<Graph> connected_graphs(int n);
bool three_colorable(const Graph& graph);

inline constexpr int kMaxEnumerateVertices = 9;
// All spanning trees of the positive-weight subgraph of K_n, each once, in
// the order of a deterministic include/exclude recursion over pairs.
std::vector<SpanningTree> enumerate_spanning_trees(int n, std::span<const double> weights);
std::vector<SpanningTree> enumerate_spanning_trees(const Graph& graph);
// log of sum_T prod_{e in T} w_e by enumeration.
double enumerated_log_partition(int n, std::span<const double> weights);

inline constexpr int kMaxBruteVertices = 8;
// (1/Z) sum_T (prod w_e) Pr_T(x) by direct enumeration of trees.
double brute_likelihood(const MoatModel& model, std::span<const int> x);
double brute_likelihood(const MoatModel& model, std::span<const SpanningTree> trees, std::span<const int> x);
PosteriorEstimate brute_posterior(const MoatModel& model, const Evidence& evidence);

struct MapResult {
  Assignment assignment;
  double probability;
};
inline constexpr std::uint64_t kMaxMapAssignments = 1000000;
// Exhaustive argmax; the lexicographically smallest maximiser wins ties.
MapResult brute_map(const MoatModel& model);

// Three-valued model whose MAP reaches 1/(3 * 2^(n-1)) exactly when the
// graph is 3-colourable.
MoatModel map_hardness_gadget(const Graph& graph);
double map_gadget_target(int n);

// Signed pseudo-marginal model whose likelihood counts spanning trees by
// their leaf sets.
struct LeafcountGadget {
  RawMoat raw;
  double epsilon;
  bool epsilon_valid;  // epsilon < leafcount_epsilon_bound(n)
};
double leafcount_epsilon_bound(int n);
LeafcountGadget leafcount_gadget(const Graph& graph, double epsilon);

// Full assignment with ones exactly on K.
Assignment indicator_assignment(int n, std::span<const int> k_set);
// Scaled gadget value Z * f / epsilon for the assignment with ones on K;
// its rounded magnitude counts trees whose leaves contain K.
double leaf_superset_score(const LeafcountGadget& gadget, std::span<const int> k_set);
std::int64_t count_superset_leaf_trees(const LeafcountGadget& gadget, std::span<const int> k_set);
// Same scaling applied to the semiring sum over completions of "ones on
// K": counts trees whose leaf set is exactly K.
inline constexpr int kMaxLeafcountFree = 16;
std::int64_t count_exact_leaf_trees(const LeafcountGadget& gadget, std::span<const int> k_set);
std::int64_t count_exact_leaf_trees(const Graph& graph, std::span<const int> k_set, double epsilon);

// Direct enumeration: trees of `graph` whose leaf set contains (or equals) K.
std::int64_t enumerate_leaf_trees(const Graph& graph, std::span<const int> k_set, bool exact);

inline constexpr int kMaxReferenceSamplerVertices = 8;
// Exact spanning-tree draw by deciding pairs in order, each with the
// probability given by a ratio of Matrix-Tree determinants of the
// contracted graph.
SpanningTree exact_tree_sampler_reference(int n, std::span<const double> weights, Rng& rng);

// Valid model from N(0, 1) free parameters (pair parameters scaled by
// pair_scale), realized through the constrained map.
MoatModel random_model(const VarDomain& domain, Rng& rng, double pair_scale = 1.5);
FreeParams random_free_params(const VarDomain& domain, Rng& rng, double pair_scale = 1.5);

// Fast paths against enumeration on random models with n <= max_n:
// likelihood, partition function, tree evidence and conditionals, exact
// posterior. Writes one line per failure; returns the failure count.
struct EquivalenceReport {
  int checks = 0;
  int failures = 0;
};
EquivalenceReport run_equivalence_suite(std::uint64_t seed, int models, int max_n, std::ostream& log);

}  // namespace moat::oracle
