#pragma once

#include <span>
#include <string>
#include <vector>

#include "moat/evidence.hpp"
#include "moat/model.hpp"
#include "moat/rng.hpp"

namespace moat {

struct Edge {
  int u;
  int v;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

// n-1 edges spanning n vertices with no cycle. Edges are normalized to u < v
// and kept sorted, so equal trees compare equal.
class SpanningTree {
 public:
  SpanningTree() = default;
  SpanningTree(int n, std::vector<Edge> edges);

  int num_vertices() const { return n_; }
  std::span<const Edge> edges() const { return edges_; }
  std::vector<int> degrees() const;
  std::vector<int> leaves() const;
  std::vector<std::vector<int>> adjacency() const;
  // Pair indices of the edges, ascending.
  std::vector<std::size_t> pair_indices() const;
  std::string to_string() const;

  bool operator==(const SpanningTree&) const = default;
  auto operator<=>(const SpanningTree&) const = default;

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
};

// Per-variable probability vectors for a list of variables.
struct VariableMarginals {
  std::vector<int> variables;
  std::vector<std::vector<double>> probabilities;
};

// log of prod_{(u,v) in T} P_uv(x_u, x_v) / prod_v P_v(x_v)^(deg v - 1).
double tree_log_likelihood(const SpanningTree& tree, const MarginalTable& table, std::span<const int> x);

// log sum_z Pr_T(z, e) by upward message passing.
double tree_evidence_log_prob(const SpanningTree& tree, const MarginalTable& table, const Evidence& evidence);

// Exact P_T(X_i | e) for every free variable i.
VariableMarginals tree_conditional_marginals(const SpanningTree& tree, const MarginalTable& table,
                                             const Evidence& evidence);

// Exact draw from P_T(X_free | e); observed variables keep their values.
Assignment tree_conditional_sample(const SpanningTree& tree, const MarginalTable& table, const Evidence& evidence,
                                   Rng& rng);

// Conditional marginals together with log P_T(e), sharing one upward pass.
struct TreePosterior {
  double log_evidence;
  VariableMarginals marginals;
};
TreePosterior tree_posterior(const SpanningTree& tree, const MarginalTable& table, const Evidence& evidence);

}  // namespace moat
