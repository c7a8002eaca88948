#pragma once

#include <span>
#include <vector>

#include "moat/rng.hpp"
#include "moat/tree.hpp"

namespace moat {

// Draws spanning trees of K_n with probability proportional to the product
// of edge weights, by Wilson's loop-erased random walk rooted at vertex 0.
// Walk steps pick a neighbour in proportion to the incident edge weight.
class TreeSampler {
 public:
  // Throws NumericError when the positive-weight graph is disconnected.
  TreeSampler(int n, std::span<const double> weights);

  int num_vertices() const { return n_; }
  SpanningTree operator()(Rng& rng) const;

 private:
  int step(int u, Rng& rng) const;

  int n_;
  // cumulative_[u][j]: running sum of weights from u to its j-th neighbour.
  std::vector<std::vector<double>> cumulative_;
  std::vector<std::vector<int>> neighbours_;
};

SpanningTree sample_tree(int n, std::span<const double> weights, Rng& rng);

// sum_{e in T} log w_e - log Z; -inf when T uses a zero-weight edge.
double exact_tree_log_prob(std::span<const double> weights, const SpanningTree& tree);
double exact_tree_log_prob(std::span<const double> weights, const SpanningTree& tree, double log_z);

}  // namespace moat
