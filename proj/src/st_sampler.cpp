#include "moat/st_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "moat/errors.hpp"
#include "moat/likelihood.hpp"

namespace moat {

TreeSampler::TreeSampler(int n, std::span<const double> weights) : n_(n) {
  if (n < 1) throw ShapeError("tree sampler needs at least one vertex");
  if (weights.size() != pair_count(n)) throw ShapeError("weight vector does not match K_n");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ShapeError("edge weights must be finite and nonnegative");
  if (!positive_weights_connected(n, weights)) throw NumericError("positive-weight graph is disconnected");
  cumulative_.resize(static_cast<std::size_t>(n));
  neighbours_.resize(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    double total = 0.0;
    for (int v = 0; v < n; ++v) {
      if (v == u) continue;
      const double w = weights[pair_index(n, u, v)];
      if (!(w > 0.0)) continue;
      total += w;
      cumulative_[static_cast<std::size_t>(u)].push_back(total);
      neighbours_[static_cast<std::size_t>(u)].push_back(v);
    }
  }
}

int TreeSampler::step(int u, Rng& rng) const {
  const auto& cum = cumulative_[static_cast<std::size_t>(u)];
  const double target = rng.uniform() * cum.back();
  auto it = std::upper_bound(cum.begin(), cum.end(), target);
  if (it == cum.end()) --it;
  return neighbours_[static_cast<std::size_t>(u)][static_cast<std::size_t>(it - cum.begin())];
}

SpanningTree TreeSampler::operator()(Rng& rng) const {
  const auto n = static_cast<std::size_t>(n_);
  std::vector<bool> in_tree(n, false);
  std::vector<int> next(n, -1);
  in_tree[0] = true;
  for (int start = 1; start < n_; ++start) {
    int u = start;
    while (!in_tree[static_cast<std::size_t>(u)]) {
      next[static_cast<std::size_t>(u)] = step(u, rng);
      u = next[static_cast<std::size_t>(u)];
    }
    // Following the last exit from each vertex erases the loops.
    u = start;
    while (!in_tree[static_cast<std::size_t>(u)]) {
      in_tree[static_cast<std::size_t>(u)] = true;
      u = next[static_cast<std::size_t>(u)];
    }
  }
  std::vector<Edge> edges;
  edges.reserve(n - 1);
  for (int u = 1; u < n_; ++u) edges.push_back({u, next[static_cast<std::size_t>(u)]});
  return SpanningTree(n_, std::move(edges));
}

SpanningTree sample_tree(int n, std::span<const double> weights, Rng& rng) { return TreeSampler(n, weights)(rng); }

double exact_tree_log_prob(std::span<const double> weights, const SpanningTree& tree) {
  const int n = tree.num_vertices();
  if (weights.size() != pair_count(n)) throw ShapeError("weight vector does not match the tree");
  for (const Edge& e : tree.edges())
    if (!(weights[pair_index(n, e.u, e.v)] > 0.0)) return -std::numeric_limits<double>::infinity();
  return exact_tree_log_prob(weights, tree, log_partition(n, weights));
}

double exact_tree_log_prob(std::span<const double> weights, const SpanningTree& tree, double log_z) {
  const int n = tree.num_vertices();
  if (weights.size() != pair_count(n)) throw ShapeError("weight vector does not match the tree");
  double s = 0.0;
  for (const Edge& e : tree.edges()) {
    const double w = weights[pair_index(n, e.u, e.v)];
    if (!(w > 0.0)) return -std::numeric_limits<double>::infinity();
    s += std::log(w);
  }
  return s - log_z;
}

}  // namespace moat
