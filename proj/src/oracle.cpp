#include "moat/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>

#include "moat/errors.hpp"
#include "moat/linalg.hpp"

namespace moat::oracle {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct UnionFind {
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    return true;
  }
  std::vector<int> parent;
};

void check_weights(int n, std::span<const double> weights) {
  if (n < 1) throw ShapeError("graph needs at least one vertex");
  if (weights.size() != pair_count(n)) throw ShapeError("weight vector does not match K_n");
}

// log of the weighted spanning-tree sum of the graph obtained from K_n by
// contracting the components of `uf` and dropping `excluded` pairs. Pairs
// inside one component are ignored.
double contracted_log_trees(int n, std::span<const double> weights, UnionFind uf, const std::vector<bool>& excluded) {
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  int groups = 0;
  for (int v = 0; v < n; ++v) {
    const int r = uf.find(v);
    if (label[static_cast<std::size_t>(r)] < 0) label[static_cast<std::size_t>(r)] = groups++;
    label[static_cast<std::size_t>(v)] = label[static_cast<std::size_t>(r)];
  }
  if (groups == 1) return 0.0;
  Matrix lap = Matrix::Zero(groups, groups);
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      const std::size_t e = pair_index(n, u, v);
      if (excluded[e]) continue;
      const int a = label[static_cast<std::size_t>(u)];
      const int b = label[static_cast<std::size_t>(v)];
      if (a == b) continue;
      lap(a, a) += weights[e];
      lap(b, b) += weights[e];
      lap(a, b) -= weights[e];
      lap(b, a) -= weights[e];
    }
  }
  const auto det = signed_log_det(lap.topLeftCorner(groups - 1, groups - 1));
  return det.sign > 0 ? det.log_abs : kNegInf;
}

double tree_weight(std::span<const double> weights, const SpanningTree& tree) {
  double w = 1.0;
  for (const Edge& e : tree.edges()) w *= weights[pair_index(tree.num_vertices(), e.u, e.v)];
  return w;
}

}  // namespace

Graph Graph::complete(int n) {
  Graph g{n, {}};
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) g.edges.push_back({u, v});
  return g;
}

Graph Graph::path(int n) {
  Graph g{n, {}};
  for (int v = 0; v + 1 < n; ++v) g.edges.push_back({v, v + 1});
  return g;
}

Graph Graph::star(int n) {
  Graph g{n, {}};
  for (int v = 1; v < n; ++v) g.edges.push_back({0, v});
  return g;
}

std::vector<double> Graph::weights() const {
  std::vector<double> w(pair_count(n), 0.0);
  for (const Edge& e : edges) w[pair_index(n, e.u, e.v)] = 1.0;
  return w;
}

bool Graph::connected() const {
  UnionFind uf(n);
  int components = n;
  for (const Edge& e : edges)
    if (uf.unite(e.u, e.v)) --components;
  return components == 1;
}

std::vector<Graph> connected_graphs(int n) {
  if (n < 1 || n > 6) throw CapacityError("connected graph enumeration supports 1..6 vertices");
  const std::size_t m = pair_count(n);
  std::vector<Edge> pairs;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) pairs.push_back({u, v});
  std::vector<Graph> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    Graph g{n, {}};
    for (std::size_t e = 0; e < m; ++e)
      if (mask >> e & 1u) g.edges.push_back(pairs[e]);
    if (g.connected()) out.push_back(std::move(g));
  }
  return out;
}

bool three_colorable(const Graph& graph) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(graph.n));
  for (const Edge& e : graph.edges) {
    adj[static_cast<std::size_t>(e.u)].push_back(e.v);
    adj[static_cast<std::size_t>(e.v)].push_back(e.u);
  }
  std::vector<int> color(static_cast<std::size_t>(graph.n), -1);
  std::function<bool(int)> assign = [&](int v) {
    if (v == graph.n) return true;
    for (int c = 0; c < 3; ++c) {
      bool ok = true;
      for (int w : adj[static_cast<std::size_t>(v)])
        if (color[static_cast<std::size_t>(w)] == c) ok = false;
      if (!ok) continue;
      color[static_cast<std::size_t>(v)] = c;
      if (assign(v + 1)) return true;
      color[static_cast<std::size_t>(v)] = -1;
    }
    return false;
  };
  return assign(0);
}

std::vector<SpanningTree> enumerate_spanning_trees(int n, std::span<const double> weights) {
  check_weights(n, weights);
  if (n > kMaxEnumerateVertices) {
    throw CapacityError("spanning-tree enumeration supports at most " + std::to_string(kMaxEnumerateVertices) +
                        " vertices");
  }
  std::vector<Edge> candidates;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (weights[pair_index(n, u, v)] > 0.0) candidates.push_back({u, v});
  std::vector<SpanningTree> out;
  std::vector<Edge> chosen;
  const auto need = static_cast<std::size_t>(n - 1);
  std::function<void(std::size_t, const UnionFind&)> recurse = [&](std::size_t i, const UnionFind& uf) {
    if (chosen.size() == need) {
      out.emplace_back(n, chosen);
      return;
    }
    if (candidates.size() - i < need - chosen.size()) return;
    const Edge e = candidates[i];
    UnionFind merged = uf;
    if (merged.unite(e.u, e.v)) {
      chosen.push_back(e);
      recurse(i + 1, merged);
      chosen.pop_back();
    }
    recurse(i + 1, uf);
  };
  recurse(0, UnionFind(n));
  return out;
}

std::vector<SpanningTree> enumerate_spanning_trees(const Graph& graph) {
  return enumerate_spanning_trees(graph.n, graph.weights());
}

double enumerated_log_partition(int n, std::span<const double> weights) {
  double z = 0.0;
  for (const auto& t : enumerate_spanning_trees(n, weights)) z += tree_weight(weights, t);
  return std::log(z);
}

double brute_likelihood(const MoatModel& model, std::span<const int> x) {
  const int n = model.domain.size();
  if (n > kMaxBruteVertices) throw CapacityError("brute-force likelihood supports at most 8 variables");
  const auto trees = enumerate_spanning_trees(n, model.weights);
  return brute_likelihood(model, trees, x);
}

double brute_likelihood(const MoatModel& model, std::span<const SpanningTree> trees, std::span<const int> x) {
  double z = 0.0;
  double total = 0.0;
  for (const auto& t : trees) {
    const double w = tree_weight(model.weights, t);
    z += w;
    const double ll = tree_log_likelihood(t, model.table, x);
    if (std::isfinite(ll)) total += w * std::exp(ll);
  }
  if (!(z > 0.0)) throw NumericError("no spanning tree with positive weight");
  return total / z;
}

PosteriorEstimate brute_posterior(const MoatModel& model, const Evidence& evidence) {
  const int n = model.domain.size();
  if (n > kMaxBruteVertices) throw CapacityError("brute-force posterior supports at most 8 variables");
  const auto trees = enumerate_spanning_trees(n, model.weights);
  PosteriorEstimate est;
  est.variables = evidence.free_variables();
  for (int v : est.variables) est.probabilities.emplace_back(static_cast<std::size_t>(model.domain.card(v)), 0.0);
  Assignment x = evidence.seed_assignment();
  double total = 0.0;
  do {
    const double p = brute_likelihood(model, trees, x);
    total += p;
    for (std::size_t j = 0; j < est.variables.size(); ++j)
      est.probabilities[j][static_cast<std::size_t>(x[static_cast<std::size_t>(est.variables[j])])] += p;
    ++est.sample_count;
  } while (next_assignment(x, model.domain, est.variables));
  if (!(total > 0.0)) throw NumericError("zero-probability evidence");
  for (auto& p : est.probabilities)
    for (double& v : p) v /= total;
  return est;
}

MapResult brute_map(const MoatModel& model) {
  if (model.domain.num_assignments() > kMaxMapAssignments) throw CapacityError("MAP search space exceeds 1e6 assignments");
  const auto trees = enumerate_spanning_trees(model.domain.size(), model.weights);
  Assignment x(static_cast<std::size_t>(model.domain.size()), 0);
  MapResult best{x, -1.0};
  do {
    const double p = brute_likelihood(model, trees, x);
    // Values within rounding of the incumbent count as ties.
    if (p > best.probability * (1.0 + 1e-12) + 1e-300) best = {x, p};
  } while (next_assignment(x, model.domain));
  return best;
}

MoatModel map_hardness_gadget(const Graph& graph) {
  if (graph.n < 2) throw ShapeError("gadget needs at least two vertices");
  if (!graph.connected()) throw ShapeError("gadget graph must be connected");
  const VarDomain domain(std::vector<int>(static_cast<std::size_t>(graph.n), 3));
  MarginalTable table(domain);
  for (int v = 0; v < graph.n; ++v)
    for (double& p : table.univariate(v)) p = 1.0 / 3.0;
  for (std::size_t e = 0; e < domain.num_pairs(); ++e) {
    auto cells = table.pair_cells(e);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) cells[static_cast<std::size_t>(a * 3 + b)] = a == b ? 0.0 : 1.0 / 6.0;
  }
  return MoatModel(domain, graph.weights(), std::move(table));
}

double map_gadget_target(int n) { return 1.0 / (3.0 * std::ldexp(1.0, n - 1)); }

double leafcount_epsilon_bound(int n) { return 1.0 / (std::ldexp(1.0, n + 1) * std::pow(n, n - 2)); }

LeafcountGadget leafcount_gadget(const Graph& graph, double epsilon) {
  if (graph.n < 3) throw ShapeError("leaf-count gadget needs at least three vertices");
  if (!graph.connected()) throw ShapeError("gadget graph must be connected");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ShapeError("gadget epsilon must lie in (0, 1)");
  const VarDomain domain = VarDomain::binary(graph.n);
  MarginalTable table(domain);
  for (int v = 0; v < graph.n; ++v) {
    table.univariate(v)[0] = epsilon;
    table.univariate(v)[1] = -1.0;
  }
  for (std::size_t e = 0; e < domain.num_pairs(); ++e) {
    auto cells = table.pair_cells(e);
    cells[0] = epsilon;
    cells[1] = -epsilon;
    cells[2] = -epsilon;
    cells[3] = 0.0;
  }
  return {RawMoat{domain, graph.weights(), std::move(table)}, epsilon, epsilon < leafcount_epsilon_bound(graph.n)};
}

Assignment indicator_assignment(int n, std::span<const int> k_set) {
  Assignment x(static_cast<std::size_t>(n), 0);
  for (int v : k_set) {
    if (v < 0 || v >= n) throw ShapeError("vertex outside the graph");
    x[static_cast<std::size_t>(v)] = 1;
  }
  return x;
}

double leaf_superset_score(const LeafcountGadget& gadget, std::span<const int> k_set) {
  const int n = gadget.raw.domain.size();
  const double log_z = log_partition(n, gadget.raw.weights);
  return std::exp(log_z) * raw_evaluate(gadget.raw, indicator_assignment(n, k_set), log_z) / gadget.epsilon;
}

std::int64_t count_superset_leaf_trees(const LeafcountGadget& gadget, std::span<const int> k_set) {
  return std::llabs(std::llround(leaf_superset_score(gadget, k_set)));
}

std::int64_t count_exact_leaf_trees(const LeafcountGadget& gadget, std::span<const int> k_set) {
  const int n = gadget.raw.domain.size();
  if (n - static_cast<int>(k_set.size()) > kMaxLeafcountFree) throw CapacityError("too many variables outside K");
  std::vector<std::pair<int, int>> obs;
  for (int v : k_set) obs.emplace_back(v, 1);
  const Evidence evidence(gadget.raw.domain, obs);
  const double log_z = log_partition(n, gadget.raw.weights);
  const double f = raw_semiring_sum(gadget.raw, evidence);
  return std::llabs(std::llround(std::exp(log_z) * f / gadget.epsilon));
}

std::int64_t count_exact_leaf_trees(const Graph& graph, std::span<const int> k_set, double epsilon) {
  return count_exact_leaf_trees(leafcount_gadget(graph, epsilon), k_set);
}

std::int64_t enumerate_leaf_trees(const Graph& graph, std::span<const int> k_set, bool exact) {
  std::vector<int> want(k_set.begin(), k_set.end());
  std::sort(want.begin(), want.end());
  std::int64_t count = 0;
  for (const auto& t : enumerate_spanning_trees(graph)) {
    const auto leaves = t.leaves();  // ascending
    const bool hit = exact ? leaves == want : std::includes(leaves.begin(), leaves.end(), want.begin(), want.end());
    if (hit) ++count;
  }
  return count;
}

SpanningTree exact_tree_sampler_reference(int n, std::span<const double> weights, Rng& rng) {
  check_weights(n, weights);
  if (n > kMaxReferenceSamplerVertices) throw CapacityError("reference tree sampler supports at most 8 vertices");
  std::vector<bool> excluded(pair_count(n), false);
  for (std::size_t e = 0; e < excluded.size(); ++e) excluded[e] = !(weights[e] > 0.0);
  UnionFind uf(n);
  double log_current = contracted_log_trees(n, weights, uf, excluded);
  if (!std::isfinite(log_current)) throw NumericError("positive-weight graph is disconnected");
  std::vector<Edge> chosen;
  for (int u = 0; u < n && chosen.size() + 1 < static_cast<std::size_t>(n); ++u) {
    for (int v = u + 1; v < n && chosen.size() + 1 < static_cast<std::size_t>(n); ++v) {
      const std::size_t e = pair_index(n, u, v);
      if (excluded[e] || uf.find(u) == uf.find(v)) continue;
      UnionFind merged = uf;
      merged.unite(u, v);
      const double log_with = std::log(weights[e]) + contracted_log_trees(n, weights, merged, excluded);
      const double p_include = std::exp(log_with - log_current);
      if (rng.uniform() < p_include) {
        uf = std::move(merged);
        chosen.push_back({u, v});
        log_current = log_with - std::log(weights[e]);
      } else {
        excluded[e] = true;
        log_current = contracted_log_trees(n, weights, uf, excluded);
      }
    }
  }
  return SpanningTree(n, std::move(chosen));
}

FreeParams random_free_params(const VarDomain& domain, Rng& rng, double pair_scale) {
  FreeParams params(domain);
  for (double& x : params.edge_logits()) x = rng.normal();
  for (int v = 0; v < domain.size(); ++v)
    for (double& x : params.univariate(v)) x = rng.normal();
  for (std::size_t e = 0; e < domain.num_pairs(); ++e)
    for (double& x : params.pair(e)) x = pair_scale * rng.normal();
  return params;
}

MoatModel random_model(const VarDomain& domain, Rng& rng, double pair_scale) {
  return realize(random_free_params(domain, rng, pair_scale), domain);
}

EquivalenceReport run_equivalence_suite(std::uint64_t seed, int models, int max_n, std::ostream& log) {
  if (max_n > kMaxBruteVertices) throw CapacityError("equivalence suite supports n <= 8");
  EquivalenceReport report;
  Rng rng(seed);
  auto check = [&](bool ok, int model_id, const std::string& what, double got, double want) {
    ++report.checks;
    if (ok) return;
    ++report.failures;
    log << "FAIL model " << model_id << ": " << what << " got " << got << " want " << want << "\n";
  };
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); };
  for (int m = 0; m < models; ++m) {
    const int n = 2 + static_cast<int>(rng.below(static_cast<std::size_t>(max_n - 1)));
    std::vector<int> cards(static_cast<std::size_t>(n));
    const bool categorical = rng.below(2) == 1;
    for (int& k : cards) k = categorical ? 2 + static_cast<int>(rng.below(2)) : 2;
    const VarDomain domain(cards);
    const MoatModel model = random_model(domain, rng);
    const auto trees = enumerate_spanning_trees(n, model.weights);

    double z = 0.0;
    for (const auto& t : trees) z += tree_weight(model.weights, t);
    check(rel(log_partition(model), std::log(z)) <= 1e-10 || std::abs(log_partition(model) - std::log(z)) <= 1e-12, m,
          "log Z", log_partition(model), std::log(z));

    Assignment x(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) x[static_cast<std::size_t>(v)] = static_cast<int>(rng.below(static_cast<std::size_t>(cards[static_cast<std::size_t>(v)])));
    const double brute = brute_likelihood(model, trees, x);
    const double fast = std::exp(log_likelihood(model, x));
    check(rel(fast, brute) <= 1e-9, m, "likelihood of " + format_assignment(x), fast, brute);

    std::vector<std::pair<int, int>> obs;
    for (int v = 0; v < n; ++v)
      if (rng.below(3) == 0) obs.emplace_back(v, static_cast<int>(rng.below(static_cast<std::size_t>(cards[static_cast<std::size_t>(v)]))));
    const Evidence evidence(domain, obs);
    if (evidence.free_variables().empty()) continue;
    const auto exact = brute_posterior(model, evidence);
    const auto fast_post = exact_posterior(model, evidence);
    double worst = 0.0;
    for (std::size_t j = 0; j < exact.variables.size(); ++j)
      for (std::size_t a = 0; a < exact.probabilities[j].size(); ++a)
        worst = std::max(worst, std::abs(exact.probabilities[j][a] - fast_post.probabilities[j][a]));
    check(worst <= 1e-9, m, "posterior given " + evidence.to_string(), worst, 0.0);

    // One tree: message passing against summing its likelihood.
    const auto& tree = trees[rng.below(trees.size())];
    double total = 0.0;
    Assignment y = evidence.seed_assignment();
    const auto free_vars = evidence.free_variables();
    do {
      const double ll = tree_log_likelihood(tree, model.table, y);
      if (std::isfinite(ll)) total += std::exp(ll);
    } while (next_assignment(y, domain, free_vars));
    const double msg = std::exp(tree_evidence_log_prob(tree, model.table, evidence));
    check(rel(msg, total) <= 1e-10, m, "tree evidence on " + tree.to_string(), msg, total);
  }
  return report;
}

}  // namespace moat::oracle
