#include "moat/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "moat/errors.hpp"

namespace moat {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Vec = std::vector<double>;

struct RootedTree {
  int root = 0;
  std::vector<int> order;  // preorder
  std::vector<int> parent;
  std::vector<std::vector<int>> children;
};

RootedTree root_tree(const SpanningTree& tree, int root) {
  const int n = tree.num_vertices();
  const auto adj = tree.adjacency();
  RootedTree out;
  out.root = root;
  out.parent.assign(static_cast<std::size_t>(n), -1);
  out.children.resize(static_cast<std::size_t>(n));
  out.order.reserve(static_cast<std::size_t>(n));
  std::vector<int> stack{root};
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  seen[static_cast<std::size_t>(root)] = true;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    out.order.push_back(v);
    const auto& nbrs = adj[static_cast<std::size_t>(v)];
    for (auto it = nbrs.rbegin(); it != nbrs.rend(); ++it) {
      const int w = *it;
      if (seen[static_cast<std::size_t>(w)]) continue;
      seen[static_cast<std::size_t>(w)] = true;
      out.parent[static_cast<std::size_t>(w)] = v;
      out.children[static_cast<std::size_t>(v)].push_back(w);
      stack.push_back(w);
    }
  }
  return out;
}

int choose_root(const Evidence& evidence) {
  for (int v = 0; v < evidence.num_vars(); ++v)
    if (!evidence.observed(v)) return v;
  return 0;
}

// Scales v so its largest entry is 1; returns log of the factor removed, or
// -inf when v is identically zero.
double normalize_max(Vec& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  if (!(m > 0.0)) return kNegInf;
  for (double& x : v) x /= m;
  return std::log(m);
}

// State of one upward pass: inside vectors (evidence times child messages)
// and child -> parent messages, each max-normalized.
struct Upward {
  RootedTree rooted;
  // conditional[c][a * k_c + b] = P(X_c = b | X_parent = a)
  std::vector<Vec> conditional;
  std::vector<Vec> inside;
  std::vector<Vec> message;
  double log_scale = 0.0;
  bool impossible = false;
};

Vec conditional_table(const MarginalTable& table, int parent, int child) {
  const VarDomain& domain = table.domain();
  const int kp = domain.card(parent);
  const int kc = domain.card(child);
  Vec out(static_cast<std::size_t>(kp * kc), 0.0);
  for (int a = 0; a < kp; ++a) {
    const double pa = table.uni(parent, a);
    if (!(pa > 0.0)) continue;
    for (int b = 0; b < kc; ++b) out[static_cast<std::size_t>(a * kc + b)] = table.pair(parent, child, a, b) / pa;
  }
  return out;
}

void check_shapes(const SpanningTree& tree, const MarginalTable& table, const Evidence& evidence) {
  if (tree.num_vertices() != table.domain().size()) throw ShapeError("tree and table disagree on variable count");
  if (evidence.num_vars() != table.domain().size()) throw ShapeError("evidence and table disagree on variable count");
}

Upward upward_pass(const SpanningTree& tree, const MarginalTable& table, const Evidence& evidence) {
  check_shapes(tree, table, evidence);
  const VarDomain& domain = table.domain();
  const int n = domain.size();
  Upward up;
  up.rooted = root_tree(tree, choose_root(evidence));
  up.conditional.resize(static_cast<std::size_t>(n));
  up.inside.resize(static_cast<std::size_t>(n));
  up.message.resize(static_cast<std::size_t>(n));
  for (auto it = up.rooted.order.rbegin(); it != up.rooted.order.rend(); ++it) {
    const int v = *it;
    const auto vi = static_cast<std::size_t>(v);
    const auto kv = static_cast<std::size_t>(domain.card(v));
    Vec& in = up.inside[vi];
    in.assign(kv, evidence.observed(v) ? 0.0 : 1.0);
    if (evidence.observed(v)) in[static_cast<std::size_t>(evidence.value(v))] = 1.0;
    for (int c : up.rooted.children[vi]) {
      const Vec& m = up.message[static_cast<std::size_t>(c)];
      for (std::size_t a = 0; a < kv; ++a) in[a] *= m[a];
      const double s = normalize_max(in);
      if (!std::isfinite(s)) {
        up.impossible = true;
        return up;
      }
      up.log_scale += s;
    }
    const int p = up.rooted.parent[vi];
    if (p < 0) continue;
    up.conditional[vi] = conditional_table(table, p, v);
    const auto kp = static_cast<std::size_t>(domain.card(p));
    Vec m(kp, 0.0);
    const Vec& cond = up.conditional[vi];
    for (std::size_t a = 0; a < kp; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < kv; ++b) s += cond[a * kv + b] * in[b];
      m[a] = s;
    }
    const double s = normalize_max(m);
    if (!std::isfinite(s)) {
      up.impossible = true;
      return up;
    }
    up.log_scale += s;
    up.message[vi] = std::move(m);
  }
  return up;
}

double root_evidence_log_prob(const Upward& up, const MarginalTable& table) {
  if (up.impossible) return kNegInf;
  const int r = up.rooted.root;
  const auto p = table.univariate(r);
  const Vec& in = up.inside[static_cast<std::size_t>(r)];
  double s = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) s += p[a] * in[a];
  if (!(s > 0.0)) return kNegInf;
  return std::log(s) + up.log_scale;
}

VariableMarginals downward_marginals(const Upward& up, const MarginalTable& table, const Evidence& evidence) {
  const VarDomain& domain = table.domain();
  const int n = domain.size();
  std::vector<Vec> outside(static_cast<std::size_t>(n));
  const int r = up.rooted.root;
  const auto pr = table.univariate(r);
  outside[static_cast<std::size_t>(r)].assign(pr.begin(), pr.end());

  for (int p : up.rooted.order) {
    const auto pi = static_cast<std::size_t>(p);
    const auto kp = static_cast<std::size_t>(domain.card(p));
    const auto& kids = up.rooted.children[pi];
    if (kids.empty()) continue;
    Vec base = outside[pi];
    if (evidence.observed(p)) {
      for (std::size_t a = 0; a < kp; ++a)
        if (static_cast<int>(a) != evidence.value(p)) base[a] = 0.0;
    }
    // suffix[i] = product of messages of kids[i..]
    std::vector<Vec> suffix(kids.size() + 1, Vec(kp, 1.0));
    for (std::size_t i = kids.size(); i-- > 0;) {
      const Vec& m = up.message[static_cast<std::size_t>(kids[i])];
      for (std::size_t a = 0; a < kp; ++a) suffix[i][a] = suffix[i + 1][a] * m[a];
      normalize_max(suffix[i]);
    }
    Vec prefix(kp, 1.0);
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const int c = kids[i];
      const auto ci = static_cast<std::size_t>(c);
      const auto kc = static_cast<std::size_t>(domain.card(c));
      const Vec& cond = up.conditional[ci];
      Vec out(kc, 0.0);
      for (std::size_t a = 0; a < kp; ++a) {
        const double o = base[a] * prefix[a] * suffix[i + 1][a];
        if (o == 0.0) continue;
        for (std::size_t b = 0; b < kc; ++b) out[b] += o * cond[a * kc + b];
      }
      normalize_max(out);
      outside[ci] = std::move(out);
      const Vec& m = up.message[ci];
      for (std::size_t a = 0; a < kp; ++a) prefix[a] *= m[a];
      normalize_max(prefix);
    }
  }

  VariableMarginals result;
  for (int v = 0; v < n; ++v) {
    if (evidence.observed(v)) continue;
    const auto vi = static_cast<std::size_t>(v);
    Vec prob(outside[vi].size());
    double total = 0.0;
    for (std::size_t a = 0; a < prob.size(); ++a) {
      prob[a] = outside[vi][a] * up.inside[vi][a];
      total += prob[a];
    }
    if (!(total > 0.0)) throw NumericError("zero-probability evidence under the tree");
    for (double& x : prob) x /= total;
    result.variables.push_back(v);
    result.probabilities.push_back(std::move(prob));
  }
  return result;
}

}  // namespace

SpanningTree::SpanningTree(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
  if (n < 1) throw ShapeError("spanning tree needs at least one vertex");
  if (edges_.size() != static_cast<std::size_t>(n - 1)) {
    throw ShapeError("spanning tree on " + std::to_string(n) + " vertices needs " + std::to_string(n - 1) + " edges, got " +
                     std::to_string(edges_.size()));
  }
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  for (Edge& e : edges_) {
    if (e.u > e.v) std::swap(e.u, e.v);
    if (e.u < 0 || e.v >= n || e.u == e.v) throw ShapeError("invalid tree edge");
    const int a = find(e.u);
    const int b = find(e.v);
    if (a == b) throw ShapeError("tree edges contain a cycle");
    parent[static_cast<std::size_t>(a)] = b;
  }
  std::sort(edges_.begin(), edges_.end());
}

std::vector<int> SpanningTree::degrees() const {
  std::vector<int> deg(static_cast<std::size_t>(n_), 0);
  for (const Edge& e : edges_) {
    ++deg[static_cast<std::size_t>(e.u)];
    ++deg[static_cast<std::size_t>(e.v)];
  }
  return deg;
}

std::vector<int> SpanningTree::leaves() const {
  const auto deg = degrees();
  std::vector<int> out;
  for (int v = 0; v < n_; ++v)
    if (deg[static_cast<std::size_t>(v)] == 1) out.push_back(v);
  return out;
}

std::vector<std::vector<int>> SpanningTree::adjacency() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_));
  for (const Edge& e : edges_) {
    adj[static_cast<std::size_t>(e.u)].push_back(e.v);
    adj[static_cast<std::size_t>(e.v)].push_back(e.u);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

std::vector<std::size_t> SpanningTree::pair_indices() const {
  std::vector<std::size_t> out;
  out.reserve(edges_.size());
  for (const Edge& e : edges_) out.push_back(pair_index(n_, e.u, e.v));
  return out;
}

std::string SpanningTree::to_string() const {
  std::ostringstream out;
  out << '{';
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (i) out << ' ';
    out << edges_[i].u << '-' << edges_[i].v;
  }
  out << '}';
  return out.str();
}

double tree_log_likelihood(const SpanningTree& tree, const MarginalTable& table, std::span<const int> x) {
  const VarDomain& domain = table.domain();
  if (tree.num_vertices() != domain.size()) throw ShapeError("tree and table disagree on variable count");
  if (!domain.contains(x)) throw DataError("assignment " + format_assignment(x) + " lies outside the domain");
  double numerator = 0.0;
  for (const Edge& e : tree.edges()) {
    const double p = table.pair(e.u, e.v, x[static_cast<std::size_t>(e.u)], x[static_cast<std::size_t>(e.v)]);
    if (!(p > 0.0)) return kNegInf;
    numerator += std::log(p);
  }
  const auto deg = tree.degrees();
  double denominator = 0.0;
  for (int v = 0; v < domain.size(); ++v) {
    const int extra = deg[static_cast<std::size_t>(v)] - 1;
    if (extra == 0) continue;
    const double p = table.uni(v, x[static_cast<std::size_t>(v)]);
    if (!(p > 0.0)) {
      throw NumericError("inconsistent table: P_" + std::to_string(v) + " is zero under a nonzero pairwise cell");
    }
    denominator += extra * std::log(p);
  }
  return numerator - denominator;
}

double tree_evidence_log_prob(const SpanningTree& tree, const MarginalTable& table, const Evidence& evidence) {
  const Upward up = upward_pass(tree, table, evidence);
  return root_evidence_log_prob(up, table);
}

TreePosterior tree_posterior(const SpanningTree& tree, const MarginalTable& table, const Evidence& evidence) {
  const Upward up = upward_pass(tree, table, evidence);
  const double log_evidence = root_evidence_log_prob(up, table);
  if (!std::isfinite(log_evidence)) throw NumericError("zero-probability evidence under the tree");
  return {log_evidence, downward_marginals(up, table, evidence)};
}

VariableMarginals tree_conditional_marginals(const SpanningTree& tree, const MarginalTable& table,
                                             const Evidence& evidence) {
  return tree_posterior(tree, table, evidence).marginals;
}

Assignment tree_conditional_sample(const SpanningTree& tree, const MarginalTable& table, const Evidence& evidence,
                                   Rng& rng) {
  const Upward up = upward_pass(tree, table, evidence);
  if (!std::isfinite(root_evidence_log_prob(up, table))) {
    throw NumericError("zero-probability evidence under the tree");
  }
  const VarDomain& domain = table.domain();
  Assignment x(static_cast<std::size_t>(domain.size()), 0);
  const int r = up.rooted.root;
  {
    const auto p = table.univariate(r);
    const Vec& in = up.inside[static_cast<std::size_t>(r)];
    Vec w(p.size());
    for (std::size_t a = 0; a < w.size(); ++a) w[a] = p[a] * in[a];
    x[static_cast<std::size_t>(r)] = static_cast<int>(rng.categorical(w));
  }
  for (int v : up.rooted.order) {
    if (v == r) continue;
    const auto vi = static_cast<std::size_t>(v);
    const auto kv = static_cast<std::size_t>(domain.card(v));
    const int a = x[static_cast<std::size_t>(up.rooted.parent[vi])];
    const Vec& cond = up.conditional[vi];
    const Vec& in = up.inside[vi];
    Vec w(kv);
    for (std::size_t b = 0; b < kv; ++b) w[b] = cond[static_cast<std::size_t>(a) * kv + b] * in[b];
    x[vi] = static_cast<int>(rng.categorical(w));
  }
  return x;
}

}  // namespace moat
