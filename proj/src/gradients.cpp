#include "moat/gradients.hpp"

#include <cmath>
#include <vector>

#include "moat/detail/realize.hpp"
#include "moat/errors.hpp"
#include "moat/likelihood.hpp"
#include "moat/linalg.hpp"
#include "moat/parallel.hpp"

namespace moat {

namespace {

constexpr std::size_t kMaxBlocks = 8;

// d log Pr / d (table cell), summed over a block of rows.
struct CellAccumulator {
  std::vector<double> edge;                    // d / d log w_e, data part
  std::vector<std::vector<double>> univariate;  // d / d P_v(a)
  std::vector<std::vector<double>> pairwise;    // d / d P_uv(a, b)
  double log_likelihood = 0.0;

  explicit CellAccumulator(const VarDomain& domain)
      : edge(domain.num_pairs(), 0.0), univariate(static_cast<std::size_t>(domain.size())), pairwise(domain.num_pairs()) {
    for (int v = 0; v < domain.size(); ++v) univariate[static_cast<std::size_t>(v)].assign(static_cast<std::size_t>(domain.card(v)), 0.0);
    for (std::size_t e = 0; e < domain.num_pairs(); ++e) {
      const auto [u, v] = domain.pair_vertices(e);
      pairwise[e].assign(static_cast<std::size_t>(domain.card(u) * domain.card(v)), 0.0);
    }
  }

  void add(const CellAccumulator& other) {
    for (std::size_t e = 0; e < edge.size(); ++e) edge[e] += other.edge[e];
    for (std::size_t v = 0; v < univariate.size(); ++v)
      for (std::size_t a = 0; a < univariate[v].size(); ++a) univariate[v][a] += other.univariate[v][a];
    for (std::size_t e = 0; e < pairwise.size(); ++e)
      for (std::size_t c = 0; c < pairwise[e].size(); ++c) pairwise[e][c] += other.pairwise[e][c];
    log_likelihood += other.log_likelihood;
  }
};

void accumulate_row(const MoatModel& model, std::span<const int> x, double log_z, CellAccumulator& acc,
                    std::vector<double>& coeff, std::vector<double>& traces) {
  const VarDomain& domain = model.domain;
  const MarginalTable& table = model.table;
  const int n = domain.size();
  if (!domain.contains(x)) throw DataError("assignment " + format_assignment(x) + " lies outside the domain");

  double log_prod = 0.0;
  for (int v = 0; v < n; ++v) {
    const double p = table.uni(v, x[static_cast<std::size_t>(v)]);
    if (!(p > 0.0)) throw NumericError("zero likelihood: P_" + std::to_string(v) + " vanishes on the assignment");
    log_prod += std::log(p);
  }
  for (std::size_t e = 0; e < coeff.size(); ++e) {
    const auto [u, v] = domain.pair_vertices(e);
    const int a = x[static_cast<std::size_t>(u)];
    const int b = x[static_cast<std::size_t>(v)];
    coeff[e] = model.weights[e] * table.pair(u, v, a, b) / (table.uni(u, a) * table.uni(v, b));
  }
  const auto fact = factor_minor(laplacian_minor(n, coeff));
  if (fact.det.sign <= 0) throw NumericError("singular likelihood minor (zero likelihood)");
  edge_traces(n, fact.inverse, traces);

  acc.log_likelihood += log_prod + fact.det.log_abs - log_z;
  for (int v = 0; v < n; ++v) {
    const int a = x[static_cast<std::size_t>(v)];
    acc.univariate[static_cast<std::size_t>(v)][static_cast<std::size_t>(a)] += 1.0 / table.uni(v, a);
  }
  for (std::size_t e = 0; e < coeff.size(); ++e) {
    const auto [u, v] = domain.pair_vertices(e);
    const int a = x[static_cast<std::size_t>(u)];
    const int b = x[static_cast<std::size_t>(v)];
    const double term = coeff[e] * traces[e];  // d log det / d log z_e
    acc.edge[e] += term;
    const double pu = table.uni(u, a);
    const double pv = table.uni(v, b);
    acc.pairwise[e][static_cast<std::size_t>(a * domain.card(v) + b)] += model.weights[e] * traces[e] / (pu * pv);
    acc.univariate[static_cast<std::size_t>(u)][static_cast<std::size_t>(a)] -= term / pu;
    acc.univariate[static_cast<std::size_t>(v)][static_cast<std::size_t>(b)] -= term / pv;
  }
}

}  // namespace

BatchGradient batch_gradient(const MoatModel& model, const FreeParams& params, const DataMatrix& data,
                             std::span<const std::size_t> rows) {
  const VarDomain& domain = model.domain;
  if (!(params.domain() == domain)) throw ShapeError("free parameters are not shaped for this model");
  if (data.cols() != static_cast<std::size_t>(domain.size())) throw DataError("data width does not match model");
  const std::size_t count = rows.empty() ? data.rows() : rows.size();
  if (count == 0) throw DataError("empty batch");
  const int n = domain.size();

  const auto z_fact = factor_minor(laplacian_minor(n, model.weights));
  if (z_fact.det.sign <= 0) throw NumericError("singular partition minor (Z = 0)");
  const double log_z = z_fact.det.log_abs;
  std::vector<double> z_traces(domain.num_pairs());
  edge_traces(n, z_fact.inverse, z_traces);

  const std::size_t blocks = block_count(count, kMaxBlocks);
  std::vector<CellAccumulator> partial(blocks, CellAccumulator(domain));
  parallel_for(blocks, [&](std::size_t b) {
    std::vector<double> coeff(domain.num_pairs());
    std::vector<double> traces(domain.num_pairs());
    const auto range = block_range(count, blocks, b);
    for (std::size_t i = range.begin; i < range.end; ++i) {
      const std::size_t row = rows.empty() ? i : rows[i];
      accumulate_row(model, data.row(row), log_z, partial[b], coeff, traces);
    }
  });
  CellAccumulator total = std::move(partial[0]);
  for (std::size_t b = 1; b < blocks; ++b) total.add(partial[b]);

  const double inv_count = 1.0 / static_cast<double>(count);
  BatchGradient out{Gradient(params.layout()), total.log_likelihood * inv_count};
  Gradient& grad = out.gradient;

  auto edges = grad.edge_logits();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    edges[e] = total.edge[e] * inv_count - model.weights[e] * z_traces[e];
  }

  // Softmax Jacobian: dP(a)/d logit_j = P(a) (delta_{a, j+1} - P(j+1)).
  for (int v = 0; v < n; ++v) {
    const auto p = model.table.univariate(v);
    const auto& g = total.univariate[static_cast<std::size_t>(v)];
    double dot = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) dot += g[a] * p[a];
    auto out_v = grad.univariate(v);
    for (std::size_t j = 0; j < out_v.size(); ++j) out_v[j] = p[j + 1] * (g[j + 1] - dot) * inv_count;
  }

  for (std::size_t e = 0; e < domain.num_pairs(); ++e) {
    const auto [u, v] = domain.pair_vertices(e);
    const auto& g = total.pairwise[e];
    bool any = false;
    for (double x : g) any = any || x != 0.0;
    if (!any) continue;
    const auto jac = detail::pair_jacobian(params.univariate(u), params.univariate(v), params.pair(e));
    auto out_u = grad.univariate(u);
    auto out_v = grad.univariate(v);
    auto out_p = grad.pair(e);
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (g[c] == 0.0) continue;
      const double gc = g[c] * inv_count;
      std::size_t l = 0;
      for (std::size_t j = 0; j < jac.num_u; ++j, ++l) out_u[j] += gc * jac.at(c, l);
      for (std::size_t j = 0; j < jac.num_v; ++j, ++l) out_v[j] += gc * jac.at(c, l);
      for (std::size_t j = 0; l < jac.num_local; ++j, ++l) out_p[j] += gc * jac.at(c, l);
    }
  }
  return out;
}

Gradient grad_batch(const MoatModel& model, const FreeParams& params, const DataMatrix& data) {
  return batch_gradient(model, params, data).gradient;
}

Gradient grad_log_likelihood(const MoatModel& model, const FreeParams& params, std::span<const int> x) {
  DataMatrix single(x.size(), std::vector<int>(x.begin(), x.end()));
  return batch_gradient(model, params, single).gradient;
}

}  // namespace moat
