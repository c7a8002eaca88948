#include "moat/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "moat/detail/realize.hpp"
#include "moat/errors.hpp"

namespace moat {

namespace {

constexpr double kUnivariateTol = 1e-12;
constexpr double kPairTol = 1e-10;

double logit(double t) { return std::log(t) - std::log1p(-t); }

double clamp_fraction(double t) { return std::clamp(t, kInteriorClamp, 1.0 - kInteriorClamp); }

// Inverse of lo + sigmoid(param) * (hi - lo) for the interval of q_u, q_v.
double frechet_param(double target, double q_u, double q_v, const char* what) {
  const double lo = std::max(0.0, q_u + q_v - 1.0);
  const double hi = std::min(q_u, q_v);
  const double width = hi - lo;
  if (!(width > 0.0) || !std::isfinite(target)) {
    throw NumericError(std::string("degenerate Frechet interval while inverting ") + what);
  }
  return logit(clamp_fraction((target - lo) / width));
}

std::vector<double> clamped_univariate(std::span<const double> p) {
  std::vector<double> q(p.begin(), p.end());
  if (q.size() == 2) {
    const double p1 = std::clamp(q[1], kInteriorClamp, 1.0 - kInteriorClamp);
    return {1.0 - p1, p1};
  }
  for (double& x : q) x = std::max(x, kInteriorClamp);
  const double total = std::accumulate(q.begin(), q.end(), 0.0);
  for (double& x : q) x /= total;
  return q;
}

// Chain parameters of a (row-major ku x kv, ku <= kv) target table given the
// realized univariates: each lambda is the mass ratio of consecutive blocks.
void invert_chain_sorted(std::span<const double> pu, std::span<const double> pv, std::span<const double> target,
                         std::span<double> chain) {
  const std::size_t ku = pu.size();
  const std::size_t kv = pv.size();
  const std::size_t d = kv - ku;
  auto at = [&](std::size_t i, std::size_t j) { return target[i * kv + j]; };
  auto block_mass = [&](std::size_t rows, std::size_t cols) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) s += at(i, j);
    return s;
  };

  double su = pu[0] + pu[1];
  double sv = 0.0;
  double merged = 0.0;
  for (std::size_t j = 0; j < d + 2; ++j) sv += pv[j];
  for (std::size_t j = 0; j <= d; ++j) merged += pv[j];
  double first_row = 0.0;
  for (std::size_t j = 0; j <= d; ++j) first_row += at(0, j);
  const double base_mass = block_mass(2, d + 2);
  const double lambda_base = base_mass > 0.0 ? first_row / base_mass : 0.5;
  chain[0] = frechet_param(lambda_base, pu[0] / su, merged / sv, "categorical base block");

  for (std::size_t l = 3; l <= ku; ++l) {
    const std::size_t r = l - 1;
    const std::size_t c = l - 1 + d;
    const double su_next = su + pu[r];
    const double sv_next = sv + pv[c];
    const double outer = block_mass(r + 1, c + 1);
    const double lambda = outer > 0.0 ? block_mass(r, c) / outer : 0.5;
    chain[l - 2] = frechet_param(lambda, su / su_next, sv / sv_next, "categorical chain step");
    su = su_next;
    sv = sv_next;
  }
}

}  // namespace

ParamLayout::ParamLayout(const VarDomain& domain) : domain_(domain) {
  const int n = domain.size();
  std::size_t offset = domain.num_pairs();
  uni_offsets_.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    uni_offsets_[static_cast<std::size_t>(v)] = offset;
    offset += static_cast<std::size_t>(domain.card(v) - 1);
  }
  pair_offsets_.resize(domain.num_pairs());
  for (std::size_t e = 0; e < domain.num_pairs(); ++e) {
    pair_offsets_[e] = offset;
    offset += pair_param_count(e);
  }
  size_ = offset;
}

std::size_t ParamLayout::pair_param_count(std::size_t e) const {
  const auto [u, v] = domain_.pair_vertices(e);
  return static_cast<std::size_t>(std::min(domain_.card(u), domain_.card(v)) - 1);
}

MarginalTable::MarginalTable(const VarDomain& domain) : domain_(domain) {
  univariate_.resize(static_cast<std::size_t>(domain.size()));
  for (int v = 0; v < domain.size(); ++v) univariate_[static_cast<std::size_t>(v)].assign(static_cast<std::size_t>(domain.card(v)), 0.0);
  pairwise_.resize(domain.num_pairs());
  for (std::size_t e = 0; e < domain.num_pairs(); ++e) {
    const auto [u, v] = domain.pair_vertices(e);
    pairwise_[e].assign(static_cast<std::size_t>(domain.card(u) * domain.card(v)), 0.0);
  }
}

double MarginalTable::pair(int u, int v, int a, int b) const {
  const auto& cells = pairwise_[domain_.pair_index(u, v)];
  if (u < v) return cells[static_cast<std::size_t>(a * domain_.card(v) + b)];
  return cells[static_cast<std::size_t>(b * domain_.card(u) + a)];
}

void MarginalTable::set_pair(int u, int v, int a, int b, double p) {
  auto& cells = pairwise_[domain_.pair_index(u, v)];
  if (u < v) {
    cells[static_cast<std::size_t>(a * domain_.card(v) + b)] = p;
  } else {
    cells[static_cast<std::size_t>(b * domain_.card(u) + a)] = p;
  }
}

MoatModel::MoatModel(VarDomain dom, std::vector<double> w, MarginalTable tab)
    : domain(std::move(dom)), weights(std::move(w)), table(std::move(tab)) {
  if (weights.size() != domain.num_pairs()) {
    throw ShapeError("expected " + std::to_string(domain.num_pairs()) + " edge weights, got " +
                     std::to_string(weights.size()));
  }
  if (!(table.domain() == domain)) throw ShapeError("marginal table domain does not match model domain");
  for (double w : weights) {
    if (!(w >= 0.0)) throw ShapeError("edge weights must be nonnegative");
  }
}

MarginalTable realize_table(const FreeParams& params) {
  const VarDomain& domain = params.domain();
  MarginalTable table(domain);
  for (int v = 0; v < domain.size(); ++v) {
    const auto p = detail::softmax_with_zero<double>(params.univariate(v));
    std::copy(p.begin(), p.end(), table.univariate(v).begin());
  }
  for (std::size_t e = 0; e < domain.num_pairs(); ++e) {
    const auto [u, v] = domain.pair_vertices(e);
    detail::realize_pair<double>(table.univariate(u), table.univariate(v), params.pair(e), table.pair_cells(e));
  }
  return table;
}

MoatModel realize(const FreeParams& params, const VarDomain& domain) {
  if (!(params.domain() == domain)) throw ShapeError("free parameters are not shaped for this domain");
  for (double x : params.values()) {
    if (!std::isfinite(x)) throw ShapeError("free parameters must be finite");
  }
  std::vector<double> weights(domain.num_pairs());
  const auto logits = params.edge_logits();
  for (std::size_t e = 0; e < weights.size(); ++e) weights[e] = std::exp(logits[e]);
  return MoatModel(domain, std::move(weights), realize_table(params));
}

MarginalTable marginals_from_distribution(std::span<const double> joint, const VarDomain& domain) {
  if (static_cast<std::uint64_t>(joint.size()) != domain.num_assignments()) {
    throw ShapeError("joint has " + std::to_string(joint.size()) + " entries, domain has " +
                     std::to_string(domain.num_assignments()) + " assignments");
  }
  const double total = std::accumulate(joint.begin(), joint.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) {
    throw DataError("joint distribution sums to " + std::to_string(total) + ", not 1");
  }
  MarginalTable table(domain);
  const int n = domain.size();
  Assignment x(static_cast<std::size_t>(n), 0);
  std::size_t idx = 0;
  do {
    const double p = joint[idx++];
    for (int v = 0; v < n; ++v) table.univariate(v)[static_cast<std::size_t>(x[static_cast<std::size_t>(v)])] += p;
    for (std::size_t e = 0; e < domain.num_pairs(); ++e) {
      const auto [u, v] = domain.pair_vertices(e);
      table.pair_cells(e)[static_cast<std::size_t>(x[static_cast<std::size_t>(u)] * domain.card(v) +
                                                   x[static_cast<std::size_t>(v)])] += p;
    }
  } while (next_assignment(x, domain));
  return table;
}

FreeParams invert_marginals(const MarginalTable& table, const VarDomain& domain, std::span<const double> weights) {
  if (!(table.domain() == domain)) throw ShapeError("marginal table domain does not match");
  if (!weights.empty() && weights.size() != domain.num_pairs()) throw ShapeError("weight count mismatch");
  FreeParams params(domain);
  for (std::size_t e = 0; e < weights.size(); ++e) {
    if (!(weights[e] > 0.0) || !std::isfinite(weights[e])) {
      throw ShapeError("edge weights must be positive and finite to have a logit");
    }
    params.edge_logits()[e] = std::log(weights[e]);
  }

  // Univariates first; pair parameters are measured against the realized
  // (clamped) univariates so the pair intervals match realize().
  std::vector<std::vector<double>> realized(static_cast<std::size_t>(domain.size()));
  for (int v = 0; v < domain.size(); ++v) {
    const auto q = clamped_univariate(table.univariate(v));
    auto logits = params.univariate(v);
    for (std::size_t a = 1; a < q.size(); ++a) logits[a - 1] = std::log(q[a]) - std::log(q[0]);
    realized[static_cast<std::size_t>(v)] = detail::softmax_with_zero<double>(params.univariate(v));
  }

  for (std::size_t e = 0; e < domain.num_pairs(); ++e) {
    const auto [u, v] = domain.pair_vertices(e);
    const auto& pu = realized[static_cast<std::size_t>(u)];
    const auto& pv = realized[static_cast<std::size_t>(v)];
    const auto cells = table.pair_cells(e);
    auto out = params.pair(e);
    if (pu.size() == 2 && pv.size() == 2) {
      out[0] = frechet_param(cells[3], pu[1], pv[1], "binary pair");
    } else if (pu.size() <= pv.size()) {
      invert_chain_sorted(pu, pv, cells, out);
    } else {
      const std::size_t ku = pu.size();
      const std::size_t kv = pv.size();
      std::vector<double> transposed(cells.size());
      for (std::size_t i = 0; i < ku; ++i)
        for (std::size_t j = 0; j < kv; ++j) transposed[j * ku + i] = cells[i * kv + j];
      invert_chain_sorted(pv, pu, transposed, out);
    }
  }
  return params;
}

std::string Violation::describe() const {
  std::ostringstream out;
  switch (kind) {
    case Kind::kNormalization: out << "normalization"; break;
    case Kind::kRange: out << "range"; break;
    case Kind::kNegative: out << "negative cell"; break;
    case Kind::kRowSum: out << "row sum"; break;
    case Kind::kColumnSum: out << "column sum"; break;
    case Kind::kNonFinite: out << "non-finite"; break;
    case Kind::kWeight: out << "edge weight"; break;
    case Kind::kDisconnected: out << "disconnected weights"; break;
  }
  if (v >= 0) {
    out << " on pair (" << u << "," << v << ")";
  } else if (u >= 0) {
    out << " on variable " << u;
  }
  out << ", magnitude " << magnitude;
  return out.str();
}

std::vector<Violation> validate(const MarginalTable& table) {
  using Kind = Violation::Kind;
  std::vector<Violation> out;
  const VarDomain& domain = table.domain();
  for (int v = 0; v < domain.size(); ++v) {
    const auto p = table.univariate(v);
    double sum = 0.0;
    double worst_range = 0.0;
    bool finite = true;
    for (double x : p) {
      finite = finite && std::isfinite(x);
      sum += x;
      worst_range = std::max({worst_range, -x, x - 1.0});
    }
    if (!finite) {
      out.push_back({Kind::kNonFinite, v, -1, 0.0});
      continue;
    }
    if (std::abs(sum - 1.0) > kUnivariateTol) out.push_back({Kind::kNormalization, v, -1, std::abs(sum - 1.0)});
    if (worst_range > 0.0) out.push_back({Kind::kRange, v, -1, worst_range});
  }
  for (std::size_t e = 0; e < domain.num_pairs(); ++e) {
    const auto [u, v] = domain.pair_vertices(e);
    const auto cells = table.pair_cells(e);
    const auto ku = static_cast<std::size_t>(domain.card(u));
    const auto kv = static_cast<std::size_t>(domain.card(v));
    bool finite = true;
    double worst_negative = 0.0;
    double total = 0.0;
    for (double x : cells) {
      finite = finite && std::isfinite(x);
      worst_negative = std::max(worst_negative, -x);
      total += x;
    }
    if (!finite) {
      out.push_back({Kind::kNonFinite, u, v, 0.0});
      continue;
    }
    if (worst_negative > 0.0) out.push_back({Kind::kNegative, u, v, worst_negative});
    double worst_row = 0.0;
    for (std::size_t i = 0; i < ku; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < kv; ++j) s += cells[i * kv + j];
      worst_row = std::max(worst_row, std::abs(s - table.uni(u, static_cast<int>(i))));
    }
    if (worst_row > kPairTol) out.push_back({Kind::kRowSum, u, v, worst_row});
    double worst_col = 0.0;
    for (std::size_t j = 0; j < kv; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < ku; ++i) s += cells[i * kv + j];
      worst_col = std::max(worst_col, std::abs(s - table.uni(v, static_cast<int>(j))));
    }
    if (worst_col > kPairTol) out.push_back({Kind::kColumnSum, u, v, worst_col});
    if (std::abs(total - 1.0) > kPairTol) out.push_back({Kind::kNormalization, u, v, std::abs(total - 1.0)});
  }
  return out;
}

bool positive_weights_connected(int n, std::span<const double> weights) {
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  int components = n;
  std::size_t e = 0;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v, ++e) {
      if (!(weights[e] > 0.0)) continue;
      const int a = find(u);
      const int b = find(v);
      if (a != b) {
        parent[static_cast<std::size_t>(a)] = b;
        --components;
      }
    }
  }
  return components == 1;
}

std::vector<Violation> validate(const MoatModel& model) {
  auto out = validate(model.table);
  for (std::size_t e = 0; e < model.weights.size(); ++e) {
    const double w = model.weights[e];
    if (!(w >= 0.0) || !std::isfinite(w)) {
      const auto [u, v] = model.domain.pair_vertices(e);
      out.push_back({Violation::Kind::kWeight, u, v, w});
    }
  }
  if (!positive_weights_connected(model.domain.size(), model.weights)) {
    out.push_back({Violation::Kind::kDisconnected, -1, -1, 0.0});
  }
  return out;
}

namespace detail {

PairJacobian pair_jacobian(std::span<const double> logits_u, std::span<const double> logits_v,
                           std::span<const double> pair_params) {
  PairJacobian jac;
  jac.num_u = logits_u.size();
  jac.num_v = logits_v.size();
  jac.num_local = jac.num_u + jac.num_v + pair_params.size();
  std::vector<Dual> lu;
  std::vector<Dual> lv;
  std::vector<Dual> lp;
  std::size_t seed = 0;
  for (double x : logits_u) lu.emplace_back(x, jac.num_local, seed++);
  for (double x : logits_v) lv.emplace_back(x, jac.num_local, seed++);
  for (double x : pair_params) lp.emplace_back(x, jac.num_local, seed++);
  const auto pu = softmax_with_zero<Dual>(lu);
  const auto pv = softmax_with_zero<Dual>(lv);
  std::vector<Dual> cells(pu.size() * pv.size());
  realize_pair<Dual>(pu, pv, lp, cells);
  jac.values.assign(cells.size() * jac.num_local, 0.0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t i = 0; i < cells[c].d.size(); ++i) jac.values[c * jac.num_local + i] = cells[c].d[i];
  }
  return jac;
}

}  // namespace detail

}  // namespace moat
