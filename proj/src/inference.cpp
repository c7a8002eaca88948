#include "moat/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "moat/errors.hpp"
#include "moat/likelihood.hpp"
#include "moat/parallel.hpp"
#include "moat/st_sampler.hpp"

namespace moat {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kSampleBlocks = 16;

void check_evidence(const MoatModel& model, const Evidence& evidence) {
  if (evidence.num_vars() != model.domain.size()) throw ShapeError("evidence and model disagree on variable count");
}

PosteriorEstimate empty_estimate(const VarDomain& domain, const Evidence& evidence) {
  PosteriorEstimate est;
  est.variables = evidence.free_variables();
  for (int v : est.variables) est.probabilities.emplace_back(static_cast<std::size_t>(domain.card(v)), 0.0);
  return est;
}

// exp(log_w - max) for every entry; throws when every weight is zero.
std::vector<double> relative_weights(std::span<const double> log_weights) {
  double top = kNegInf;
  for (double lw : log_weights) top = std::max(top, lw);
  if (!std::isfinite(top)) throw NumericError("degenerate importance weights: every weight is zero");
  std::vector<double> out(log_weights.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_weights[i] - top);
  return out;
}

void normalize_rows(PosteriorEstimate& est) {
  for (auto& p : est.probabilities) {
    double total = 0.0;
    for (double x : p) total += x;
    if (!(total > 0.0)) throw NumericError("estimate has no mass on a free variable");
    for (double& x : p) x /= total;
  }
}

// Runs fn(rng, index) for index in [0, count) over a fixed set of blocks,
// each with its own stream derived from one draw of `rng`.
template <class Fn>
void for_each_seeded(std::size_t count, Rng& rng, Fn fn) {
  const std::uint64_t base = rng.next();
  const std::size_t blocks = block_count(count, kSampleBlocks);
  parallel_for(blocks, [&](std::size_t b) {
    Rng local(derive_seed(base, b));
    const auto range = block_range(count, blocks, b);
    for (std::size_t i = range.begin; i < range.end; ++i) fn(local, i);
  });
}

}  // namespace

std::vector<WeightedSample> importance_sample(const MoatModel& model, const Evidence& evidence, std::size_t count,
                                              Rng& rng) {
  check_evidence(model, evidence);
  const int n = model.domain.size();
  const TreeSampler sampler(n, model.weights);
  std::vector<WeightedSample> out(count);
  for_each_seeded(count, rng, [&](Rng& local, std::size_t i) {
    SpanningTree tree = sampler(local);
    const double lw = tree_evidence_log_prob(tree, model.table, evidence);
    Assignment x = std::isfinite(lw) ? tree_conditional_sample(tree, model.table, evidence, local)
                                     : evidence.seed_assignment();
    out[i] = {std::move(tree), std::move(x), lw, std::exp(lw)};
  });
  return out;
}

PosteriorEstimate estimate_marginals_is(const VarDomain& domain, const Evidence& evidence,
                                        std::span<const WeightedSample> samples) {
  if (samples.empty()) throw NumericError("importance estimate needs at least one sample");
  std::vector<double> log_w(samples.size());
  for (std::size_t m = 0; m < samples.size(); ++m) log_w[m] = samples[m].log_weight;
  const auto w = relative_weights(log_w);
  PosteriorEstimate est = empty_estimate(domain, evidence);
  for (std::size_t m = 0; m < samples.size(); ++m) {
    if (w[m] == 0.0) continue;
    for (std::size_t j = 0; j < est.variables.size(); ++j) {
      const int v = est.variables[j];
      est.probabilities[j][static_cast<std::size_t>(samples[m].x[static_cast<std::size_t>(v)])] += w[m];
    }
  }
  normalize_rows(est);
  est.sample_count = samples.size();
  est.ess = effective_sample_size(w);
  return est;
}

std::vector<CollapsedTerm> collapsed_terms(const MoatModel& model, const Evidence& evidence,
                                           std::span<const SpanningTree> trees) {
  check_evidence(model, evidence);
  std::vector<CollapsedTerm> out(trees.size());
  const std::size_t blocks = block_count(trees.size(), kSampleBlocks);
  parallel_for(blocks, [&](std::size_t b) {
    const auto range = block_range(trees.size(), blocks, b);
    for (std::size_t i = range.begin; i < range.end; ++i) {
      const double lw = tree_evidence_log_prob(trees[i], model.table, evidence);
      if (!std::isfinite(lw)) {
        out[i] = {kNegInf, {}};
        continue;
      }
      auto post = tree_posterior(trees[i], model.table, evidence);
      out[i] = {post.log_evidence, std::move(post.marginals)};
    }
  });
  return out;
}

PosteriorEstimate combine_collapsed(const VarDomain& domain, const Evidence& evidence,
                                    std::span<const CollapsedTerm> terms) {
  if (terms.empty()) throw NumericError("collapsed estimate needs at least one tree");
  std::vector<double> log_w(terms.size());
  for (std::size_t m = 0; m < terms.size(); ++m) log_w[m] = terms[m].log_weight;
  const auto w = relative_weights(log_w);
  PosteriorEstimate est = empty_estimate(domain, evidence);
  for (std::size_t m = 0; m < terms.size(); ++m) {
    if (w[m] == 0.0) continue;
    const auto& probs = terms[m].marginals.probabilities;
    for (std::size_t j = 0; j < est.variables.size(); ++j)
      for (std::size_t a = 0; a < est.probabilities[j].size(); ++a) est.probabilities[j][a] += w[m] * probs[j][a];
  }
  normalize_rows(est);
  est.sample_count = terms.size();
  est.ess = effective_sample_size(w);
  return est;
}

PosteriorEstimate estimate_marginals_collapsed(const MoatModel& model, const Evidence& evidence,
                                               std::span<const SpanningTree> trees) {
  const auto terms = collapsed_terms(model, evidence, trees);
  return combine_collapsed(model.domain, evidence, terms);
}

PosteriorEstimate estimate_marginals_collapsed(const MoatModel& model, const Evidence& evidence, std::size_t count,
                                               Rng& rng) {
  check_evidence(model, evidence);
  const TreeSampler sampler(model.domain.size(), model.weights);
  std::vector<SpanningTree> trees(count);
  for_each_seeded(count, rng, [&](Rng& local, std::size_t i) { trees[i] = sampler(local); });
  return estimate_marginals_collapsed(model, evidence, trees);
}

std::vector<Assignment> gibbs_sample(const MoatModel& model, const Evidence& evidence, std::size_t count,
                                     std::size_t burn_in, Rng& rng) {
  check_evidence(model, evidence);
  const VarDomain& domain = model.domain;
  const double log_z = log_partition(model);
  const auto free_vars = evidence.free_variables();

  Assignment x = evidence.seed_assignment();
  bool found = false;
  for (int attempt = 0; attempt < kGibbsInitAttempts && !found; ++attempt) {
    for (int v : free_vars) x[static_cast<std::size_t>(v)] = static_cast<int>(rng.categorical(model.table.univariate(v)));
    found = std::isfinite(log_likelihood(model, x, log_z));
  }
  if (!found) {
    throw NumericError("no initial Gibbs state with nonzero likelihood after " + std::to_string(kGibbsInitAttempts) +
                       " attempts");
  }

  std::vector<double> log_p;
  auto sweep = [&] {
    for (int v : free_vars) {
      const auto k = static_cast<std::size_t>(domain.card(v));
      log_p.assign(k, kNegInf);
      for (std::size_t a = 0; a < k; ++a) {
        x[static_cast<std::size_t>(v)] = static_cast<int>(a);
        log_p[a] = log_likelihood(model, x, log_z);
      }
      const auto w = relative_weights(log_p);
      x[static_cast<std::size_t>(v)] = static_cast<int>(rng.categorical(w));
    }
  };
  for (std::size_t s = 0; s < burn_in; ++s) sweep();
  std::vector<Assignment> out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    sweep();
    out.push_back(x);
  }
  return out;
}

PosteriorEstimate estimate_marginals_empirical(const VarDomain& domain, const Evidence& evidence,
                                               std::span<const Assignment> samples) {
  if (samples.empty()) throw NumericError("empirical estimate needs at least one sample");
  PosteriorEstimate est = empty_estimate(domain, evidence);
  for (const Assignment& x : samples)
    for (std::size_t j = 0; j < est.variables.size(); ++j)
      est.probabilities[j][static_cast<std::size_t>(x[static_cast<std::size_t>(est.variables[j])])] += 1.0;
  normalize_rows(est);
  est.sample_count = samples.size();
  est.ess = static_cast<double>(samples.size());
  return est;
}

double kl_metric(const PosteriorEstimate& exact, const PosteriorEstimate& estimate, bool* floored) {
  if (exact.variables != estimate.variables) throw ShapeError("KL needs estimates over the same free variables");
  double kl = 0.0;
  bool any_floor = false;
  for (std::size_t j = 0; j < exact.variables.size(); ++j) {
    const auto& p = exact.probabilities[j];
    const auto& q = estimate.probabilities[j];
    if (p.size() != q.size()) throw ShapeError("KL needs matching cardinalities");
    for (std::size_t a = 0; a < p.size(); ++a) {
      if (q[a] < kKlFloor) any_floor = true;
      if (!(p[a] > 0.0)) continue;
      kl += p[a] * std::log(p[a] / std::max(q[a], kKlFloor));
    }
  }
  if (floored) *floored = any_floor;
  return kl;
}

double effective_sample_size(std::span<const double> weights) {
  if (weights.empty()) throw NumericError("effective sample size of an empty weight set");
  double s = 0.0;
  double s2 = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw NumericError("negative or NaN importance weight");
    s += w;
    s2 += w * w;
  }
  if (!(s > 0.0)) throw NumericError("effective sample size of all-zero weights");
  return s * s / s2;
}

double effective_sample_size_log(std::span<const double> log_weights) {
  return effective_sample_size(relative_weights(log_weights));
}

PosteriorEstimate exact_posterior(const MoatModel& model, const Evidence& evidence) {
  check_evidence(model, evidence);
  const VarDomain& domain = model.domain;
  const auto free_vars = evidence.free_variables();
  if (static_cast<int>(free_vars.size()) > kMaxPosteriorFree) {
    throw CapacityError("exact posterior enumerates at most " + std::to_string(kMaxPosteriorFree) +
                        " free variables");
  }
  const double log_z = log_partition(model);
  std::vector<Assignment> completions;
  std::vector<double> log_p;
  Assignment x = evidence.seed_assignment();
  do {
    completions.push_back(x);
    log_p.push_back(0.0);
  } while (next_assignment(x, domain, free_vars));

  const std::size_t blocks = block_count(completions.size(), kSampleBlocks);
  parallel_for(blocks, [&](std::size_t b) {
    const auto range = block_range(completions.size(), blocks, b);
    for (std::size_t i = range.begin; i < range.end; ++i) log_p[i] = log_likelihood(model, completions[i], log_z);
  });

  double top = kNegInf;
  for (double lp : log_p) top = std::max(top, lp);
  if (!std::isfinite(top)) throw NumericError("zero-probability evidence");
  PosteriorEstimate est = empty_estimate(domain, evidence);
  for (std::size_t i = 0; i < completions.size(); ++i) {
    const double w = std::exp(log_p[i] - top);
    for (std::size_t j = 0; j < free_vars.size(); ++j)
      est.probabilities[j][static_cast<std::size_t>(completions[i][static_cast<std::size_t>(free_vars[j])])] += w;
  }
  normalize_rows(est);
  est.sample_count = completions.size();
  return est;
}

std::optional<Method> parse_method(std::string_view name) {
  if (name == "is") return Method::kIs;
  if (name == "collapsed") return Method::kCollapsed;
  if (name == "gibbs") return Method::kGibbs;
  return std::nullopt;
}

std::string_view method_name(Method method) {
  switch (method) {
    case Method::kIs: return "is";
    case Method::kCollapsed: return "collapsed";
    case Method::kGibbs: return "gibbs";
  }
  return "?";
}

std::vector<double> kl_curve(const MoatModel& model, const Evidence& evidence, const PosteriorEstimate& exact,
                             Method method, std::span<const std::size_t> counts, std::size_t burn_in, Rng& rng) {
  if (counts.empty()) return {};
  if (!std::is_sorted(counts.begin(), counts.end()) || counts.front() == 0) {
    throw ShapeError("sample counts must be positive and ascending");
  }
  const std::size_t total = counts.back();
  std::vector<double> out;
  out.reserve(counts.size());
  switch (method) {
    case Method::kIs: {
      const auto samples = importance_sample(model, evidence, total, rng);
      for (std::size_t c : counts) {
        const std::span<const WeightedSample> prefix(samples.data(), c);
        out.push_back(kl_metric(exact, estimate_marginals_is(model.domain, evidence, prefix)));
      }
      break;
    }
    case Method::kCollapsed: {
      const TreeSampler sampler(model.domain.size(), model.weights);
      std::vector<SpanningTree> trees(total);
      for_each_seeded(total, rng, [&](Rng& local, std::size_t i) { trees[i] = sampler(local); });
      const auto terms = collapsed_terms(model, evidence, trees);
      for (std::size_t c : counts) {
        const std::span<const CollapsedTerm> prefix(terms.data(), c);
        out.push_back(kl_metric(exact, combine_collapsed(model.domain, evidence, prefix)));
      }
      break;
    }
    case Method::kGibbs: {
      const auto chain = gibbs_sample(model, evidence, total, burn_in, rng);
      for (std::size_t c : counts) {
        const std::span<const Assignment> prefix(chain.data(), c);
        out.push_back(kl_metric(exact, estimate_marginals_empirical(model.domain, evidence, prefix)));
      }
      break;
    }
  }
  return out;
}

Evidence random_evidence(const VarDomain& domain, const DataMatrix& rows, int size, Rng& rng) {
  if (rows.empty()) throw DataError("no rows to draw evidence from");
  if (size < 0 || size > domain.size()) throw ShapeError("evidence size out of range");
  std::vector<int> vars(static_cast<std::size_t>(domain.size()));
  for (int v = 0; v < domain.size(); ++v) vars[static_cast<std::size_t>(v)] = v;
  for (std::size_t i = 0; i < static_cast<std::size_t>(size); ++i) std::swap(vars[i], vars[i + rng.below(vars.size() - i)]);
  const auto row = rows.row(rng.below(rows.rows()));
  std::vector<std::pair<int, int>> obs;
  for (int i = 0; i < size; ++i) {
    const int v = vars[static_cast<std::size_t>(i)];
    obs.emplace_back(v, row[static_cast<std::size_t>(v)]);
  }
  std::sort(obs.begin(), obs.end());
  return Evidence(domain, obs);
}

}  // namespace moat
