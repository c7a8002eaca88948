#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "moat/data.hpp"
#include "moat/evidence.hpp"
#include "moat/model.hpp"
#include "moat/rng.hpp"
#include "moat/tree.hpp"

namespace moat {

// One importance draw: a tree from the spanning-tree distribution, a
// completion drawn from that tree conditioned on the evidence, and the
// unnormalized weight P(e | tree).
struct WeightedSample {
  SpanningTree tree;
  Assignment x;
  double log_weight;
  double weight;
};

struct PosteriorEstimate {
  std::vector<int> variables;
  std::vector<std::vector<double>> probabilities;
  std::size_t sample_count = 0;
  double ess = 0.0;
};

std::vector<WeightedSample> importance_sample(const MoatModel& model, const Evidence& evidence, std::size_t count,
                                              Rng& rng);
// Self-normalized estimate of P(X_i | e) from indicator functions.
PosteriorEstimate estimate_marginals_is(const VarDomain& domain, const Evidence& evidence,
                                        std::span<const WeightedSample> samples);

// Per-tree exact conditionals with weight P(e | tree).
struct CollapsedTerm {
  double log_weight;
  VariableMarginals marginals;  // empty when the weight is zero
};
std::vector<CollapsedTerm> collapsed_terms(const MoatModel& model, const Evidence& evidence,
                                           std::span<const SpanningTree> trees);
PosteriorEstimate combine_collapsed(const VarDomain& domain, const Evidence& evidence,
                                    std::span<const CollapsedTerm> terms);
PosteriorEstimate estimate_marginals_collapsed(const MoatModel& model, const Evidence& evidence, std::size_t count,
                                               Rng& rng);
PosteriorEstimate estimate_marginals_collapsed(const MoatModel& model, const Evidence& evidence,
                                               std::span<const SpanningTree> trees);

// Systematic-scan Gibbs chain. Returns the state after each of `count`
// sweeps that follow `burn_in` discarded sweeps.
std::vector<Assignment> gibbs_sample(const MoatModel& model, const Evidence& evidence, std::size_t count,
                                     std::size_t burn_in, Rng& rng);
inline constexpr int kGibbsInitAttempts = 1000;
PosteriorEstimate estimate_marginals_empirical(const VarDomain& domain, const Evidence& evidence,
                                               std::span<const Assignment> samples);

inline constexpr double kKlFloor = 1e-12;
// sum_i sum_a P(a | e) log(P(a | e) / max(Q(a | e), floor)). `floored`, when
// given, reports whether any estimate cell was raised to the floor.
double kl_metric(const PosteriorEstimate& exact, const PosteriorEstimate& estimate, bool* floored = nullptr);

double effective_sample_size(std::span<const double> weights);
// ESS of exp(log_weights), computed after max-subtraction.
double effective_sample_size_log(std::span<const double> log_weights);

// Exact MoAT posterior by enumerating every completion of the evidence with
// the determinant likelihood. At most kMaxPosteriorFree free variables.
inline constexpr int kMaxPosteriorFree = 20;
PosteriorEstimate exact_posterior(const MoatModel& model, const Evidence& evidence);

enum class Method { kIs, kCollapsed, kGibbs };
std::optional<Method> parse_method(std::string_view name);
std::string_view method_name(Method method);

// KL to `exact` after each prefix length in `counts` (ascending) of a
// single run of max(counts) samples; Gibbs discards burn_in sweeps first.
std::vector<double> kl_curve(const MoatModel& model, const Evidence& evidence, const PosteriorEstimate& exact,
                             Method method, std::span<const std::size_t> counts, std::size_t burn_in, Rng& rng);

// `size` distinct variables chosen uniformly, observed at their values in a
// uniformly chosen row of `rows`.
Evidence random_evidence(const VarDomain& domain, const DataMatrix& rows, int size, Rng& rng);

}  // namespace moat
