#pragma once

#include <span>
#include <vector>

#include "moat/data.hpp"
#include "moat/evidence.hpp"
#include "moat/model.hpp"

namespace moat {

// log Z, Z = sum over spanning trees of K_n of the product of edge weights,
// as the log-determinant of the Laplacian minor. Returns -inf when the
// positive-weight graph is disconnected.
double log_partition(int n, std::span<const double> weights);
double log_partition(const MoatModel& model);

// log Pr(x) = sum_v log P_v(x_v) + log det L*|_x - log Z.
double log_likelihood(const MoatModel& model, std::span<const int> x);
// Same with log Z supplied by the caller.
double log_likelihood(const MoatModel& model, std::span<const int> x, double log_z);

std::vector<double> log_likelihoods(const MoatModel& model, const DataMatrix& data);
double batch_mean_log_likelihood(const MoatModel& model, const DataMatrix& data);

// Likelihood-shaped function with unconstrained (possibly negative)
// marginals. Used for semiring queries and the hardness gadgets.
struct RawMoat {
  VarDomain domain;
  std::vector<double> weights;
  MarginalTable table;
};

// (1/Z) (prod_v P_v(x_v)) det L*|_x without any sign checks.
double raw_evaluate(const RawMoat& raw, std::span<const int> x);
double raw_evaluate(const RawMoat& raw, std::span<const int> x, double log_z);

inline constexpr int kMaxSemiringFree = 20;
// Sum of raw_evaluate over every completion of the evidence.
double raw_semiring_sum(const RawMoat& raw, const Evidence& evidence);

}  // namespace moat
