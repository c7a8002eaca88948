#include "moat/likelihood.hpp"

#include <cmath>
#include <limits>

#include "moat/errors.hpp"
#include "moat/linalg.hpp"
#include "moat/parallel.hpp"

namespace moat {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTinyProbability = 1e-300;
constexpr std::size_t kMaxBlocks = 16;

void check_assignment(const VarDomain& domain, std::span<const int> x) {
  if (!domain.contains(x)) throw DataError("assignment " + format_assignment(x) + " lies outside the domain");
}

}  // namespace

double log_partition(int n, std::span<const double> weights) {
  if (weights.size() != pair_count(n)) throw ShapeError("weight vector does not match K_n");
  if (!positive_weights_connected(n, weights)) return kNegInf;
  const auto det = signed_log_det(laplacian_minor(n, weights));
  if (det.sign <= 0) throw NumericError("Laplacian minor of a connected weight graph is not positive");
  return det.log_abs;
}

double log_partition(const MoatModel& model) { return log_partition(model.domain.size(), model.weights); }

double log_likelihood(const MoatModel& model, std::span<const int> x) {
  return log_likelihood(model, x, log_partition(model));
}

double log_likelihood(const MoatModel& model, std::span<const int> x, double log_z) {
  const VarDomain& domain = model.domain;
  check_assignment(domain, x);
  if (!std::isfinite(log_z)) throw NumericError("partition function is zero");
  const int n = domain.size();
  const MarginalTable& table = model.table;

  double log_prod = 0.0;
  for (int v = 0; v < n; ++v) {
    const double p = table.uni(v, x[static_cast<std::size_t>(v)]);
    if (std::isnan(p)) throw NumericError("NaN univariate marginal for variable " + std::to_string(v));
    if (p < kTinyProbability) return kNegInf;
    log_prod += std::log(p);
  }

  std::vector<double> coeff(domain.num_pairs());
  for (std::size_t e = 0; e < coeff.size(); ++e) {
    const auto [u, v] = domain.pair_vertices(e);
    const int a = x[static_cast<std::size_t>(u)];
    const int b = x[static_cast<std::size_t>(v)];
    const double z = table.pair(u, v, a, b) / (table.uni(u, a) * table.uni(v, b));
    if (std::isnan(z)) throw NumericError("NaN pairwise marginal for pair (" + std::to_string(u) + "," + std::to_string(v) + ")");
    coeff[e] = model.weights[e] * z;
  }
  const auto det = signed_log_det(laplacian_minor(n, coeff));
  // The minor is a weighted Laplacian with nonnegative coefficients; a
  // nonpositive sign means it is (numerically) singular.
  if (det.sign <= 0) return kNegInf;
  return log_prod + det.log_abs - log_z;
}

std::vector<double> log_likelihoods(const MoatModel& model, const DataMatrix& data) {
  if (data.cols() != static_cast<std::size_t>(model.domain.size())) {
    throw DataError("data has " + std::to_string(data.cols()) + " columns, model has " +
                    std::to_string(model.domain.size()) + " variables");
  }
  const double log_z = log_partition(model);
  std::vector<double> out(data.rows());
  const std::size_t blocks = block_count(data.rows(), kMaxBlocks);
  parallel_for(blocks, [&](std::size_t b) {
    const auto range = block_range(data.rows(), blocks, b);
    for (std::size_t i = range.begin; i < range.end; ++i) {
      try {
        out[i] = log_likelihood(model, data.row(i), log_z);
      } catch (const DataError& err) {
        throw DataError("row " + std::to_string(i + 1) + ": " + err.what());
      }
    }
  });
  return out;
}

double batch_mean_log_likelihood(const MoatModel& model, const DataMatrix& data) {
  if (data.empty()) throw DataError("empty dataset");
  const auto values = log_likelihoods(model, data);
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double raw_evaluate(const RawMoat& raw, std::span<const int> x) {
  return raw_evaluate(raw, x, log_partition(raw.domain.size(), raw.weights));
}

double raw_evaluate(const RawMoat& raw, std::span<const int> x, double log_z) {
  const VarDomain& domain = raw.domain;
  check_assignment(domain, x);
  const int n = domain.size();
  int sign = 1;
  double log_abs = 0.0;
  for (int v = 0; v < n; ++v) {
    const double p = raw.table.uni(v, x[static_cast<std::size_t>(v)]);
    if (p == 0.0) throw NumericError("zero univariate value on variable " + std::to_string(v));
    if (p < 0.0) sign = -sign;
    log_abs += std::log(std::abs(p));
  }
  std::vector<double> coeff(domain.num_pairs());
  for (std::size_t e = 0; e < coeff.size(); ++e) {
    const auto [u, v] = domain.pair_vertices(e);
    const int a = x[static_cast<std::size_t>(u)];
    const int b = x[static_cast<std::size_t>(v)];
    coeff[e] = raw.weights[e] * raw.table.pair(u, v, a, b) / (raw.table.uni(u, a) * raw.table.uni(v, b));
  }
  const auto det = signed_log_det(laplacian_minor(n, coeff));
  if (det.sign == 0) return 0.0;
  return sign * det.sign * std::exp(log_abs + det.log_abs - log_z);
}

double raw_semiring_sum(const RawMoat& raw, const Evidence& evidence) {
  if (evidence.num_vars() != raw.domain.size()) throw ShapeError("evidence does not match domain");
  const auto free_vars = evidence.free_variables();
  if (free_vars.size() > static_cast<std::size_t>(kMaxSemiringFree)) {
    throw CapacityError("semiring sum over " + std::to_string(free_vars.size()) + " free variables exceeds cap of " +
                        std::to_string(kMaxSemiringFree));
  }
  const double log_z = log_partition(raw.domain.size(), raw.weights);
  Assignment x = evidence.seed_assignment();
  double total = 0.0;
  do {
    total += raw_evaluate(raw, x, log_z);
  } while (next_assignment(x, raw.domain, free_vars));
  return total;
}

}  // namespace moat
