#pragma once

#include <span>

#include "moat/data.hpp"
#include "moat/model.hpp"

namespace moat {

// Exact gradient of log Pr(x) with respect to the free parameters that
// realize `model`. The log-determinant derivatives use
// d log det M = trace(M^{-1} dM), where each edge touches only a 2x2 block,
// then flow through the local Jacobians of the realize map.
Gradient grad_log_likelihood(const MoatModel& model, const FreeParams& params, std::span<const int> x);

struct BatchGradient {
  Gradient gradient;
  double mean_log_likelihood = 0.0;
};

// Mean over rows (all rows when `rows` is empty) of the per-row gradient.
// The Z-minor is factored once per call.
BatchGradient batch_gradient(const MoatModel& model, const FreeParams& params, const DataMatrix& data,
                             std::span<const std::size_t> rows = {});
Gradient grad_batch(const MoatModel& model, const FreeParams& params, const DataMatrix& data);

}  // namespace moat
