#pragma once

// Scalar-generic building blocks of the parameter -> marginal map. They are
// instantiated with double for realize() and with Dual for the local
// Jacobians used by the gradient code.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "moat/detail/dual.hpp"

namespace moat::detail {

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline Dual sigmoid(const Dual& x) {
  const double s = sigmoid(x.v);
  return Dual::chain(x, s, s * (1.0 - s));
}

inline double exp_of(double x) { return std::exp(x); }
inline Dual exp_of(const Dual& x) {
  const double e = std::exp(x.v);
  return Dual::chain(x, e, e);
}

template <class T>
T max_zero(const T& x) {
  return value_of(x) > 0.0 ? x : T(0.0);
}

template <class T>
const T& min_of(const T& a, const T& b) {
  return value_of(a) <= value_of(b) ? a : b;
}

// Softmax over [0, logits...]: the first value carries the fixed zero logit.
template <class T>
std::vector<T> softmax_with_zero(std::span<const T> logits) {
  double shift = 0.0;
  for (const T& l : logits) shift = std::max(shift, value_of(l));
  std::vector<T> out;
  out.reserve(logits.size() + 1);
  out.push_back(T(std::exp(-shift)));
  for (const T& l : logits) out.push_back(exp_of(l - shift));
  T total = out[0];
  for (std::size_t i = 1; i < out.size(); ++i) total = total + out[i];
  for (T& p : out) p = p / total;
  return out;
}

// Joint of two events with marginals q_u, q_v placed at fraction s of the
// Frechet interval [max(0, q_u + q_v - 1), min(q_u, q_v)]. Each cell is
// assembled from nonnegative pieces so rounding never yields negatives.
template <class T>
struct Frechet2x2 {
  T both;    // P(A_u, A_v)
  T u_only;  // P(A_u, not A_v)
  T v_only;  // P(not A_u, A_v)
  T neither;
};

template <class T>
Frechet2x2<T> frechet_2x2(const T& q_u, const T& q_v, const T& s) {
  const T g = q_u + q_v - 1.0;
  const T lo = max_zero(g);
  const T hi = min_of(q_u, q_v);
  const T width = max_zero(hi - lo);
  const T inside = s * width;
  const T outside = (1.0 - s) * width;
  return {lo + inside, max_zero(q_u - hi) + outside, max_zero(q_v - hi) + outside, max_zero(-g) + inside};
}

// Binary pair: p_uv = P(X_u=1, X_v=1) = lo + sigmoid(beta) * (hi - lo).
// Output cells row-major [P(0,0), P(0,1), P(1,0), P(1,1)].
template <class T>
void realize_binary_pair(const T& p_u, const T& p_v, const T& beta, std::span<T> out) {
  const auto f = frechet_2x2(p_u, p_v, sigmoid(beta));
  out[0] = f.neither;
  out[1] = f.v_only;
  out[2] = f.u_only;
  out[3] = f.both;
}

// Lambda-chain for k_u <= k_v, d = k_v - k_u. The base block covers rows
// {0,1} x columns {0..d+1}: its first d+1 columns are merged into one event,
// split back in proportion to P_v. Every later step l appends row l-1 and
// column l-1+d, scaling the previous block by lambda_l.
template <class T>
void realize_chain_sorted(std::span<const T> pu, std::span<const T> pv, std::span<const T> chain, std::span<T> out) {
  const std::size_t ku = pu.size();
  const std::size_t kv = pv.size();
  const std::size_t d = kv - ku;
  for (auto& c : out) c = T(0.0);
  auto at = [&](std::size_t i, std::size_t j) -> T& { return out[i * kv + j]; };

  T su = pu[0] + pu[1];
  T sv = pv[0];
  for (std::size_t j = 1; j < d + 2; ++j) sv = sv + pv[j];
  T merged = pv[0];
  for (std::size_t j = 1; j <= d; ++j) merged = merged + pv[j];

  const T q_u = pu[0] / su;
  const T q_v = merged / sv;
  const auto base = frechet_2x2(q_u, q_v, sigmoid(chain[0]));
  for (std::size_t j = 0; j <= d; ++j) {
    const T share = value_of(merged) > 0.0 ? pv[j] / merged : T(0.0);
    at(0, j) = base.both * share;
    at(1, j) = base.v_only * share;
  }
  at(0, d + 1) = base.u_only;
  at(1, d + 1) = base.neither;

  for (std::size_t l = 3; l <= ku; ++l) {
    const std::size_t r = l - 1;
    const std::size_t c = l - 1 + d;
    const T su_next = su + pu[r];
    const T sv_next = sv + pv[c];
    const auto step = frechet_2x2(T(su / su_next), T(sv / sv_next), sigmoid(chain[l - 2]));
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) at(i, j) = at(i, j) * step.both;
    for (std::size_t i = 0; i < r; ++i) at(i, c) = pu[i] / su * step.u_only;
    for (std::size_t j = 0; j < c; ++j) at(r, j) = pv[j] / sv * step.v_only;
    at(r, c) = step.neither;
    su = su_next;
    sv = sv_next;
  }
}

// Chain for arbitrary k_u, k_v; out is row-major k_u x k_v.
template <class T>
void realize_chain_pair(std::span<const T> pu, std::span<const T> pv, std::span<const T> chain, std::span<T> out) {
  if (pu.size() <= pv.size()) {
    realize_chain_sorted(pu, pv, chain, out);
    return;
  }
  std::vector<T> transposed(out.size());
  realize_chain_sorted(pv, pu, chain, std::span<T>(transposed));
  const std::size_t ku = pu.size();
  const std::size_t kv = pv.size();
  for (std::size_t i = 0; i < ku; ++i)
    for (std::size_t j = 0; j < kv; ++j) out[i * kv + j] = transposed[j * ku + i];
}

// Dispatch used by realize(): the binary formula for 2x2 pairs, the chain
// otherwise.
template <class T>
void realize_pair(std::span<const T> pu, std::span<const T> pv, std::span<const T> params, std::span<T> out) {
  if (pu.size() == 2 && pv.size() == 2) {
    realize_binary_pair(pu[1], pv[1], params[0], out);
  } else {
    realize_chain_pair(pu, pv, params, out);
  }
}

// d cell / d local parameter for pair (u, v), local order
// [univariate logits of u, univariate logits of v, pair parameters],
// stored row-major as cells x locals.
struct PairJacobian {
  std::size_t num_local = 0;
  std::size_t num_u = 0;
  std::size_t num_v = 0;
  std::vector<double> values;
  double at(std::size_t cell, std::size_t local) const { return values[cell * num_local + local]; }
};

PairJacobian pair_jacobian(std::span<const double> logits_u, std::span<const double> logits_v,
                           std::span<const double> pair_params);

}  // namespace moat::detail
