#pragma once

// Fixtures and independent reference computations shared by the tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "moat/detail/realize.hpp"
#include "moat/likelihood.hpp"
#include "moat/model.hpp"
#include "moat/oracle.hpp"
#include "moat/rng.hpp"

namespace testing_support {

using namespace moat;

// Three binary variables a, b, c with weights ab=2, bc=3, ac=6 and a table
// that reproduces the worked ratios P_ab(1,0) P_bc(0,1) / P_b(0) = 0.5*0.3/0.7,
// P_ab(1,0) P_ac(1,1) / P_a(1) = 0.5*0.2/0.6 and
// P_bc(0,1) P_ac(1,1) / P_c(1) = 0.3*0.2/0.5 at x = (1, 0, 1).
inline MoatModel fig1_model() {
  const VarDomain d = VarDomain::binary(3);
  MarginalTable t(d);
  const double pa1 = 0.6, pb1 = 0.3, pc1 = 0.5;
  t.univariate(0)[0] = 1 - pa1;
  t.univariate(0)[1] = pa1;
  t.univariate(1)[0] = 1 - pb1;
  t.univariate(1)[1] = pb1;
  t.univariate(2)[0] = 1 - pc1;
  t.univariate(2)[1] = pc1;
  auto set = [&](int u, int v, double p00, double p01, double p10, double p11) {
    t.set_pair(u, v, 0, 0, p00);
    t.set_pair(u, v, 0, 1, p01);
    t.set_pair(u, v, 1, 0, p10);
    t.set_pair(u, v, 1, 1, p11);
  };
  set(0, 1, 0.2, 0.2, 0.5, 0.1);
  set(1, 2, 0.4, 0.3, 0.1, 0.2);
  set(0, 2, 0.1, 0.3, 0.4, 0.2);
  std::vector<double> w(3);
  w[pair_index(3, 0, 1)] = 2;
  w[pair_index(3, 1, 2)] = 3;
  w[pair_index(3, 0, 2)] = 6;
  return MoatModel(d, w, t);
}

inline double fig1_likelihood_101() { return (6 * (0.15 / 0.7) + 12 * (0.10 / 0.6) + 18 * (0.06 / 0.5)) / 36.0; }

// Scalar that records how close every max/min switch in the realize map
// comes to flipping. Found through argument-dependent lookup inside the
// generic realize code.
struct Tracked {
  double v = 0.0;
  Tracked() = default;
  Tracked(double x) : v(x) {}  // NOLINT(google-explicit-constructor)
};
inline double& tracked_margin() {
  static thread_local double m = std::numeric_limits<double>::infinity();
  return m;
}
inline double value_of(const Tracked& x) { return x.v; }
inline Tracked operator+(Tracked a, Tracked b) { return a.v + b.v; }
inline Tracked operator-(Tracked a, Tracked b) { return a.v - b.v; }
inline Tracked operator*(Tracked a, Tracked b) { return a.v * b.v; }
inline Tracked operator/(Tracked a, Tracked b) { return a.v / b.v; }
inline Tracked operator-(Tracked a) { return -a.v; }
inline Tracked operator+(Tracked a, double b) { return a.v + b; }
inline Tracked operator+(double a, Tracked b) { return a + b.v; }
inline Tracked operator-(Tracked a, double b) { return a.v - b; }
inline Tracked operator-(double a, Tracked b) { return a - b.v; }
inline Tracked operator*(Tracked a, double b) { return a.v * b; }
inline Tracked operator*(double a, Tracked b) { return a * b.v; }
inline Tracked sigmoid(Tracked x) { return moat::detail::sigmoid(x.v); }
inline Tracked exp_of(Tracked x) { return std::exp(x.v); }
// An exact zero comes from q - min(q, q'), whose switch is already recorded
// by min_of.
inline Tracked max_zero(const Tracked& x) {
  if (x.v != 0.0) tracked_margin() = std::min(tracked_margin(), std::abs(x.v));
  return x.v > 0.0 ? x : Tracked(0.0);
}
inline const Tracked& min_of(const Tracked& a, const Tracked& b) {
  tracked_margin() = std::min(tracked_margin(), std::abs(a.v - b.v));
  return a.v <= b.v ? a : b;
}

// Smallest distance, over every pair, between the realized inputs of a
// Frechet max/min and its switching point. Central differences are only
// valid away from these kinks.
inline double kink_margin(const FreeParams& params) {
  const VarDomain& d = params.domain();
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < d.num_pairs(); ++e) {
    const auto [u, v] = d.pair_vertices(e);
    auto softmax = [&](int var) {
      std::vector<Tracked> logits;
      for (double x : params.univariate(var)) logits.emplace_back(x);
      return moat::detail::softmax_with_zero<Tracked>(logits);
    };
    const auto pu = softmax(u);
    const auto pv = softmax(v);
    std::vector<Tracked> lp;
    for (double x : params.pair(e)) lp.emplace_back(x);
    std::vector<Tracked> cells(pu.size() * pv.size());
    tracked_margin() = std::numeric_limits<double>::infinity();
    moat::detail::realize_pair<Tracked>(pu, pv, lp, cells);
    margin = std::min(margin, tracked_margin());
  }
  return margin;
}

// Random parameters kept at least `min_margin` away from every kink.
inline FreeParams smooth_random_params(const VarDomain& domain, Rng& rng, double min_margin = 1e-3,
                                       double pair_scale = 1.5) {
  for (;;) {
    FreeParams p = oracle::random_free_params(domain, rng, pair_scale);
    if (kink_margin(p) >= min_margin) return p;
  }
}

inline Assignment random_assignment(const VarDomain& d, Rng& rng) {
  Assignment x(static_cast<std::size_t>(d.size()));
  for (int v = 0; v < d.size(); ++v) x[static_cast<std::size_t>(v)] = static_cast<int>(rng.below(static_cast<std::size_t>(d.card(v))));
  return x;
}

inline VarDomain random_domain(int n, int max_k, Rng& rng) {
  std::vector<int> cards(static_cast<std::size_t>(n));
  for (int& k : cards) k = 2 + static_cast<int>(rng.below(static_cast<std::size_t>(max_k - 1)));
  return VarDomain(cards);
}

// |a - b| / max(|a|, |b|, floor).
inline double rel_err(double a, double b, double floor = 0.0) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor, std::numeric_limits<double>::min()});
}

// Chi-square upper tail via the regularized incomplete gamma function.
inline double chi_square_sf(double stat, double dof) {
  const double a = dof / 2.0;
  const double x = stat / 2.0;
  if (x <= 0.0) return 1.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) {
    double sum = 1.0 / a;
    double term = sum;
    for (int n = 1; n < 100000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (term < sum * 1e-15) break;
    }
    return 1.0 - sum * std::exp(log_prefix);
  }
  // Continued fraction (modified Lentz).
  double b = x + 1.0 - a;
  double c = 1.0 / 1e-300;
  double dd = 1.0 / b;
  double h = dd;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    dd = an * dd + b;
    if (std::abs(dd) < 1e-300) dd = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    dd = 1.0 / dd;
    const double delta = dd * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-15) break;
  }
  return std::exp(log_prefix) * h;
}

}  // namespace testing_support
