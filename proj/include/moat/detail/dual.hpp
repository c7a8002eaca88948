#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace moat::detail {

// Forward-mode dual number with a dense tangent vector. An empty tangent is
// a constant. Only the operations the realize map needs are provided.
struct Dual {
  double v = 0.0;
  std::vector<double> d;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  Dual(double value, std::size_t n, std::size_t seed) : v(value), d(n, 0.0) { d[seed] = 1.0; }

  // f(x) with f(x.v) = value and f'(x.v) = slope.
  static Dual chain(const Dual& x, double value, double slope) {
    Dual out(value);
    out.d.resize(x.d.size());
    for (std::size_t i = 0; i < x.d.size(); ++i) out.d[i] = slope * x.d[i];
    return out;
  }

  // a * ta + b * tb on tangents.
  static Dual combine(double value, const Dual& a, double ca, const Dual& b, double cb) {
    Dual out(value);
    out.d.assign(std::max(a.d.size(), b.d.size()), 0.0);
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] += ca * a.d[i];
    for (std::size_t i = 0; i < b.d.size(); ++i) out.d[i] += cb * b.d[i];
    return out;
  }
};

inline Dual operator+(const Dual& a, const Dual& b) { return Dual::combine(a.v + b.v, a, 1.0, b, 1.0); }
inline Dual operator-(const Dual& a, const Dual& b) { return Dual::combine(a.v - b.v, a, 1.0, b, -1.0); }
inline Dual operator*(const Dual& a, const Dual& b) { return Dual::combine(a.v * b.v, a, b.v, b, a.v); }
inline Dual operator/(const Dual& a, const Dual& b) {
  const double q = a.v / b.v;
  return Dual::combine(q, a, 1.0 / b.v, b, -q / b.v);
}
inline Dual operator-(const Dual& a) { return Dual::chain(a, -a.v, -1.0); }

inline Dual operator+(const Dual& a, double b) { return Dual::chain(a, a.v + b, 1.0); }
inline Dual operator+(double a, const Dual& b) { return Dual::chain(b, a + b.v, 1.0); }
inline Dual operator-(const Dual& a, double b) { return Dual::chain(a, a.v - b, 1.0); }
inline Dual operator-(double a, const Dual& b) { return Dual::chain(b, a - b.v, -1.0); }
inline Dual operator*(const Dual& a, double b) { return Dual::chain(a, a.v * b, b); }
inline Dual operator*(double a, const Dual& b) { return Dual::chain(b, a * b.v, a); }
inline Dual operator/(const Dual& a, double b) { return Dual::chain(a, a.v / b, 1.0 / b); }

}  // namespace moat::detail
