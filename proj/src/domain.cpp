#include "moat/domain.hpp"

#include <limits>
#include <numeric>
#include <sstream>

#include "moat/errors.hpp"

namespace moat {

VarDomain::VarDomain(std::vector<int> cardinalities) : cards_(std::move(cardinalities)) {
  if (cards_.size() < 2) throw ShapeError("domain needs at least 2 variables");
  for (std::size_t v = 0; v < cards_.size(); ++v) {
    if (cards_[v] < 2) {
      throw ShapeError("variable " + std::to_string(v) + " has cardinality " +
                       std::to_string(cards_[v]) + " (< 2)");
    }
  }
  const int n = size();
  pairs_.reserve(pair_count(n));
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) pairs_.emplace_back(u, v);
  }
}

VarDomain VarDomain::binary(int n) { return VarDomain(std::vector<int>(static_cast<std::size_t>(n), 2)); }

bool VarDomain::all_binary() const {
  for (int k : cards_)
    if (k != 2) return false;
  return true;
}

std::size_t pair_count(int n) { return static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2; }

std::size_t pair_index(int n, int u, int v) {
  if (u > v) std::swap(u, v);
  const auto uu = static_cast<std::size_t>(u);
  const auto nn = static_cast<std::size_t>(n);
  return uu * nn - uu * (uu + 1) / 2 + static_cast<std::size_t>(v - u - 1);
}

std::size_t VarDomain::pair_index(int u, int v) const { return moat::pair_index(size(), u, v); }

bool VarDomain::contains(std::span<const int> x) const {
  if (x.size() != cards_.size()) return false;
  for (std::size_t v = 0; v < x.size(); ++v) {
    if (x[v] < 0 || x[v] >= cards_[v]) return false;
  }
  return true;
}

std::uint64_t VarDomain::num_assignments() const {
  std::uint64_t total = 1;
  for (int k : cards_) {
    const auto kk = static_cast<std::uint64_t>(k);
    if (total > std::numeric_limits<std::uint64_t>::max() / kk) return std::numeric_limits<std::uint64_t>::max();
    total *= kk;
  }
  return total;
}

bool next_assignment(Assignment& x, const VarDomain& domain, std::span<const int> free_vars) {
  for (auto it = free_vars.rbegin(); it != free_vars.rend(); ++it) {
    const auto v = static_cast<std::size_t>(*it);
    if (++x[v] < domain.card(*it)) return true;
    x[v] = 0;
  }
  return false;
}

bool next_assignment(Assignment& x, const VarDomain& domain) {
  for (int v = domain.size() - 1; v >= 0; --v) {
    if (++x[static_cast<std::size_t>(v)] < domain.card(v)) return true;
    x[static_cast<std::size_t>(v)] = 0;
  }
  return false;
}

std::string format_assignment(std::span<const int> x) {
  std::ostringstream out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) out << ',';
    out << x[i];
  }
  return out.str();
}

}  // namespace moat
