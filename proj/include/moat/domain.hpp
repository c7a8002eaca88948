#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace moat {

using Assignment = std::vector<int>;

// Variable cardinalities plus the row-major upper-triangular pair indexing
// shared by edge weights, pairwise tables and pair parameters.
class VarDomain {
 public:
  VarDomain() = default;
  explicit VarDomain(std::vector<int> cardinalities);

  static VarDomain binary(int n);

  int size() const { return static_cast<int>(cards_.size()); }
  int card(int v) const { return cards_[static_cast<std::size_t>(v)]; }
  std::span<const int> cards() const { return cards_; }
  bool all_binary() const;

  std::size_t num_pairs() const { return pairs_.size(); }
  // Index of the unordered pair {u, v}; u != v in either order.
  std::size_t pair_index(int u, int v) const;
  // Endpoints (u < v) of pair e.
  std::pair<int, int> pair_vertices(std::size_t e) const { return pairs_[e]; }

  bool contains(std::span<const int> x) const;
  // Product of cardinalities, saturating at UINT64_MAX.
  std::uint64_t num_assignments() const;

  bool operator==(const VarDomain& other) const { return cards_ == other.cards_; }

 private:
  std::vector<int> cards_;
  std::vector<std::pair<int, int>> pairs_;
};

std::size_t pair_count(int n);
std::size_t pair_index(int n, int u, int v);

// Advances x to the next assignment in lexicographic order (variable 0 most
// significant) among the variables in `free_vars`. Returns false after the
// last assignment, leaving x reset to zeros on those variables.
bool next_assignment(Assignment& x, const VarDomain& domain, std::span<const int> free_vars);
bool next_assignment(Assignment& x, const VarDomain& domain);

std::string format_assignment(std::span<const int> x);

}  // namespace moat
