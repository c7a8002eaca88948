#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "moat/domain.hpp"

namespace moat {

// Partial assignment: a value for some subset of the variables.
class Evidence {
 public:
  static constexpr int kFree = -1;

  Evidence() = default;
  explicit Evidence(int num_vars) : values_(static_cast<std::size_t>(num_vars), kFree) {}
  Evidence(const VarDomain& domain, std::span<const std::pair<int, int>> observations);

  static Evidence full(const VarDomain& domain, std::span<const int> x);
  // "var=value,var=value"; empty or blank text is empty evidence.
  static Evidence parse(const VarDomain& domain, std::string_view text);

  int num_vars() const { return static_cast<int>(values_.size()); }
  bool observed(int v) const { return values_[static_cast<std::size_t>(v)] != kFree; }
  int value(int v) const { return values_[static_cast<std::size_t>(v)]; }
  std::size_t num_observed() const;

  std::vector<int> free_variables() const;
  std::vector<int> observed_variables() const;
  bool consistent_with(std::span<const int> x) const;
  // Evidence values on observed variables, zero elsewhere.
  Assignment seed_assignment() const;

  std::string to_string() const;

  bool operator==(const Evidence& other) const = default;

 private:
  std::vector<int> values_;
};

}  // namespace moat
