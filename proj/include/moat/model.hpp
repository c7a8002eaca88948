#pragma once

#include <span>
#include <string>
#include <vector>

#include "moat/domain.hpp"

namespace moat {

// Offsets of the three parameter groups inside one flat vector:
// edge logits (one per pair), univariate logits (k_v - 1 per variable),
// pairwise chain parameters (min(k_u, k_v) - 1 per pair).
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const VarDomain& domain);

  const VarDomain& domain() const { return domain_; }
  std::size_t size() const { return size_; }

  std::size_t edge_offset() const { return 0; }
  std::size_t num_edges() const { return domain_.num_pairs(); }
  std::size_t univariate_offset(int v) const { return uni_offsets_[static_cast<std::size_t>(v)]; }
  std::size_t univariate_count(int v) const { return static_cast<std::size_t>(domain_.card(v) - 1); }
  std::size_t pair_offset(std::size_t e) const { return pair_offsets_[e]; }
  std::size_t pair_param_count(std::size_t e) const;

  bool operator==(const ParamLayout& other) const { return domain_ == other.domain_; }

 private:
  VarDomain domain_;
  std::vector<std::size_t> uni_offsets_;
  std::vector<std::size_t> pair_offsets_;
  std::size_t size_ = 0;
};

// Flat real vector shaped by a ParamLayout. The tag keeps free parameters
// and gradients from being mixed up.
template <class Tag>
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(const VarDomain& domain) : layout_(domain), values_(layout_.size(), 0.0) {}
  explicit ParamVector(ParamLayout layout) : layout_(std::move(layout)), values_(layout_.size(), 0.0) {}

  const ParamLayout& layout() const { return layout_; }
  const VarDomain& domain() const { return layout_.domain(); }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> edge_logits() { return {values_.data(), layout_.num_edges()}; }
  std::span<const double> edge_logits() const { return {values_.data(), layout_.num_edges()}; }
  std::span<double> univariate(int v) {
    return {values_.data() + layout_.univariate_offset(v), layout_.univariate_count(v)};
  }
  std::span<const double> univariate(int v) const {
    return {values_.data() + layout_.univariate_offset(v), layout_.univariate_count(v)};
  }
  std::span<double> pair(std::size_t e) { return {values_.data() + layout_.pair_offset(e), layout_.pair_param_count(e)}; }
  std::span<const double> pair(std::size_t e) const {
    return {values_.data() + layout_.pair_offset(e), layout_.pair_param_count(e)};
  }

  bool operator==(const ParamVector& other) const = default;

 private:
  ParamLayout layout_;
  std::vector<double> values_;
};

struct FreeParamsTag {};
struct GradientTag {};
using FreeParams = ParamVector<FreeParamsTag>;
using Gradient = ParamVector<GradientTag>;

// Univariate marginals P_v and pairwise marginals P_uv. Pairwise tables are
// stored for u < v as row-major k_u x k_v matrices.
class MarginalTable {
 public:
  MarginalTable() = default;
  explicit MarginalTable(const VarDomain& domain);

  const VarDomain& domain() const { return domain_; }

  std::span<double> univariate(int v) { return univariate_[static_cast<std::size_t>(v)]; }
  std::span<const double> univariate(int v) const { return univariate_[static_cast<std::size_t>(v)]; }
  double uni(int v, int a) const { return univariate_[static_cast<std::size_t>(v)][static_cast<std::size_t>(a)]; }

  // Cells of pair e, row index = value of the lower-numbered variable.
  std::span<double> pair_cells(std::size_t e) { return pairwise_[e]; }
  std::span<const double> pair_cells(std::size_t e) const { return pairwise_[e]; }
  // P(X_u = a, X_v = b) for any u != v.
  double pair(int u, int v, int a, int b) const;
  void set_pair(int u, int v, int a, int b, double p);

  bool operator==(const MarginalTable& other) const = default;

 private:
  VarDomain domain_;
  std::vector<std::vector<double>> univariate_;
  std::vector<std::vector<double>> pairwise_;
};

// Edge weights plus marginal table: the full mixture-of-all-trees density.
struct MoatModel {
  MoatModel() = default;
  MoatModel(VarDomain domain, std::vector<double> weights, MarginalTable table);

  VarDomain domain;
  std::vector<double> weights;
  MarginalTable table;
};

struct Violation {
  enum class Kind { kNormalization, kRange, kNegative, kRowSum, kColumnSum, kNonFinite, kWeight, kDisconnected };
  Kind kind;
  int u = -1;  // variable, or first pair endpoint
  int v = -1;  // second pair endpoint, -1 for univariate violations
  double magnitude = 0.0;
  std::string describe() const;
};

inline constexpr double kInteriorClamp = 1e-6;

MoatModel realize(const FreeParams& params, const VarDomain& domain);
MarginalTable realize_table(const FreeParams& params);

// Univariate and pairwise marginals of an explicit joint over every
// assignment of `domain`, listed in lexicographic order.
MarginalTable marginals_from_distribution(std::span<const double> joint, const VarDomain& domain);

// Parameters whose realized table reproduces `table` (up to clamping into
// the interior). Edge logits are log(weights) when given, else zero.
FreeParams invert_marginals(const MarginalTable& table, const VarDomain& domain,
                            std::span<const double> weights = {});

std::vector<Violation> validate(const MarginalTable& table);
// Adds weight checks: nonnegative, finite, positive-weight graph connected.
std::vector<Violation> validate(const MoatModel& model);

bool positive_weights_connected(int n, std::span<const double> weights);

}  // namespace moat
