#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "moat/data.hpp"
#include "moat/model.hpp"

namespace moat {

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  std::size_t batch_size = 1024;
  double learning_rate = 0.05;
  int epochs = 50;
  std::uint64_t seed = 0;
  double smoothing = 1.0;
  Optimizer optimizer = Optimizer::kSgd;

  // Batch 1024 / lr 0.05 below 500 variables, batch 64 / lr 0.01 above.
  static TrainConfig defaults_for(int num_vars);
  // key=value lines; '#' starts a comment. Unknown keys are errors.
  static TrainConfig parse(std::string_view text);
  static TrainConfig parse(std::string_view text, TrainConfig base);
  static TrainConfig load(const std::string& path);
  static TrainConfig load(const std::string& path, TrainConfig base);
  void validate() const;
  std::string to_string() const;
};

struct EpochRecord {
  int epoch;
  double train_ll;
  double valid_ll;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;  // epoch 0 is the initial model
  int chosen_epoch = 0;

  void write_csv(std::ostream& out) const;
};

struct TrainResult {
  MoatModel model;
  FreeParams params;
  TrainHistory history;
};

MarginalTable empirical_marginals(const DataMatrix& data, const VarDomain& domain, double smoothing);
// Mutual information in nats of every pair under a marginal table.
std::vector<double> mutual_information(const MarginalTable& table);

inline constexpr double kMutualInformationFloor = 1e-3;
// Smoothed empirical marginals inverted to free parameters; edge logits
// log(MI + 1e-3).
FreeParams initialize(const DataMatrix& data, const VarDomain& domain, double smoothing);
// Independent N(0, 1) entries.
FreeParams random_params(const VarDomain& domain, std::uint64_t seed);

TrainResult train(const DataMatrix& train_data, const DataMatrix& valid_data, const VarDomain& domain,
                  const TrainConfig& config);
TrainResult train_from(const DataMatrix& train_data, const DataMatrix& valid_data, const FreeParams& init,
                       const TrainConfig& config);

struct AblationResult {
  std::vector<TrainHistory> deterministic;
  std::vector<TrainHistory> random;
  std::vector<std::uint64_t> seeds;

  void write_csv(std::ostream& out) const;
};
// Run r uses shuffle seed derive_seed(config.seed, r) for both inits; the
// random init is drawn from derive_seed(that seed, 0x5eed).
AblationResult ablation_compare(const DataMatrix& train_data, const DataMatrix& valid_data, const VarDomain& domain,
                                const TrainConfig& config, int runs);

}  // namespace moat
