#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "moat/model.hpp"

namespace moat {

inline constexpr int kModelSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "1.0.0";

// JSON document: schema version, cardinalities, edge weights in pair
// order, univariate and pairwise tables, optionally the free parameters.
// Doubles are written in shortest round-trip form, so a save/load cycle
// reproduces every value bit for bit.
std::string model_to_json(const MoatModel& model, const FreeParams* params = nullptr);

struct LoadedModel {
  MoatModel model;
  std::optional<FreeParams> params;
};
LoadedModel model_from_json(const std::string& text);

void save_model(const std::string& path, const MoatModel& model, const FreeParams* params = nullptr);
LoadedModel load_model(const std::string& path);

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string version = kArtifactVersion;

  std::string to_json() const;
  void write(const std::string& path) const;
};

}  // namespace moat
