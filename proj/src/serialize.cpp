#include "moat/serialize.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "moat/errors.hpp"

namespace moat {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace

std::string model_to_json(const MoatModel& model, const FreeParams* params) {
  const VarDomain& domain = model.domain;
  json doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["cardinalities"] = std::vector<int>(domain.cards().begin(), domain.cards().end());
  doc["edge_weights"] = model.weights;
  json uni = json::array();
  for (int v = 0; v < domain.size(); ++v) {
    const auto p = model.table.univariate(v);
    uni.push_back(std::vector<double>(p.begin(), p.end()));
  }
  doc["univariate"] = std::move(uni);
  json pairs = json::array();
  for (std::size_t e = 0; e < domain.num_pairs(); ++e) {
    const auto c = model.table.pair_cells(e);
    pairs.push_back(std::vector<double>(c.begin(), c.end()));
  }
  doc["pairwise"] = std::move(pairs);
  if (params) {
    if (!(params->domain() == domain)) throw ShapeError("parameters do not match the model domain");
    doc["free_params"] = std::vector<double>(params->values().begin(), params->values().end());
  }
  return doc.dump(1) + "\n";
}

LoadedModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    const int version = doc.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw DataError("unsupported model schema version " + std::to_string(version));
    }
    const VarDomain domain(doc.at("cardinalities").get<std::vector<int>>());
    MarginalTable table(domain);
    const auto uni = doc.at("univariate").get<std::vector<std::vector<double>>>();
    const auto pairs = doc.at("pairwise").get<std::vector<std::vector<double>>>();
    if (uni.size() != static_cast<std::size_t>(domain.size()) || pairs.size() != domain.num_pairs()) {
      throw ShapeError("marginal tables do not match the cardinalities");
    }
    for (int v = 0; v < domain.size(); ++v) {
      auto dst = table.univariate(v);
      const auto& src = uni[static_cast<std::size_t>(v)];
      if (src.size() != dst.size()) throw ShapeError("univariate table " + std::to_string(v) + " has the wrong size");
      std::copy(src.begin(), src.end(), dst.begin());
    }
    for (std::size_t e = 0; e < pairs.size(); ++e) {
      auto dst = table.pair_cells(e);
      if (pairs[e].size() != dst.size()) throw ShapeError("pairwise table " + std::to_string(e) + " has the wrong size");
      std::copy(pairs[e].begin(), pairs[e].end(), dst.begin());
    }
    LoadedModel out{MoatModel(domain, doc.at("edge_weights").get<std::vector<double>>(), std::move(table)), {}};
    if (doc.contains("free_params")) {
      const auto values = doc.at("free_params").get<std::vector<double>>();
      FreeParams params(domain);
      if (values.size() != params.size()) throw ShapeError("free parameter vector has the wrong size");
      std::copy(values.begin(), values.end(), params.values().begin());
      out.params = std::move(params);
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  } catch (const ShapeError& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::string& path, const MoatModel& model, const FreeParams* params) {
  write_file(path, model_to_json(model, params));
}

LoadedModel load_model(const std::string& path) { return model_from_json(read_file(path)); }

std::string RunManifest::to_json() const {
  json doc;
  doc["artifact_version"] = version;
  doc["command"] = command;
  doc["config"] = config;
  doc["seed"] = seed;
  doc["inputs"] = inputs;
  doc["outputs"] = outputs;
  return doc.dump(1) + "\n";
}

void RunManifest::write(const std::string& path) const { write_file(path, to_json()); }

}  // namespace moat
