#include "stdagcn/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "stdagcn/error.hpp"

namespace stdagcn {

namespace {

using nlohmann::json;

json norm_state(const BatchNormState& s) {
  return {{"running_mean", s.running_mean},
          {"running_var", s.running_var},
          {"momentum", s.momentum},
          {"epsilon", s.epsilon}};
}

void read_norm_state(const json& j, BatchNormState& s, const std::string& name) {
  auto mean = j.at("running_mean").get<std::vector<double>>();
  auto var = j.at("running_var").get<std::vector<double>>();
  if (mean.size() != s.running_mean.size() || var.size() != s.running_var.size()) {
    throw DataError("checkpoint: batch-norm statistics of " + name + " have the wrong size");
  }
  s.running_mean = std::move(mean);
  s.running_var = std::move(var);
  s.momentum = j.at("momentum").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto& cfg = ck.params.config;
  json doc;
  doc["format"] = "stdagcn-checkpoint";
  doc["version"] = 1;
  doc["model"] = {{"nodes", cfg.nodes},
                  {"hidden", cfg.hidden},
                  {"kernel_size", cfg.kernel_size},
                  {"dropout", cfg.dropout},
                  {"normalize", cfg.normalize}};
  doc["alpha"] = ck.graph.alpha();
  doc["roi_names"] = ck.roi_names;
  doc["termination"] = ck.termination;
  doc["config"] = ck.config_json.empty() ? json::object() : json::parse(ck.config_json);

  const Matrix a = ck.graph.matrix();
  json rows = json::array();
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    std::vector<double> row(a.row(j).begin(), a.row(j).end());
    rows.push_back(std::move(row));
  }
  doc["adjacency"] = std::move(rows);

  json params = json::array();
  for (const auto& p : ck.params.named_parameters()) {
    const auto v = p.tensor.values();
    params.push_back({{"name", p.name},
                      {"shape", p.tensor.shape()},
                      {"values", std::vector<double>(v.begin(), v.end())}});
  }
  doc["parameters"] = std::move(params);

  json norms = json::object();
  for (std::size_t l = 0; l < ck.params.layers.size(); ++l) {
    const std::string pre = "layer" + std::to_string(l + 1) + ".";
    norms[pre + "spatial_norm"] = norm_state(ck.params.layers[l].spatial_norm.state);
    norms[pre + "temporal_norm"] = norm_state(ck.params.layers[l].temporal_norm.state);
  }
  doc["batch_norm"] = std::move(norms);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
  try {
    if (doc.value("format", "") != "stdagcn-checkpoint") {
      throw DataError("checkpoint " + path.string() + ": not a stdagcn checkpoint");
    }
    Checkpoint ck;
    const auto& m = doc.at("model");
    ModelConfig cfg;
    cfg.nodes = m.at("nodes").get<std::size_t>();
    cfg.hidden = m.at("hidden").get<std::size_t>();
    cfg.kernel_size = m.at("kernel_size").get<std::size_t>();
    cfg.dropout = m.at("dropout").get<double>();
    cfg.normalize = m.at("normalize").get<bool>();
    cfg.validate();

    const auto& rows = doc.at("adjacency");
    if (rows.size() != cfg.nodes) throw DataError("checkpoint: adjacency has the wrong number of rows");
    Matrix a(cfg.nodes, cfg.nodes);
    for (std::size_t j = 0; j < cfg.nodes; ++j) {
      auto row = rows[j].get<std::vector<double>>();
      if (row.size() != cfg.nodes) throw DataError("checkpoint: adjacency row " + std::to_string(j) + " has the wrong length");
      for (std::size_t i = 0; i < cfg.nodes; ++i) a(j, i) = row[i];
    }
    ck.graph = BrainGraph(a);

    std::mt19937_64 unused(0);
    ck.params = ModelParams::init(cfg, unused);
    const auto& stored = doc.at("parameters");
    for (auto& p : ck.params.named_parameters()) {
      auto it = std::find_if(stored.begin(), stored.end(),
                             [&](const json& e) { return e.at("name") == p.name; });
      if (it == stored.end()) throw DataError("checkpoint: parameter " + p.name + " is missing");
      if (it->at("shape").get<Shape>() != p.tensor.shape()) {
        throw DataError("checkpoint: parameter " + p.name + " has shape " +
                        shape_string(it->at("shape").get<Shape>()) + ", expected " +
                        shape_string(p.tensor.shape()));
      }
      auto values = it->at("values").get<std::vector<double>>();
      if (values.size() != p.tensor.size()) throw DataError("checkpoint: parameter " + p.name + " has the wrong size");
      auto dst = p.tensor.values();
      std::copy(values.begin(), values.end(), dst.begin());
    }
    const auto& norms = doc.at("batch_norm");
    for (std::size_t l = 0; l < ck.params.layers.size(); ++l) {
      const std::string pre = "layer" + std::to_string(l + 1) + ".";
      read_norm_state(norms.at(pre + "spatial_norm"), ck.params.layers[l].spatial_norm.state, pre + "spatial_norm");
      read_norm_state(norms.at(pre + "temporal_norm"), ck.params.layers[l].temporal_norm.state, pre + "temporal_norm");
    }
    ck.roi_names = doc.value("roi_names", std::vector<std::string>{});
    if (!ck.roi_names.empty() && ck.roi_names.size() != cfg.nodes) {
      throw DataError("checkpoint: roi_names does not match the node count");
    }
    ck.termination = doc.value("termination", "");
    ck.config_json = doc.contains("config") ? doc["config"].dump() : "{}";
    return ck;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace stdagcn
