#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "stdagcn/model.hpp"

namespace stdagcn {

struct Checkpoint {
  BrainGraph graph{1};
  ModelParams params;
  std::vector<std::string> roi_names;
  std::string termination;
  std::string config_json;  // resolved run configuration, as written
};

// JSON document with the model shape, alpha, A as nested rows, every named
// parameter with its shape, and batch-norm running statistics. Doubles are
// written in shortest round-trip form, so load(save(x)) is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace stdagcn
