#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "stdagcn/dag_learning.hpp"
#include "stdagcn/data_io.hpp"
#include "stdagcn/evaluation.hpp"

namespace stdagcn {

struct RunConfig {
  std::size_t window = 128;  // T'
  std::size_t voters = 64;   // S
  double lambda = 1e-3;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  double dropout = 0.5;
  double weight_decay = 1e-3;
  double beta = 10.0;
  double gamma = 0.25;
  double epsilon = 0.015;
  std::size_t inner_epochs = 100;
  double h_tol = 1e-8;
  std::size_t k_max = 20;
  double c_max = 1e16;
  double eta_init = 0.0;
  double c_init = 1.0;
  double init_scale = 0.1;
  std::size_t kernel_size = 7;
  std::size_t hidden = 64;
  std::size_t fixed_graph_epochs = 100;
  std::size_t trials = 1;
  std::size_t folds = 5;
  std::size_t repeats = 5;
  std::size_t top_k = 10;
  std::uint64_t seed = 0;

  void validate() const;
  FitConfig fit_config() const;
  EvalOptions eval_options(std::size_t jobs) const;
};

// Sets one field from its textual value. Unknown keys and malformed values
// throw ConfigError.
void set_option(RunConfig& cfg, std::string_view key, std::string_view value);
void set_option(SyntheticSpec& spec, std::string_view key, std::string_view value);

// Reads a flat JSON object or key=value lines ('#' starts a comment).
RunConfig load_run_config(const std::filesystem::path& path);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

std::string to_json(const RunConfig& cfg);
std::string to_json(const SyntheticSpec& spec);

}  // namespace stdagcn
