#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stdagcn/commands.hpp"
#include "stdagcn/error.hpp"

namespace fs = std::filesystem;
using namespace stdagcn;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::size_t jobs = 1;
  std::vector<std::string> overrides;
};

RunConfig resolve(const Globals& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_run_config(g.config);
  for (const auto& kv : g.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_option(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

int exit_code(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UsageError*>(&e)) return 2;
  if (dynamic_cast<const IoError*>(&e)) return 4;
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal DAG convolutional network for brain effective connectivity"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON or key=value run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Overrides the configured seed");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Threads for independent trials or folds")->capture_default_str();
  app.add_option("--set", g.overrides, "Override one configuration key (key=value), repeatable");

  auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic SEM cohort with ground truth");
  std::string spec_path;
  std::vector<std::string> spec_overrides;
  gen->add_option("--spec", spec_path, "JSON or key=value synthetic spec")->check(CLI::ExistingFile);
  gen->add_option("--param", spec_overrides, "Override one spec key (key=value), repeatable");

  auto* train = app.add_subcommand("train", "Learn the graph and network on a cohort");
  std::string manifest;
  std::string fixed_graph;
  std::optional<std::size_t> trials;
  train->add_option("manifest", manifest, "Manifest CSV (subject_id,label,path)")->required();
  train->add_option("--fixed-graph", fixed_graph, "Freeze the graph; only 'correlation' is supported")
      ->check(CLI::IsMember({"correlation"}));
  train->add_option("--trials", trials, "Independent runs; A_mean.csv averages them");

  auto* extract = app.add_subcommand("extract-dag", "Threshold and break cycles of a learned graph");
  std::string input;
  std::optional<double> epsilon;
  extract->add_option("input", input, "Adjacency CSV or checkpoint JSON")->required();
  extract->add_option("--epsilon", epsilon, "Edge threshold");

  auto* evaluate = app.add_subcommand("evaluate", "Classification metrics (positive class: label 1)");
  std::string eval_manifest;
  std::string checkpoint;
  bool cv = false;
  evaluate->add_option("manifest", eval_manifest, "Manifest CSV")->required();
  evaluate->add_option("--checkpoint", checkpoint, "Score this model on every subject of the manifest");
  evaluate->add_flag("--cv", cv, "Repeated stratified k-fold cross-validation");

  auto* compare = app.add_subcommand("compare-groups", "Node and edge differences of two group graphs");
  std::string group1, group2;
  std::optional<std::size_t> top_k;
  compare->add_option("group1", group1, "Adjacency CSV or checkpoint of group 1")->required();
  compare->add_option("group2", group2, "Adjacency CSV or checkpoint of group 2")->required();
  compare->add_option("--top-k", top_k, "Rows per table (0 for all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and friends exit 0; malformed command lines are usage errors.
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const fs::path out = g.out;
    if (gen->parsed()) {
      SyntheticSpec spec = spec_path.empty() ? SyntheticSpec{} : load_synthetic_spec(spec_path);
      for (const auto& kv : spec_overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--param expects key=value, got '" + kv + "'");
        set_option(spec, kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (g.seed) spec.seed = *g.seed;
      cmd_gen_synthetic(spec, out, std::cout);
      return 0;
    }
    auto cfg = resolve(g);
    if (train->parsed()) {
      if (trials) cfg.trials = *trials;
      cmd_train(cfg, manifest, out, fixed_graph == "correlation", g.jobs, std::cout);
    } else if (extract->parsed()) {
      if (epsilon) cfg.epsilon = *epsilon;
      cmd_extract(cfg, input, out, std::cout);
    } else if (evaluate->parsed()) {
      if (checkpoint.empty() && !cv) throw UsageError("evaluate needs --checkpoint or --cv");
      if (!checkpoint.empty() && cv) throw UsageError("--checkpoint and --cv are exclusive");
      std::optional<fs::path> ck;
      if (!checkpoint.empty()) ck = checkpoint;
      cmd_evaluate(cfg, eval_manifest, ck, out, g.jobs, std::cout);
    } else if (compare->parsed()) {
      if (top_k) cfg.top_k = *top_k;
      cmd_compare_groups(cfg, group1, group2, out, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
