#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "stdagcn/dag_extraction.hpp"
#include "stdagcn/data_io.hpp"
#include "stdagcn/evaluation.hpp"
#include "stdagcn/run_config.hpp"

namespace stdagcn {

// Each command writes its artifacts under `out` (created if needed), echoes
// the resolved configuration to config.json there and reports to `log`.

// manifest.csv, series/*.csv, ground_truth_edges.csv, ground_truth_A.csv, spec.json.
void cmd_gen_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out, std::ostream& log);

struct TrainOutcome {
  std::vector<Termination> reasons;  // one per trial
  Matrix adjacency;                  // trial 1, or the mean over trials
};

// One trial: checkpoint.json, trajectory.csv, A.csv. Several trials:
// checkpoint_trial_{i}.json, trajectory_trial_{i}.csv, A_trial_{i}.csv and
// A_mean.csv. With `fixed_correlation` the graph is the mean Pearson
// correlation matrix and stays frozen.
TrainOutcome cmd_train(const RunConfig& cfg, const std::filesystem::path& manifest,
                       const std::filesystem::path& out, bool fixed_correlation, std::size_t jobs,
                       std::ostream& log);

// Reads an adjacency CSV or a checkpoint; writes edges.csv, A_dag.csv, residual.csv.
ExtractedDag cmd_extract(const RunConfig& cfg, const std::filesystem::path& input,
                         const std::filesystem::path& out, std::ostream& log);

// With `checkpoint`, votes on every subject of the manifest; otherwise runs
// repeated stratified cross-validation. Writes metrics.json.
MetricsReport cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& manifest,
                           const std::optional<std::filesystem::path>& checkpoint,
                           const std::filesystem::path& out, std::size_t jobs, std::ostream& log);

// node_differences.csv and edge_differences.csv, top cfg.top_k rows each.
GroupDifference cmd_compare_groups(const RunConfig& cfg, const std::filesystem::path& group1,
                                   const std::filesystem::path& group2,
                                   const std::filesystem::path& out, std::ostream& log);

void write_trajectory(const std::filesystem::path& path, const std::vector<TrajectoryRow>& rows);

}  // namespace stdagcn
