#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stdagcn/dag_learning.hpp"
#include "stdagcn/data_io.hpp"
#include "stdagcn/matrix.hpp"
#include "stdagcn/model.hpp"

namespace stdagcn {

// Label 1 is the positive class throughout.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;

  std::size_t total() const { return tp + fn + tn + fp; }
};

// A metric whose denominator is zero is left empty rather than reported as 0.
struct ConfusionMetrics {
  ConfusionCounts counts;
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

ConfusionMetrics confusion_metrics(const ConfusionCounts& counts);
ConfusionMetrics confusion_metrics(std::span<const int> predictions, std::span<const int> labels);

// Mann-Whitney estimate; ties count one half. Empty when only one class is present.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels);

// Mean predicted probability over `voters` random windows of the record.
double vote_predict(const BrainGraph& graph, ModelParams& params, const SubjectRecord& record,
                    std::size_t voters, std::size_t window, std::mt19937_64& rng);

// fold_of[r][s] is the test fold of subject s in repeat r.
struct FoldAssignment {
  std::size_t folds = 0;
  std::vector<std::vector<std::size_t>> fold_of;

  // Training and test subject indices for one (repeat, fold).
  std::vector<std::size_t> train_indices(std::size_t repeat, std::size_t fold) const;
  std::vector<std::size_t> test_indices(std::size_t repeat, std::size_t fold) const;
};

FoldAssignment repeated_stratified_kfold(std::span<const int> labels, std::size_t folds,
                                         std::size_t repeats, std::uint64_t seed);

struct Summary {
  std::optional<double> mean;
  std::optional<double> std;  // sample standard deviation
  std::size_t count = 0;       // defined values contributing
};

Summary summarize(std::span<const std::optional<double>> values);

struct FoldResult {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  ConfusionMetrics metrics;
  std::optional<double> auc;
  std::string termination;  // empty for a holdout evaluation
  std::optional<double> final_h;
};

struct MetricsReport {
  std::vector<FoldResult> folds;
  Summary accuracy;
  Summary sensitivity;
  Summary specificity;
  Summary auc;
  ConfusionCounts pooled;
  std::uint64_t eval_seed = 0;
  std::size_t voters = 0;
  std::size_t window = 0;

  // Recomputes the summaries and pooled counts from `folds`.
  void aggregate();
};

struct EvalOptions {
  std::size_t folds = 5;
  std::size_t repeats = 5;
  std::size_t voters = 64;
  std::size_t window = 128;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const;
};

// Scores each record by voting, thresholds at 0.5 and collects metrics.
FoldResult evaluate_holdout(const BrainGraph& graph, ModelParams& params,
                            const TimeSeriesDataset& data, std::size_t voters, std::size_t window,
                            std::uint64_t seed);

// Repeated stratified k-fold: fit() on each training split, vote on the test split.
MetricsReport cross_validate(const TimeSeriesDataset& data, const FitConfig& fit_cfg,
                             const EvalOptions& opts);

// Per-fold rows plus aggregates; undefined metrics are null.
std::string to_json(const MetricsReport& report);

struct RankedEdge {
  std::size_t source;
  std::size_t target;
  double value;
};

struct GroupDifference {
  Matrix edge_diff;              // |A1 - A2|
  std::vector<double> node_diff;  // row plus column sums of edge_diff
  std::vector<std::size_t> node_ranking;  // descending node_diff, ties by index
  std::vector<RankedEdge> edge_ranking;   // nonzero edge_diff, descending

  std::vector<std::size_t> top_nodes(std::size_t k) const;
  std::vector<RankedEdge> top_edges(std::size_t k) const;
};

GroupDifference group_difference(const Matrix& group1, const Matrix& group2);

// rank,roi_index,roi_name,node_diff for the top k nodes (all when k is 0).
void write_node_differences(const std::filesystem::path& path, const GroupDifference& diff,
                            const std::vector<std::string>& names, std::size_t top_k);
// rank,source_index,source_name,target_index,target_name,edge_diff.
void write_edge_differences(const std::filesystem::path& path, const GroupDifference& diff,
                            const std::vector<std::string>& names, std::size_t top_k);

struct StructureMetrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::size_t shd = 0;
  std::size_t true_positives = 0;
  std::size_t missing = 0;
  std::size_t extra = 0;
  std::size_t reversed = 0;
};

// Compares the support of `learned` after thresholding at epsilon with the
// nonzero support of `truth`. A reversed edge adds one to the SHD.
StructureMetrics structure_metrics(const Matrix& learned, const Matrix& truth, double epsilon);

}  // namespace stdagcn
