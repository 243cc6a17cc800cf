#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stdagcn/adam.hpp"
#include "stdagcn/data_io.hpp"
#include "stdagcn/matrix.hpp"
#include "stdagcn/model.hpp"

namespace stdagcn {

// tr[(I + alpha A.A)^N] - N with alpha = 1/N. Zero iff the support of A is acyclic.
double acyclicity(const Matrix& adjacency);
double acyclicity(const BrainGraph& graph);

// Gradient of acyclicity() with respect to A.
Matrix acyclicity_grad(const Matrix& adjacency);
Matrix acyclicity_grad(const BrainGraph& graph);

double l1_norm(const Matrix& adjacency);

struct ScoreConfig {
  double lambda = 1e-3;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t inner_epochs = 100;
  double dropout = 0.5;
  double weight_decay = 1e-3;

  void validate() const;
};

struct AugLagState {
  double eta = 0.0;
  double c = 1.0;
  double beta = 10.0;
  double gamma = 0.25;
  std::size_t k = 0;
  double h_prev = 0.0;
};

// Multiplier and penalty update after an inner solve that ended at h_k.
void outer_step(double h_k, AugLagState& state);

struct FitConfig {
  ScoreConfig score;
  std::size_t hidden = 64;
  std::size_t kernel_size = 7;
  std::size_t window = 128;  // training sub-sequence length T'
  double beta = 10.0;
  double gamma = 0.25;
  double eta_init = 0.0;
  double c_init = 1.0;
  double h_tol = 1e-8;
  double c_max = 1e16;
  std::size_t k_max = 20;
  double init_scale = 0.1;  // A starts uniform in (-init_scale, init_scale)

  void validate() const;
  ModelConfig model_config(std::size_t nodes) const;
};

struct TrajectoryRow {
  std::size_t epoch = 0;
  std::size_t outer_k = 0;
  double cross_entropy = 0.0;
  std::optional<double> h;
  std::optional<double> eta;
  std::optional<double> c;
  double l1_norm = 0.0;
};

enum class Termination { kConverged, kPenaltyExhausted, kIterationLimit, kFixedGraph };

std::string to_string(Termination reason);

struct FitResult {
  BrainGraph graph;
  ModelParams params;
  AugLagState state;
  std::vector<TrajectoryRow> trajectory;
  Termination reason = Termination::kIterationLimit;
};

// Mean cross-entropy (eval mode) plus lambda * ||A||_1.
double score(const Tensor& x, std::span<const int> labels, const BrainGraph& graph,
             ModelParams& params, const ScoreConfig& cfg);
double score_value(double cross_entropy, const Matrix& adjacency, double lambda);

// Mutable state of one training run, carried across outer iterations.
class TrainingSession {
 public:
  TrainingSession(const TimeSeriesDataset& data, const FitConfig& cfg, std::uint64_t seed,
                  bool learn_graph);
  TrainingSession(const TimeSeriesDataset& data, const FitConfig& cfg, std::uint64_t seed,
                  const Matrix& fixed_graph);

  BrainGraph& graph() { return graph_; }
  ModelParams& params() { return params_; }
  std::vector<TrajectoryRow>& trajectory() { return trajectory_; }
  bool learns_graph() const { return learn_graph_; }

  // Runs `epochs` epochs of mini-batch Adam on the augmented Lagrangian
  // with (eta, c) from `state` held fixed.
  void run_epochs(std::size_t epochs, const AugLagState* state, std::size_t outer_k);

 private:
  void init(std::uint64_t seed);
  double train_batch(std::span<const std::size_t> subjects, const AugLagState* state);

  const TimeSeriesDataset& data_;
  FitConfig cfg_;
  bool learn_graph_;
  BrainGraph graph_;
  ModelParams params_;
  Adam optimizer_;
  std::mt19937_64 shuffle_rng_;
  std::mt19937_64 window_rng_;
  std::mt19937_64 dropout_rng_;
  std::size_t epoch_ = 0;
  std::vector<TrajectoryRow> trajectory_;
};

void inner_solve(TrainingSession& session, const AugLagState& state, const FitConfig& cfg);

// Re-estimates every batch-norm running statistic as the plain average of
// batch statistics over one pass of `data` with dropout disabled, i.e. the
// conditions eval mode actually sees. Statistics collected during training
// carry the variance inflation of inverted dropout, which shifts eval-mode
// logits; fit() and fit_fixed_graph() call this before returning.
void recalibrate_batch_norm(const TimeSeriesDataset& data, const BrainGraph& graph, ModelParams& params,
                            std::size_t window, std::size_t batch_size, std::mt19937_64& rng);

FitResult fit(const TimeSeriesDataset& data, const FitConfig& cfg, std::uint64_t seed);

// Trains the network on a frozen graph: no constraint, no sparsity term.
FitResult fit_fixed_graph(const TimeSeriesDataset& data, const Matrix& fixed_graph,
                          const FitConfig& cfg, std::uint64_t seed, std::size_t epochs);

}  // namespace stdagcn
