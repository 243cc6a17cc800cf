#include "stdagcn/dag_learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stdagcn/error.hpp"
#include "stdagcn/rng.hpp"

namespace stdagcn {
namespace {

void check_square_finite(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw ShapeError("adjacency must be a non-empty square matrix");
  }
  if (!a.allFinite()) throw DataError("adjacency contains non-finite entries");
}

// (I + B)^k - I, accumulated without forming I so that no cancellation
// against the identity occurs: P_{k+1} = P_k + B P_k + B.
Matrix power_minus_identity(const Matrix& b, std::size_t k) {
  if (k == 0) return Matrix::Zero(b.rows(), b.cols());
  Matrix p = b;
  for (std::size_t i = 1; i < k; ++i) {
    Matrix next = b * p;
    p += next + b;
  }
  return p;
}

}  // namespace

double acyclicity(const Matrix& adjacency) {
  check_square_finite(adjacency);
  const auto n = static_cast<std::size_t>(adjacency.rows());
  const double alpha = 1.0 / static_cast<double>(n);
  const Matrix b = alpha * adjacency.cwiseProduct(adjacency);
  return power_minus_identity(b, n).trace();
}

double acyclicity(const BrainGraph& graph) { return acyclicity(graph.matrix()); }

Matrix acyclicity_grad(const Matrix& adjacency) {
  check_square_finite(adjacency);
  const auto n = static_cast<std::size_t>(adjacency.rows());
  const double alpha = 1.0 / static_cast<double>(n);
  const Matrix b = alpha * adjacency.cwiseProduct(adjacency);
  Matrix m = power_minus_identity(b, n - 1);
  m.diagonal().array() += 1.0;
  // d/dA tr(M^N) = N (M^{N-1})^T * dM/dA, with dM/dA = 2 alpha A elementwise.
  return (2.0 * alpha * static_cast<double>(n)) * m.transpose().cwiseProduct(adjacency);
}

Matrix acyclicity_grad(const BrainGraph& graph) { return acyclicity_grad(graph.matrix()); }

double l1_norm(const Matrix& adjacency) { return adjacency.cwiseAbs().sum(); }

void ScoreConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
}

void outer_step(double h_k, AugLagState& state) {
  if (!(h_k >= 0.0)) throw ContractError("constraint value must be non-negative");
  state.eta += state.c * h_k;
  if (std::abs(h_k) > state.gamma * std::abs(state.h_prev)) state.c *= state.beta;
  state.h_prev = h_k;
  ++state.k;
}

void FitConfig::validate() const {
  score.validate();
  if (kernel_size % 2 == 0) throw ConfigError("temporal kernel size must be odd");
  if (hidden == 0) throw ConfigError("hidden width must be positive");
  if (window < kernel_size) throw ConfigError("sub-sequence length must be at least the kernel size");
  if (!(beta > 1.0)) throw ConfigError("penalty growth beta must exceed 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("progress ratio gamma must lie in (0, 1)");
  if (!(c_init > 0.0)) throw ConfigError("initial penalty c must be positive");
  if (!(h_tol > 0.0)) throw ConfigError("h_tol must be positive");
  if (!(c_max > 0.0)) throw ConfigError("c_max must be positive");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale must be positive");
}

ModelConfig FitConfig::model_config(std::size_t nodes) const {
  ModelConfig m;
  m.nodes = nodes;
  m.hidden = hidden;
  m.kernel_size = kernel_size;
  m.dropout = score.dropout;
  return m;
}

std::string to_string(Termination reason) {
  switch (reason) {
    case Termination::kConverged: return "converged";
    case Termination::kPenaltyExhausted: return "penalty-exhausted";
    case Termination::kIterationLimit: return "iteration-limit";
    case Termination::kFixedGraph: return "fixed-graph";
  }
  return "unknown";
}

double score_value(double cross_entropy, const Matrix& adjacency, double lambda) {
  return cross_entropy + lambda * l1_norm(adjacency);
}

double score(const Tensor& x, std::span<const int> labels, const BrainGraph& graph,
             ModelParams& params, const ScoreConfig& cfg) {
  if (labels.empty()) throw UsageError("score needs a non-empty batch");
  std::mt19937_64 unused(0);
  const Tensor logits = forward(x, graph, params, Mode::kEval, unused);
  const double ce = bce_with_sigmoid(logits, labels).item();
  return score_value(ce, graph.matrix(), cfg.lambda);
}

TrainingSession::TrainingSession(const TimeSeriesDataset& data, const FitConfig& cfg,
                                 std::uint64_t seed, bool learn_graph)
    : data_(data), cfg_(cfg), learn_graph_(learn_graph), graph_(std::max<std::size_t>(1, data.nodes())) {
  init(seed);
  if (learn_graph_) {
    auto rng = make_stream(seed, 5);
    std::uniform_real_distribution<double> dist(-cfg_.init_scale, cfg_.init_scale);
    for (auto& v : graph_.adjacency().values()) v = dist(rng);
    graph_.mask_diagonal();
    optimizer_.add_param(graph_.adjacency(), false);
  }
}

TrainingSession::TrainingSession(const TimeSeriesDataset& data, const FitConfig& cfg,
                                 std::uint64_t seed, const Matrix& fixed_graph)
    : data_(data), cfg_(cfg), learn_graph_(false), graph_(std::max<std::size_t>(1, data.nodes())) {
  init(seed);
  graph_.set_matrix(fixed_graph);
  graph_.adjacency().set_requires_grad(false);
}

void TrainingSession::init(std::uint64_t seed) {
  retain_freed_memory();
  cfg_.validate();
  data_.validate();
  const auto labels = data_.labels();
  const bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
  const bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
  if (!has0 || !has1) throw DataError("training data must contain both classes");
  if (cfg_.window > data_.length()) {
    throw ConfigError("sub-sequence length " + std::to_string(cfg_.window) +
                      " exceeds series length " + std::to_string(data_.length()));
  }
  shuffle_rng_ = make_stream(seed, 1);
  window_rng_ = make_stream(seed, 2);
  dropout_rng_ = make_stream(seed, 3);
  auto init_rng = make_stream(seed, 4);
  params_ = ModelParams::init(cfg_.model_config(data_.nodes()), init_rng);
  optimizer_ = Adam({cfg_.score.learning_rate, 0.9, 0.999, 1e-8, cfg_.score.weight_decay});
  for (auto& p : params_.named_parameters()) optimizer_.add_param(p.tensor, p.weight_matrix);
}

double TrainingSession::train_batch(std::span<const std::size_t> subjects, const AugLagState* state) {
  const std::size_t b = subjects.size();
  const std::size_t n = data_.nodes();
  const std::size_t w = cfg_.window;
  std::vector<double> buf(b * n * w);
  std::vector<int> labels(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& rec = data_.records[subjects[i]];
    const std::size_t start = sample_start(data_.length(), w, window_rng_);
    copy_window(rec, start, w, buf.data() + i * n * w);
    labels[i] = rec.label;
  }
  const Tensor x({b, n, w, 1}, std::move(buf));
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    const Tensor logits = forward(x, graph_, params_, Mode::kTrain, dropout_rng_);
    loss = bce_with_sigmoid(logits, labels);
  }
  const double value = loss.item();
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << "non-finite training loss at epoch " << epoch_;
    if (!trajectory_.empty()) {
      const auto& last = trajectory_.back();
      os << "; last finite row: epoch " << last.epoch << ", cross_entropy " << last.cross_entropy
         << ", h " << last.h.value_or(NAN) << ", eta " << last.eta.value_or(NAN) << ", c "
         << last.c.value_or(NAN);
    }
    throw DivergenceError(os.str());
  }
  optimizer_.zero_grad();
  tape.backward(loss);
  if (learn_graph_) {
    const Matrix a = graph_.matrix();
    auto grad = graph_.adjacency().grad();
    const double lambda = cfg_.score.lambda;
    Matrix penalty = Matrix::Zero(a.rows(), a.cols());
    if (state != nullptr) {
      const double h = acyclicity(a);
      penalty = (state->eta + state->c * h) * acyclicity_grad(a);
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const double v = a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        grad[j * n + i] += lambda * sign + penalty(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      }
      grad[j * n + j] = 0.0;
    }
  }
  optimizer_.step();
  graph_.mask_diagonal();
  return value;
}

void TrainingSession::run_epochs(std::size_t epochs, const AugLagState* state, std::size_t outer_k) {
  std::vector<std::size_t> order(data_.size());
  const std::size_t batch = cfg_.score.batch_size;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng_);
    double ce_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      ce_sum += train_batch(std::span<const std::size_t>(order.data() + start, len), state) *
                static_cast<double>(len);
    }
    TrajectoryRow row;
    row.epoch = ++epoch_;
    row.outer_k = outer_k;
    row.cross_entropy = ce_sum / static_cast<double>(order.size());
    const Matrix a = graph_.matrix();
    if (state != nullptr) {
      row.h = acyclicity(a);
      row.eta = state->eta;
      row.c = state->c;
    }
    row.l1_norm = l1_norm(a);
    trajectory_.push_back(row);
  }
}

void inner_solve(TrainingSession& session, const AugLagState& state, const FitConfig& cfg) {
  session.run_epochs(cfg.score.inner_epochs, &state, state.k);
}

void recalibrate_batch_norm(const TimeSeriesDataset& data, const BrainGraph& graph, ModelParams& params,
                            std::size_t window, std::size_t batch_size, std::mt19937_64& rng) {
  if (data.size() == 0) throw UsageError("batch-norm recalibration needs at least one subject");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<BatchNormState*> states;
  for (auto& layer : params.layers) {
    states.push_back(&layer.spatial_norm.state);
    states.push_back(&layer.temporal_norm.state);
  }
  std::vector<double> saved_momentum;
  for (auto* s : states) saved_momentum.push_back(s->momentum);
  const double saved_dropout = params.config.dropout;
  params.config.dropout = 0.0;

  const std::size_t n = data.nodes();
  std::mt19937_64 unused;  // dropout is off
  std::size_t batches = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t b = std::min(batch_size, data.size() - start);
    std::vector<double> buf(b * n * window);
    for (std::size_t i = 0; i < b; ++i) {
      const auto& rec = data.records[start + i];
      copy_window(rec, sample_start(data.length(), window, rng), window, buf.data() + i * n * window);
    }
    // Momentum 1/(t+1) turns the running update into a cumulative mean.
    ++batches;
    for (auto* s : states) s->momentum = 1.0 / static_cast<double>(batches);
    forward(Tensor({b, n, window, 1}, std::move(buf)), graph, params, Mode::kTrain, unused);
  }

  for (std::size_t i = 0; i < states.size(); ++i) states[i]->momentum = saved_momentum[i];
  params.config.dropout = saved_dropout;
}

FitResult fit(const TimeSeriesDataset& data, const FitConfig& cfg, std::uint64_t seed) {
  TrainingSession session(data, cfg, seed, true);
  AugLagState state;
  state.eta = cfg.eta_init;
  state.c = cfg.c_init;
  state.beta = cfg.beta;
  state.gamma = cfg.gamma;
  state.h_prev = acyclicity(session.graph());
  Termination reason = Termination::kIterationLimit;
  while (state.k < cfg.k_max) {
    inner_solve(session, state, cfg);
    const double h = acyclicity(session.graph());
    outer_step(h, state);
    if (h <= cfg.h_tol) {
      reason = Termination::kConverged;
      break;
    }
    if (state.c > cfg.c_max) {
      reason = Termination::kPenaltyExhausted;
      break;
    }
  }
  auto rng = make_stream(seed, 6);
  recalibrate_batch_norm(data, session.graph(), session.params(), cfg.window, cfg.score.batch_size, rng);
  return {session.graph(), session.params(), state, std::move(session.trajectory()), reason};
}

FitResult fit_fixed_graph(const TimeSeriesDataset& data, const Matrix& fixed_graph,
                          const FitConfig& cfg, std::uint64_t seed, std::size_t epochs) {
  TrainingSession session(data, cfg, seed, fixed_graph);
  session.run_epochs(epochs, nullptr, 0);
  auto rng = make_stream(seed, 6);
  recalibrate_batch_norm(data, session.graph(), session.params(), cfg.window, cfg.score.batch_size, rng);
  AugLagState state;
  return {session.graph(), session.params(), state, std::move(session.trajectory()),
          Termination::kFixedGraph};
}

}  // namespace stdagcn
