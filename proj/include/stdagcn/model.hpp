#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "stdagcn/matrix.hpp"
#include "stdagcn/tensor.hpp"

namespace stdagcn {

// Learnable weighted adjacency over N nodes. The diagonal is kept at zero.
class BrainGraph {
 public:
  explicit BrainGraph(std::size_t nodes);
  explicit BrainGraph(const Matrix& adjacency);

  std::size_t nodes() const { return nodes_; }
  double alpha() const { return 1.0 / static_cast<double>(nodes_); }

  Tensor& adjacency() { return adjacency_; }
  const Tensor& adjacency() const { return adjacency_; }

  Matrix matrix() const;
  void set_matrix(const Matrix& adjacency);
  void mask_diagonal();

  BrainGraph clone() const;

 private:
  std::size_t nodes_;
  Tensor adjacency_;
};

struct ModelConfig {
  std::size_t nodes = 0;
  std::size_t hidden = 64;
  std::size_t kernel_size = 7;
  double dropout = 0.5;
  // Test hook: when false, both batch-norm steps are skipped.
  bool normalize = true;

  void validate() const;
};

struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  BatchNormState state;

  static BatchNormParams create(std::size_t channels);
};

struct StDagcLayer {
  Tensor spatial_weight;   // [f x f_s]
  Tensor spatial_bias;     // [N x f_s]
  BatchNormParams spatial_norm;
  Tensor temporal_kernel;  // [k x f_s x f_t]
  BatchNormParams temporal_norm;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
  bool weight_matrix;  // subject to weight decay
};

struct ModelParams {
  ModelConfig config;
  std::array<StDagcLayer, 3> layers;
  Tensor head_weight;  // [hidden x 1]
  Tensor head_bias;    // [1]

  static ModelParams init(const ModelConfig& config, std::mt19937_64& rng);

  std::vector<NamedParameter> named_parameters() const;
  ModelParams clone() const;
};

// One DAG convolution: relu(norm(A^T (H W + B))) applied to every time slice.
// h is [B x N x T x f].
Tensor dag_conv(const Tensor& h, const BrainGraph& graph, StDagcLayer& layer, Mode mode,
                bool normalize = true);

// Per-node temporal convolution: relu(norm(conv1d(H[n]))) for every node n.
Tensor temporal_conv(const Tensor& h, StDagcLayer& layer, Mode mode, bool normalize = true);

// Full network. x is [N x T x 1] or [B x N x T x 1]; returns logits of shape [B].
Tensor forward(const Tensor& x, const BrainGraph& graph, ModelParams& params, Mode mode,
               std::mt19937_64& rng);

double predict_proba(double logit);

}  // namespace stdagcn
