#include "stdagcn/model.hpp"

#include <cmath>

#include "stdagcn/error.hpp"

namespace stdagcn {

BrainGraph::BrainGraph(std::size_t nodes)
    : nodes_(nodes), adjacency_(Tensor::zeros({nodes, nodes}, true)) {
  if (nodes == 0) throw ConfigError("graph needs at least one node");
}

BrainGraph::BrainGraph(const Matrix& adjacency) : BrainGraph(static_cast<std::size_t>(adjacency.rows())) {
  set_matrix(adjacency);
}

Matrix BrainGraph::matrix() const {
  const auto n = static_cast<Eigen::Index>(nodes_);
  return Eigen::Map<const Matrix>(adjacency_.values().data(), n, n);
}

void BrainGraph::set_matrix(const Matrix& adjacency) {
  if (static_cast<std::size_t>(adjacency.rows()) != nodes_ ||
      static_cast<std::size_t>(adjacency.cols()) != nodes_) {
    throw ShapeError("adjacency must be " + std::to_string(nodes_) + " x " + std::to_string(nodes_));
  }
  if (!adjacency.allFinite()) throw DataError("adjacency contains non-finite entries");
  const auto n = static_cast<Eigen::Index>(nodes_);
  Eigen::Map<Matrix>(adjacency_.values().data(), n, n) = adjacency;
  mask_diagonal();
}

void BrainGraph::mask_diagonal() {
  auto a = adjacency_.values();
  for (std::size_t i = 0; i < nodes_; ++i) a[i * nodes_ + i] = 0.0;
}

BrainGraph BrainGraph::clone() const {
  BrainGraph g(nodes_);
  std::copy(adjacency_.values().begin(), adjacency_.values().end(), g.adjacency_.values().begin());
  g.adjacency_.set_requires_grad(adjacency_.requires_grad());
  return g;
}

void ModelConfig::validate() const {
  if (nodes == 0) throw ConfigError("model needs at least one node");
  if (hidden == 0) throw ConfigError("hidden width must be positive");
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw ConfigError("temporal kernel size must be odd, got " + std::to_string(kernel_size));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(dropout));
  }
}

BatchNormParams BatchNormParams::create(std::size_t channels) {
  return {Tensor::filled({channels}, 1.0, true), Tensor::zeros({channels}, true),
          BatchNormState(channels)};
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

BatchNormParams clone_norm(const BatchNormParams& p) {
  return {p.gamma.clone(), p.beta.clone(), p.state};
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  ModelParams p;
  p.config = config;
  const std::size_t h = config.hidden, k = config.kernel_size, n = config.nodes;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::size_t f_in = l == 0 ? 1 : h;
    auto& layer = p.layers[l];
    layer.spatial_weight = uniform_tensor({f_in, h}, 1.0 / std::sqrt(double(f_in)), rng);
    layer.spatial_bias = Tensor::zeros({n, h}, true);
    layer.spatial_norm = BatchNormParams::create(h);
    layer.temporal_kernel = uniform_tensor({k, h, h}, 1.0 / std::sqrt(double(k * h)), rng);
    layer.temporal_norm = BatchNormParams::create(h);
  }
  p.head_weight = uniform_tensor({h, 1}, 1.0 / std::sqrt(double(h)), rng);
  p.head_bias = uniform_tensor({1}, 1.0 / std::sqrt(double(h)), rng);
  return p;
}

std::vector<NamedParameter> ModelParams::named_parameters() const {
  std::vector<NamedParameter> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const std::string pre = "layer" + std::to_string(l + 1) + ".";
    out.push_back({pre + "spatial_weight", layer.spatial_weight, true});
    out.push_back({pre + "spatial_bias", layer.spatial_bias, false});
    out.push_back({pre + "spatial_norm.gamma", layer.spatial_norm.gamma, false});
    out.push_back({pre + "spatial_norm.beta", layer.spatial_norm.beta, false});
    out.push_back({pre + "temporal_kernel", layer.temporal_kernel, true});
    out.push_back({pre + "temporal_norm.gamma", layer.temporal_norm.gamma, false});
    out.push_back({pre + "temporal_norm.beta", layer.temporal_norm.beta, false});
  }
  out.push_back({"head.weight", head_weight, true});
  out.push_back({"head.bias", head_bias, false});
  return out;
}

ModelParams ModelParams::clone() const {
  ModelParams p;
  p.config = config;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& src = layers[l];
    p.layers[l] = {src.spatial_weight.clone(), src.spatial_bias.clone(), clone_norm(src.spatial_norm),
                   src.temporal_kernel.clone(), clone_norm(src.temporal_norm)};
  }
  p.head_weight = head_weight.clone();
  p.head_bias = head_bias.clone();
  return p;
}

Tensor dag_conv(const Tensor& h, const BrainGraph& graph, StDagcLayer& layer, Mode mode,
                bool normalize) {
  if (h.rank() != 4) throw ShapeError("dag_conv expects [B x N x T x f], got " + shape_string(h.shape()));
  const std::size_t n = h.dim(1), f = h.dim(3);
  if (n != graph.nodes()) {
    throw ShapeError("input has " + std::to_string(n) + " nodes but graph has " +
                     std::to_string(graph.nodes()));
  }
  const auto a = graph.adjacency().values();
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i * n + i] != 0.0) throw ContractError("adjacency diagonal must be zero");
  }
  if (layer.spatial_weight.dim(0) != f) {
    throw ShapeError("layer expects " + std::to_string(layer.spatial_weight.dim(0)) +
                     " input features, got " + std::to_string(f));
  }
  Tensor z = add_node_bias(linear(h, layer.spatial_weight), layer.spatial_bias);
  z = graph_propagate(graph.adjacency(), z);
  if (normalize) {
    z = batch_norm(z, layer.spatial_norm.state, layer.spatial_norm.gamma, layer.spatial_norm.beta, mode);
  }
  return relu(z);
}

Tensor temporal_conv(const Tensor& h, StDagcLayer& layer, Mode mode, bool normalize) {
  if (h.rank() != 4) {
    throw ShapeError("temporal_conv expects [B x N x T x f], got " + shape_string(h.shape()));
  }
  Tensor z = conv1d(h, layer.temporal_kernel);
  if (normalize) {
    z = batch_norm(z, layer.temporal_norm.state, layer.temporal_norm.gamma, layer.temporal_norm.beta,
                   mode);
  }
  return relu(z);
}

Tensor forward(const Tensor& x, const BrainGraph& graph, ModelParams& params, Mode mode,
               std::mt19937_64& rng) {
  Tensor h = x;
  if (x.rank() == 3) h = reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
  if (h.rank() != 4 || h.dim(3) != 1) {
    throw ShapeError("model input must be [N x T x 1] or [B x N x T x 1], got " +
                     shape_string(x.shape()));
  }
  if (h.dim(2) < params.config.kernel_size) {
    throw ShapeError("sequence length " + std::to_string(h.dim(2)) +
                     " is shorter than the temporal kernel");
  }
  for (double v : h.values()) {
    if (!std::isfinite(v)) throw DataError("model input contains non-finite values");
  }
  const std::size_t batch = h.dim(0);
  const bool norm = params.config.normalize;
  for (auto& layer : params.layers) {
    h = dag_conv(h, graph, layer, mode, norm);
    h = temporal_conv(h, layer, mode, norm);
    h = dropout(h, params.config.dropout, mode, rng);
  }
  Tensor pooled = global_mean_pool(h);  // [B x hidden]
  Tensor logits = add_channel_bias(linear(pooled, params.head_weight), params.head_bias);
  return reshape(logits, {batch});
}

double predict_proba(double logit) { return sigmoid(logit); }

}  // namespace stdagcn
