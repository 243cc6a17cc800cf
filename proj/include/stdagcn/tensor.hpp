#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stdagcn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

enum class Mode { kTrain, kEval };

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

// Dense row-major array of doubles. A Tensor is a shared handle: copies
// alias the same storage, as autodiff needs stable identities for
// parameters. Use clone() for an independent copy.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t axis) const;

  std::span<double> values() { return node_->value; }
  std::span<const double> values() const { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return node_->grad.size() == node_->value.size() && size() > 0; }
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// Ordered record of executed primitives. Ops append to the tape that is
// active on the calling thread (see TapeScope); with no active tape nothing
// is recorded and forward passes run in inference mode.
class Tape {
 public:
  using Visitor = std::function<void(std::string_view op)>;

  void record(std::string_view op, std::shared_ptr<detail::TensorNode> output,
              std::function<void()> backward);

  // Replays records in reverse. Intermediate gradients are reset first, so
  // leaf gradients accumulate across calls until zeroed by the caller.
  void backward(const Tensor& loss, const Visitor& visit = {});

  void clear() { records_.clear(); }
  std::size_t size() const { return records_.size(); }

  static Tape* active();

 private:
  friend class TapeScope;
  struct Record {
    std::string_view op;
    std::shared_ptr<detail::TensorNode> output;
    std::function<void()> backward;
  };
  std::vector<Record> records_;
};

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Running statistics for batch normalization over the trailing channel axis.
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

// ---- primitives -----------------------------------------------------------

// [p x q] * [q x r]
Tensor matmul(const Tensor& a, const Tensor& b);
// x [..., q] * w [q x r] -> [..., r]
Tensor linear(const Tensor& x, const Tensor& w);
Tensor reshape(const Tensor& x, Shape shape);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& x);
Tensor scale(const Tensor& x, double factor);

// x [..., C] + bias [C]
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
// x [B, N, T, F] + bias [N, F], broadcast over batch and time.
Tensor add_node_bias(const Tensor& x, const Tensor& bias);

// out[b, i, ...] = sum_j adjacency[j, i] * x[b, j, ...]; x is [B, N, ...].
// Row j of the adjacency holds the outgoing edges of node j.
Tensor graph_propagate(const Tensor& adjacency, const Tensor& x);

// Same-padded cross-correlation along time. x is [..., T, Cin] where each
// leading index is an independent sequence; kernel is [k, Cin, Cout], k odd.
Tensor conv1d(const Tensor& x, const Tensor& kernel);

// Normalizes each channel of x [..., C] with statistics over all other axes.
Tensor batch_norm(const Tensor& x, BatchNormState& state, const Tensor& gamma,
                  const Tensor& beta, Mode mode);

Tensor relu(const Tensor& x);
Tensor dropout(const Tensor& x, double rate, Mode mode, std::mt19937_64& rng);

// [N, T, F] -> [F], or [B, N, T, F] -> [B, F].
Tensor global_mean_pool(const Tensor& x);

// Mean binary cross-entropy of sigmoid(logits) against 0/1 labels.
Tensor bce_with_sigmoid(const Tensor& logits, std::span<const int> labels);

double sigmoid(double z);

// Asks the C allocator to keep large freed blocks for reuse. Training
// allocates and frees many multi-megabyte buffers per step; returning them
// to the OS each time makes page faults dominate. No-op off glibc.
void retain_freed_memory();

}  // namespace stdagcn
