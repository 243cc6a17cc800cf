#include "stdagcn/tensor.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "stdagcn/error.hpp"

namespace stdagcn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : node_(std::make_shared<detail::TensorNode>()) {
  node_->value.assign(1, 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::TensorNode>()) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw ShapeError("axis out of range for " + shape_string(shape()));
  return node_->shape[axis];
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string(shape()));
  return node_->value[0];
}

std::span<double> Tensor::grad() {
  if (!has_grad()) throw ContractError("tensor has no gradient");
  return node_->grad;
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::clone() const {
  return Tensor(node_->shape, node_->value, node_->requires_grad);
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::string_view op, std::shared_ptr<detail::TensorNode> output,
                  std::function<void()> backward) {
  records_.push_back({op, std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss, const Visitor& visit) {
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  // clear() keeps capacity, so repeated passes reuse the buffers.
  for (auto& r : records_) r.output->grad.clear();
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (visit) visit(it->op);
    it->output->ensure_grad();
    it->backward();
  }
}

void retain_freed_memory() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);  // glibc maximum on 64-bit
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

}  // namespace stdagcn
