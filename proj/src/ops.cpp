#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>

#include "stdagcn/error.hpp"
#include "stdagcn/tensor.hpp"

namespace stdagcn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using NodePtr = std::shared_ptr<detail::TensorNode>;

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

Tensor make_output(Shape shape, std::vector<double> values,
                   std::initializer_list<const Tensor*> inputs) {
  return Tensor(std::move(shape), std::move(values), any_requires_grad(inputs));
}

// Records `fn` on the active tape when the output participates in autodiff.
template <class Fn>
void record(std::string_view op, const Tensor& out, Fn&& fn) {
  Tape* tape = Tape::active();
  if (tape == nullptr || !out.requires_grad()) return;
  tape->record(op, out.node(), std::forward<Fn>(fn));
}

// Gradient buffer of an input, or nullptr when it does not need one.
double* grad_of(const NodePtr& node) {
  if (!node->requires_grad) return nullptr;
  node->ensure_grad();
  return node->grad.data();
}

ConstMapMat as_matrix(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return ConstMapMat(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MapMat as_matrix(double* p, std::size_t rows, std::size_t cols) {
  return MapMat(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul expects 2-D operands, got " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  const auto p = a.dim(0), q = a.dim(1), r = b.dim(1);
  if (b.dim(0) != q) {
    throw ShapeError("matmul inner dimensions differ: " + shape_string(a.shape()) + " * " +
                     shape_string(b.shape()));
  }
  std::vector<double> out(p * r);
  as_matrix(out.data(), p, r).noalias() =
      as_matrix(a.node()->value, p, q) * as_matrix(b.node()->value, q, r);
  Tensor y = make_output({p, r}, std::move(out), {&a, &b});
  record("matmul", y, [an = a.node(), bn = b.node(), yn = y.node(), p, q, r] {
    auto dy = as_matrix(yn->grad, p, r);
    if (double* ga = grad_of(an)) {
      as_matrix(ga, p, q).noalias() += dy * as_matrix(bn->value, q, r).transpose();
    }
    if (double* gb = grad_of(bn)) {
      as_matrix(gb, q, r).noalias() += as_matrix(an->value, p, q).transpose() * dy;
    }
  });
  return y;
}

Tensor linear(const Tensor& x, const Tensor& w) {
  if (w.rank() != 2 || x.rank() < 1 || x.shape().back() != w.dim(0)) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + " does not match weight " +
                     shape_string(w.shape()));
  }
  const std::size_t q = w.dim(0), r = w.dim(1);
  const std::size_t p = x.size() / q;
  std::vector<double> out(p * r);
  as_matrix(out.data(), p, r).noalias() = as_matrix(x.node()->value, p, q) * as_matrix(w.node()->value, q, r);
  Shape shape = x.shape();
  shape.back() = r;
  Tensor y = make_output(std::move(shape), std::move(out), {&x, &w});
  record("linear", y, [xn = x.node(), wn = w.node(), yn = y.node(), p, q, r] {
    auto dy = as_matrix(yn->grad, p, r);
    if (double* gx = grad_of(xn)) {
      as_matrix(gx, p, q).noalias() += dy * as_matrix(wn->value, q, r).transpose();
    }
    if (double* gw = grad_of(wn)) {
      as_matrix(gw, q, r).noalias() += as_matrix(xn->value, p, q).transpose() * dy;
    }
  });
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw ShapeError("cannot reshape " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  Tensor y = make_output(std::move(shape), x.node()->value, {&x});
  record("reshape", y, [xn = x.node(), yn = y.node()] {
    if (double* gx = grad_of(xn)) {
      for (std::size_t i = 0; i < yn->grad.size(); ++i) gx[i] += yn->grad[i];
    }
  });
  return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add shape mismatch: " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  Tensor y = make_output(a.shape(), std::move(out), {&a, &b});
  record("add", y, [an = a.node(), bn = b.node(), yn = y.node()] {
    for (const auto& n : {an, bn}) {
      if (double* g = grad_of(n)) {
        for (std::size_t i = 0; i < yn->grad.size(); ++i) g[i] += yn->grad[i];
      }
    }
  });
  return y;
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor y = make_output({1}, {s}, {&x});
  record("sum", y, [xn = x.node(), yn = y.node()] {
    if (double* gx = grad_of(xn)) {
      for (std::size_t i = 0; i < xn->value.size(); ++i) gx[i] += yn->grad[0];
    }
  });
  return y;
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x.values()[i];
  Tensor y = make_output(x.shape(), std::move(out), {&x});
  record("scale", y, [xn = x.node(), yn = y.node(), factor] {
    if (double* gx = grad_of(xn)) {
      for (std::size_t i = 0; i < yn->grad.size(); ++i) gx[i] += factor * yn->grad[i];
    }
  });
  return y;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t c = bias.size();
  if (bias.rank() != 1 || x.shape().back() != c) {
    throw ShapeError("channel bias " + shape_string(bias.shape()) + " does not fit " +
                     shape_string(x.shape()));
  }
  const std::size_t rows = x.size() / c;
  std::vector<double> out(x.node()->value);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < c; ++k) out[r * c + k] += bias.values()[k];
  }
  Tensor y = make_output(x.shape(), std::move(out), {&x, &bias});
  record("add_channel_bias", y, [xn = x.node(), bn = bias.node(), yn = y.node(), rows, c] {
    if (double* gx = grad_of(xn)) {
      for (std::size_t i = 0; i < yn->grad.size(); ++i) gx[i] += yn->grad[i];
    }
    if (double* gb = grad_of(bn)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < c; ++k) gb[k] += yn->grad[r * c + k];
      }
    }
  });
  return y;
}

Tensor add_node_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 4 || bias.rank() != 2 || bias.dim(0) != x.dim(1) || bias.dim(1) != x.dim(3)) {
    throw ShapeError("node bias " + shape_string(bias.shape()) + " does not fit " +
                     shape_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), n = x.dim(1), t = x.dim(2), f = x.dim(3);
  std::vector<double> out(x.node()->value);
  const auto& b = bias.node()->value;
  for (std::size_t s = 0; s < batch; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      double* row = out.data() + ((s * n + i) * t) * f;
      for (std::size_t tt = 0; tt < t; ++tt) {
        for (std::size_t k = 0; k < f; ++k) row[tt * f + k] += b[i * f + k];
      }
    }
  }
  Tensor y = make_output(x.shape(), std::move(out), {&x, &bias});
  record("add_node_bias", y, [xn = x.node(), bn = bias.node(), yn = y.node(), batch, n, t, f] {
    if (double* gx = grad_of(xn)) {
      for (std::size_t i = 0; i < yn->grad.size(); ++i) gx[i] += yn->grad[i];
    }
    if (double* gb = grad_of(bn)) {
      for (std::size_t s = 0; s < batch; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
          const double* row = yn->grad.data() + ((s * n + i) * t) * f;
          for (std::size_t tt = 0; tt < t; ++tt) {
            for (std::size_t k = 0; k < f; ++k) gb[i * f + k] += row[tt * f + k];
          }
        }
      }
    }
  });
  return y;
}

Tensor graph_propagate(const Tensor& adjacency, const Tensor& x) {
  if (adjacency.rank() != 2 || adjacency.dim(0) != adjacency.dim(1)) {
    throw ShapeError("adjacency must be square, got " + shape_string(adjacency.shape()));
  }
  const std::size_t n = adjacency.dim(0);
  if (x.rank() < 2 || x.dim(1) != n) {
    throw ShapeError("graph of " + std::to_string(n) + " nodes does not match input " +
                     shape_string(x.shape()));
  }
  const std::size_t batch = x.dim(0);
  const std::size_t width = x.size() / (batch * n);
  std::vector<double> out(x.size());
  auto adj = as_matrix(adjacency.node()->value, n, n);
  for (std::size_t s = 0; s < batch; ++s) {
    const std::size_t off = s * n * width;
    as_matrix(out.data() + off, n, width).noalias() =
        adj.transpose() * ConstMapMat(x.node()->value.data() + off, n, width);
  }
  Tensor y = make_output(x.shape(), std::move(out), {&adjacency, &x});
  record("graph_propagate", y, [an = adjacency.node(), xn = x.node(), yn = y.node(), batch, n, width] {
    double* ga = grad_of(an);
    double* gx = grad_of(xn);
    auto adj = as_matrix(an->value, n, n);
    for (std::size_t s = 0; s < batch; ++s) {
      const std::size_t off = s * n * width;
      ConstMapMat dy(yn->grad.data() + off, n, width);
      if (gx != nullptr) as_matrix(gx + off, n, width).noalias() += adj * dy;
      if (ga != nullptr) {
        as_matrix(ga, n, n).noalias() +=
            ConstMapMat(xn->value.data() + off, n, width) * dy.transpose();
      }
    }
  });
  return y;
}

Tensor conv1d(const Tensor& x, const Tensor& kernel) {
  if (kernel.rank() != 3) {
    throw ShapeError("conv1d kernel must be [k x Cin x Cout], got " + shape_string(kernel.shape()));
  }
  const std::size_t k = kernel.dim(0), cin = kernel.dim(1), cout = kernel.dim(2);
  if (k % 2 == 0) throw ConfigError("conv1d kernel size must be odd, got " + std::to_string(k));
  if (x.rank() < 2 || x.shape().back() != cin) {
    throw ShapeError("conv1d input " + shape_string(x.shape()) + " does not match kernel " +
                     shape_string(kernel.shape()));
  }
  // Every leading axis indexes an independent sequence.
  const std::size_t t = x.dim(x.rank() - 2);
  const std::size_t segments = x.size() / (t * cin);
  const std::size_t pad = (k - 1) / 2;
  const std::size_t seg_rows = t + 2 * pad;
  const std::size_t rows = segments * seg_rows;
  const std::size_t span_rows = rows - 2 * pad;

  // Zero-padded copy: every segment is framed by `pad` zero rows, so one
  // GEMM per kernel tap covers all segments at once.
  auto padded = [=](const std::vector<double>& src) {
    std::vector<double> buf(rows * cin, 0.0);
    for (std::size_t s = 0; s < segments; ++s) {
      std::copy_n(src.data() + s * t * cin, t * cin, buf.data() + (s * seg_rows + pad) * cin);
    }
    return buf;
  };

  std::vector<double> xpad = padded(x.node()->value);
  std::vector<double> out_pad(rows * cout, 0.0);
  auto out_map = as_matrix(out_pad.data(), rows, cout);
  auto xpad_map = as_matrix(xpad, rows, cin);
  for (std::size_t tap = 0; tap < k; ++tap) {
    auto w = as_matrix(kernel.node()->value.data() + tap * cin * cout, cin, cout);
    out_map.middleRows(pad, span_rows).noalias() += xpad_map.middleRows(tap, span_rows) * w;
  }
  std::vector<double> out(segments * t * cout);
  for (std::size_t s = 0; s < segments; ++s) {
    std::copy_n(out_pad.data() + (s * seg_rows + pad) * cout, t * cout, out.data() + s * t * cout);
  }
  Shape out_shape = x.shape();
  out_shape.back() = cout;
  Tensor y = make_output(std::move(out_shape), std::move(out), {&x, &kernel});
  record("conv1d", y,
         [xn = x.node(), kn = kernel.node(), yn = y.node(), padded, segments, t, k, cin, cout, pad,
          seg_rows, rows, span_rows] {
           double* gx = grad_of(xn);
           double* gk = grad_of(kn);
           std::vector<double> dpad(rows * cout, 0.0);
           for (std::size_t s = 0; s < segments; ++s) {
             std::copy_n(yn->grad.data() + s * t * cout, t * cout,
                         dpad.data() + (s * seg_rows + pad) * cout);
           }
           auto dpad_map = as_matrix(dpad, rows, cout);
           auto dy = dpad_map.middleRows(pad, span_rows);
           std::vector<double> xpad;
           if (gk != nullptr) xpad = padded(xn->value);
           std::vector<double> dxpad(gx != nullptr ? rows * cin : 0, 0.0);
           for (std::size_t tap = 0; tap < k; ++tap) {
             if (gk != nullptr) {
               auto xpad_map = as_matrix(xpad, rows, cin);
               as_matrix(gk + tap * cin * cout, cin, cout).noalias() +=
                   xpad_map.middleRows(tap, span_rows).transpose() * dy;
             }
             if (gx != nullptr) {
               auto w = as_matrix(kn->value.data() + tap * cin * cout, cin, cout);
               as_matrix(dxpad.data(), rows, cin).middleRows(tap, span_rows).noalias() +=
                   dy * w.transpose();
             }
           }
           if (gx != nullptr) {
             for (std::size_t s = 0; s < segments; ++s) {
               const double* src = dxpad.data() + (s * seg_rows + pad) * cin;
               double* dst = gx + s * t * cin;
               for (std::size_t i = 0; i < t * cin; ++i) dst[i] += src[i];
             }
           }
         });
  return y;
}

Tensor batch_norm(const Tensor& x, BatchNormState& state, const Tensor& gamma, const Tensor& beta,
                  Mode mode) {
  const std::size_t c = x.shape().back();
  if (gamma.size() != c || beta.size() != c || state.running_mean.size() != c ||
      state.running_var.size() != c) {
    throw ShapeError("batch_norm parameters do not match " + std::to_string(c) + " channels");
  }
  const std::size_t rows = x.size() / c;
  const auto& xv = x.node()->value;
  std::vector<double> mean(c, 0.0), inv_std(c, 0.0);
  if (mode == Mode::kTrain) {
    std::vector<double> var(c, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < c; ++k) mean[k] += xv[r * c + k];
    }
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < c; ++k) {
        const double d = xv[r * c + k] - mean[k];
        var[k] += d * d;
      }
    }
    for (std::size_t k = 0; k < c; ++k) {
      var[k] /= static_cast<double>(rows);
      inv_std[k] = 1.0 / std::sqrt(var[k] + state.epsilon);
      const double unbiased =
          rows > 1 ? var[k] * static_cast<double>(rows) / static_cast<double>(rows - 1) : var[k];
      state.running_mean[k] =
          (1.0 - state.momentum) * state.running_mean[k] + state.momentum * mean[k];
      state.running_var[k] = (1.0 - state.momentum) * state.running_var[k] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t k = 0; k < c; ++k) {
      mean[k] = state.running_mean[k];
      inv_std[k] = 1.0 / std::sqrt(state.running_var[k] + state.epsilon);
    }
  }
  std::vector<double> xhat(x.size()), out(x.size());
  const auto& g = gamma.node()->value;
  const auto& b = beta.node()->value;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t i = r * c + k;
      xhat[i] = (xv[i] - mean[k]) * inv_std[k];
      out[i] = g[k] * xhat[i] + b[k];
    }
  }
  Tensor y = make_output(x.shape(), std::move(out), {&x, &gamma, &beta});
  record("batch_norm", y,
         [xn = x.node(), gn = gamma.node(), bn = beta.node(), yn = y.node(), xhat = std::move(xhat),
          inv_std = std::move(inv_std), rows, c, train = mode == Mode::kTrain] {
           const auto& dy = yn->grad;
           std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
           for (std::size_t r = 0; r < rows; ++r) {
             for (std::size_t k = 0; k < c; ++k) {
               sum_dy[k] += dy[r * c + k];
               sum_dy_xhat[k] += dy[r * c + k] * xhat[r * c + k];
             }
           }
           if (double* gg = grad_of(gn)) {
             for (std::size_t k = 0; k < c; ++k) gg[k] += sum_dy_xhat[k];
           }
           if (double* gb = grad_of(bn)) {
             for (std::size_t k = 0; k < c; ++k) gb[k] += sum_dy[k];
           }
           if (double* gx = grad_of(xn)) {
             const auto& g = gn->value;
             const double inv_rows = 1.0 / static_cast<double>(rows);
             for (std::size_t r = 0; r < rows; ++r) {
               for (std::size_t k = 0; k < c; ++k) {
                 const std::size_t i = r * c + k;
                 double d = dy[i];
                 if (train) d -= inv_rows * (sum_dy[k] + xhat[i] * sum_dy_xhat[k]);
                 gx[i] += g[k] * inv_std[k] * d;
               }
             }
           }
         });
  return y;
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.values()[i]);
  Tensor y = make_output(x.shape(), std::move(out), {&x});
  record("relu", y, [xn = x.node(), yn = y.node()] {
    if (double* gx = grad_of(xn)) {
      for (std::size_t i = 0; i < yn->grad.size(); ++i) {
        if (xn->value[i] > 0.0) gx[i] += yn->grad[i];
      }
    }
  });
  return y;
}

Tensor dropout(const Tensor& x, double rate, Mode mode, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::kEval || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  std::vector<double> out(x.size());
  const auto xv = x.values();
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    // two 32-bit uniforms in [0, 1) per engine draw
    if (i % 2 == 0) bits = rng();
    const double u = static_cast<double>(static_cast<std::uint32_t>(bits >> (32 * (i % 2)))) * 0x1.0p-32;
    mask[i] = u < rate ? 0.0 : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  Tensor y = make_output(x.shape(), std::move(out), {&x});
  record("dropout", y, [xn = x.node(), yn = y.node(), mask = std::move(mask)] {
    if (double* gx = grad_of(xn)) {
      for (std::size_t i = 0; i < yn->grad.size(); ++i) gx[i] += mask[i] * yn->grad[i];
    }
  });
  return y;
}

Tensor global_mean_pool(const Tensor& x) {
  std::size_t batch = 1;
  Shape out_shape;
  if (x.rank() == 3) {
    out_shape = {x.dim(2)};
  } else if (x.rank() == 4) {
    batch = x.dim(0);
    out_shape = {batch, x.dim(3)};
  } else {
    throw ShapeError("global_mean_pool expects [N x T x F] or [B x N x T x F], got " +
                     shape_string(x.shape()));
  }
  const std::size_t f = x.shape().back();
  const std::size_t cells = x.size() / (batch * f);
  std::vector<double> out(batch * f, 0.0);
  const auto& xv = x.node()->value;
  for (std::size_t s = 0; s < batch; ++s) {
    for (std::size_t r = 0; r < cells; ++r) {
      for (std::size_t k = 0; k < f; ++k) out[s * f + k] += xv[(s * cells + r) * f + k];
    }
  }
  const double inv = 1.0 / static_cast<double>(cells);
  for (auto& v : out) v *= inv;
  Tensor y = make_output(std::move(out_shape), std::move(out), {&x});
  record("global_mean_pool", y, [xn = x.node(), yn = y.node(), batch, cells, f, inv] {
    if (double* gx = grad_of(xn)) {
      for (std::size_t s = 0; s < batch; ++s) {
        for (std::size_t r = 0; r < cells; ++r) {
          for (std::size_t k = 0; k < f; ++k) gx[(s * cells + r) * f + k] += inv * yn->grad[s * f + k];
        }
      }
    }
  });
  return y;
}

Tensor bce_with_sigmoid(const Tensor& logits, std::span<const int> labels) {
  if (logits.size() != labels.size()) {
    throw ShapeError("bce_with_sigmoid: " + std::to_string(logits.size()) + " logits vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t b = labels.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("labels must be 0 or 1");
    const double z = logits.values()[i];
    // max(z, 0) - z*y + log(1 + exp(-|z|))
    loss += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= static_cast<double>(b);
  Tensor y = make_output({1}, {loss}, {&logits});
  std::vector<int> lab(labels.begin(), labels.end());
  record("bce_with_sigmoid", y, [zn = logits.node(), yn = y.node(), lab = std::move(lab)] {
    if (double* gz = grad_of(zn)) {
      const double scale = yn->grad[0] / static_cast<double>(lab.size());
      for (std::size_t i = 0; i < lab.size(); ++i) {
        gz[i] += scale * (sigmoid(zn->value[i]) - lab[i]);
      }
    }
  });
  return y;
}

}  // namespace stdagcn
