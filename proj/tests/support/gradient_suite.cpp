#include "gradient_suite.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "stdagcn/dag_learning.hpp"
#include "stdagcn/model.hpp"

namespace oracle {

using namespace stdagcn;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_size(shape));
  for (auto& e : v) e = u(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

// Largest relative error over `inputs` for the scalar built by `build`.
// Entries whose stencil straddles a ReLU kink (one-sided differences
// disagree) have no meaningful central difference and are skipped; more
// than 1% of them counts as a failure.
double check(const std::function<Tensor()>& build, std::vector<Tensor> inputs,
             const std::vector<std::vector<bool>>& frozen = {}, double step = 1e-5) {
  for (auto& t : inputs) t.zero_grad();
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(build());
  }
  const double center = build().item();
  double worst = 0.0;
  std::size_t kinks = 0, total = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& t = inputs[k];
    std::vector<double> analytic, numeric;
    auto grad = t.grad();
    auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (k < frozen.size() && !frozen[k].empty() && frozen[k][i]) continue;
      const double saved = v[i];
      v[i] = saved + step;
      const double up = build().item();
      v[i] = saved - step;
      const double down = build().item();
      v[i] = saved;
      ++total;
      const double fwd = up - center, bwd = center - down;
      if (std::abs(fwd - bwd) > 1e-3 * std::max(std::abs(fwd), std::abs(bwd)) + 1e-13) {
        ++kinks;
        continue;
      }
      analytic.push_back(grad[i]);
      numeric.push_back((up - down) / (2 * step));
    }
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  if (kinks * 100 > total) return std::numeric_limits<double>::infinity();
  return worst;
}

}  // namespace

std::vector<GradientCase> run_gradient_suite() {
  std::vector<GradientCase> out;
  std::mt19937_64 rng(20240607);
  auto record = [&](std::string name, double err, double tol) { out.push_back({std::move(name), err, tol}); };

  {
    auto a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    record("matmul", check([&] { return weighted_sum(matmul(a, b)); }, {a, b}), 1e-6);
    record("matmul sum", check([&] { return sum(matmul(a, b)); }, {a, b}), 1e-6);
  }
  {
    auto x = random_tensor({2, 3, 4}, rng), w = random_tensor({4, 5}, rng);
    record("linear", check([&] { return weighted_sum(linear(x, w)); }, {x, w}), 1e-4);
  }
  {
    auto x = random_tensor({2, 6}, rng);
    record("reshape", check([&] { return weighted_sum(reshape(x, {3, 4})); }, {x}), 1e-4);
  }
  {
    auto a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng);
    record("add", check([&] { return weighted_sum(add(a, b)); }, {a, b}), 1e-4);
    record("scale", check([&] { return weighted_sum(scale(a, -1.7)); }, {a}), 1e-4);
  }
  {
    auto x = random_tensor({2, 3, 4}, rng), b = random_tensor({4}, rng);
    record("add_channel_bias", check([&] { return weighted_sum(add_channel_bias(x, b)); }, {x, b}), 1e-4);
  }
  {
    auto x = random_tensor({2, 3, 5, 4}, rng), b = random_tensor({3, 4}, rng);
    record("add_node_bias", check([&] { return weighted_sum(add_node_bias(x, b)); }, {x, b}), 1e-4);
  }
  {
    auto a = random_tensor({3, 3}, rng), x = random_tensor({2, 3, 4, 2}, rng);
    record("graph_propagate", check([&] { return weighted_sum(graph_propagate(a, x)); }, {a, x}), 1e-4);
  }
  {
    auto x = random_tensor({6, 2}, rng), k = random_tensor({3, 2, 3}, rng);
    record("conv1d", check([&] { return weighted_sum(conv1d(x, k)); }, {x, k}), 1e-6);
    auto x4 = random_tensor({2, 3, 8, 2}, rng), k5 = random_tensor({5, 2, 3}, rng);
    record("conv1d batched", check([&] { return weighted_sum(conv1d(x4, k5)); }, {x4, k5}), 1e-6);
  }
  {
    auto x = random_tensor({4, 3, 2}, rng), g = random_tensor({2}, rng, 0.5, 1.5), b = random_tensor({2}, rng);
    BatchNormState state(2);
    record("batch_norm train",
        check([&] { return weighted_sum(batch_norm(x, state, g, b, Mode::kTrain)); }, {x, g, b}), 1e-5);
    state.running_mean = {0.3, -0.2};
    state.running_var = {1.4, 0.6};
    record("batch_norm eval",
        check([&] { return weighted_sum(batch_norm(x, state, g, b, Mode::kEval)); }, {x, g, b}), 1e-5);
  }
  {
    auto x = random_tensor({3, 5}, rng);
    for (auto& v : x.values()) v += v > 0 ? 0.05 : -0.05;  // stay clear of the kink
    record("relu", check([&] { return weighted_sum(relu(x)); }, {x}), 1e-4);
  }
  {
    auto x = random_tensor({4, 6}, rng);
    record("dropout", check([&] {
          std::mt19937_64 local(99);
          return weighted_sum(dropout(x, 0.5, Mode::kTrain, local));
        }, {x}), 1e-4);
  }
  {
    auto x3 = random_tensor({2, 3, 4}, rng), x4 = random_tensor({2, 2, 3, 4}, rng);
    record("global_mean_pool", check([&] { return weighted_sum(global_mean_pool(x3)); }, {x3}), 1e-4);
    record("global_mean_pool batched", check([&] { return weighted_sum(global_mean_pool(x4)); }, {x4}), 1e-4);
  }
  {
    auto z = random_tensor({5}, rng, -3.0, 3.0);
    std::vector<int> y{1, 0, 1, 1, 0};
    record("bce_with_sigmoid", check([&] { return bce_with_sigmoid(z, y); }, {z}), 1e-4);
  }
  {
    // Full network on [B=3 x N=4 x T'=16 x 1].
    ModelConfig cfg;
    cfg.nodes = 4;
    cfg.hidden = 6;
    cfg.kernel_size = 3;
    cfg.dropout = 0.0;
    std::mt19937_64 init(5);
    auto params = ModelParams::init(cfg, init);
    Matrix a = Matrix::Zero(4, 4);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i)
        if (i != j) a(j, i) = u(rng);
    BrainGraph graph(a);
    auto x = random_tensor({3, 4, 16, 1}, rng);
    x.set_requires_grad(false);
    // A few training-mode passes give the running statistics non-trivial values.
    std::mt19937_64 drop(1);
    for (int i = 0; i < 3; ++i) forward(x, graph, params, Mode::kTrain, drop);
    std::vector<Tensor> inputs;
    for (auto& p : params.named_parameters()) inputs.push_back(p.tensor);
    inputs.push_back(graph.adjacency());
    std::vector<std::vector<bool>> frozen(inputs.size());
    frozen.back().assign(16, false);
    for (int i = 0; i < 4; ++i) frozen.back()[static_cast<std::size_t>(i * 4 + i)] = true;
    record("forward (all parameters and A)",
        check([&] { return sum(forward(x, graph, params, Mode::kEval, drop)); }, inputs, frozen, 1e-6), 1e-4);
  }
  return out;
}

double acyclicity_gradient_error(int count) {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int c = 0; c < count; ++c) {
    Matrix a(6, 6);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = u(rng);
    Matrix g = acyclicity_grad(a);
    auto numeric = numeric_gradient([](const Matrix& m) { return acyclicity(m); }, a, 1e-6);
    worst = std::max(worst, relative_error({g.data(), static_cast<std::size_t>(g.size())}, numeric));
  }
  return worst;
}

}  // namespace oracle
