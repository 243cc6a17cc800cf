#include <cmath>
#include <random>

#include "doctest.h"
#include "stdagcn/error.hpp"
#include "stdagcn/model.hpp"

using namespace stdagcn;
using doctest::Approx;

namespace {

Tensor random_input(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(shape_size(shape));
  for (auto& e : v) e = n(rng);
  return Tensor(std::move(shape), std::move(v));
}

StDagcLayer unit_layer(std::size_t nodes) {
  StDagcLayer l;
  l.spatial_weight = Tensor({1, 1}, {1.0}, true);
  l.spatial_bias = Tensor::zeros({nodes, 1}, true);
  l.spatial_norm = BatchNormParams::create(1);
  l.temporal_kernel = Tensor({1, 1, 1}, {1.0}, true);
  l.temporal_norm = BatchNormParams::create(1);
  return l;
}

double at(const Tensor& t, std::size_t b, std::size_t n, std::size_t s, std::size_t f) {
  const auto& sh = t.shape();
  return t.values()[((b * sh[1] + n) * sh[2] + s) * sh[3] + f];
}

}  // namespace

TEST_CASE("brain graph keeps a zero diagonal") {
  Matrix a = Matrix::Constant(3, 3, 0.5);
  BrainGraph g(a);
  CHECK(g.matrix().diagonal().isZero());
  CHECK(g.alpha() == 1.0 / 3.0);
  Matrix bad = Matrix::Zero(3, 3);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(g.set_matrix(bad), DataError);
  CHECK_THROWS_AS(g.set_matrix(Matrix::Zero(2, 2)), ShapeError);
}

TEST_CASE("dag_conv") {
  ModelConfig cfg;
  cfg.nodes = 3;
  cfg.hidden = 4;
  cfg.kernel_size = 3;
  std::mt19937_64 rng(1);
  auto params = ModelParams::init(cfg, rng);
  auto x = random_input({2, 3, 5, 1}, 2);

  SUBCASE("zero graph gives zero output") {
    BrainGraph g(3);
    g.set_matrix(Matrix::Zero(3, 3));
    auto y = dag_conv(x, g, params.layers[0], Mode::kTrain);
    for (double v : y.values()) CHECK(v == 0.0);
  }
  SUBCASE("node output ignores non-parents") {
    Matrix a = Matrix::Zero(3, 3);
    a(0, 1) = 0.7;  // only edge: node 0 -> node 1
    BrainGraph g(a);
    auto y1 = dag_conv(x, g, params.layers[0], Mode::kEval);
    auto x2 = x.clone();
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t t = 0; t < 5; ++t) x2.values()[(b * 3 + 2) * 5 + t] += 3.0;
    auto y2 = dag_conv(x2, g, params.layers[0], Mode::kEval);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t f = 0; f < 4; ++f) CHECK(at(y1, b, 1, t, f) == at(y2, b, 1, t, f));
  }
  SUBCASE("hand evaluation with normalization bypassed") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = 1.0;
    BrainGraph g(a);
    auto layer = unit_layer(2);
    Tensor h({1, 2, 3, 1}, {-1.0, 2.0, 0.5, 9.0, 9.0, 9.0});
    auto y = dag_conv(h, g, layer, Mode::kTrain, false);
    CHECK(at(y, 0, 1, 0, 0) == 0.0);
    CHECK(at(y, 0, 1, 1, 0) == 2.0);
    CHECK(at(y, 0, 1, 2, 0) == 0.5);
    for (std::size_t t = 0; t < 3; ++t) CHECK(at(y, 0, 0, t, 0) == 0.0);  // root node
  }
  SUBCASE("node count mismatch") {
    BrainGraph g(4);
    CHECK_THROWS_AS(dag_conv(x, g, params.layers[0], Mode::kEval), ShapeError);
  }
}

TEST_CASE("temporal_conv") {
  ModelConfig cfg;
  cfg.nodes = 3;
  cfg.hidden = 4;
  cfg.kernel_size = 3;
  std::mt19937_64 rng(1);
  auto params = ModelParams::init(cfg, rng);
  auto h = random_input({2, 3, 6, 4}, 3);

  SUBCASE("nodes never mix") {
    auto y1 = temporal_conv(h, params.layers[1], Mode::kEval);
    auto h2 = h.clone();
    for (std::size_t t = 0; t < 6; ++t) h2.values()[((0 * 3 + 2) * 6 + t) * 4] += 1.0;
    auto y2 = temporal_conv(h2, params.layers[1], Mode::kEval);
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t t = 0; t < 6; ++t)
          for (std::size_t f = 0; f < 4; ++f) {
            if (b == 0 && n == 2) continue;
            CHECK(at(y1, b, n, t, f) == at(y2, b, n, t, f));
          }
  }
  SUBCASE("identity kernel without normalization is relu") {
    auto layer = unit_layer(1);
    Tensor x({1, 1, 4, 1}, {-1, 2, -3, 4});
    auto y = temporal_conv(x, layer, Mode::kTrain, false);
    CHECK(std::vector<double>(y.values().begin(), y.values().end()) == std::vector<double>{0, 2, 0, 4});
  }
  SUBCASE("same padding keeps length") {
    auto y = temporal_conv(h, params.layers[1], Mode::kTrain);
    CHECK(y.shape() == Shape{2, 3, 6, 4});
  }
}

TEST_CASE("forward") {
  ModelConfig cfg;
  cfg.nodes = 4;
  cfg.hidden = 8;
  cfg.kernel_size = 3;
  std::mt19937_64 rng(7);
  auto params = ModelParams::init(cfg, rng);
  std::mt19937_64 drop(0);

  SUBCASE("zero graph collapses to the head bias") {
    BrainGraph g(4);
    g.set_matrix(Matrix::Zero(4, 4));
    params.head_bias.values()[0] = 0.37;
    for (std::uint64_t s = 0; s < 3; ++s) {
      auto logit = forward(random_input({4, 10, 1}, s), g, params, Mode::kEval, drop);
      CHECK(logit.item() == Approx(0.37).epsilon(1e-15));
    }
  }
  SUBCASE("identical inputs give identical logits in eval mode") {
    Matrix a = Matrix::Constant(4, 4, 0.3);
    BrainGraph g(a);
    auto one = random_input({1, 4, 10, 1}, 9);
    std::vector<double> v;
    for (int b = 0; b < 3; ++b) v.insert(v.end(), one.values().begin(), one.values().end());
    auto logits = forward(Tensor({3, 4, 10, 1}, v), g, params, Mode::kEval, drop);
    CHECK(logits.values()[0] == logits.values()[1]);
    CHECK(logits.values()[1] == logits.values()[2]);
  }
  SUBCASE("shape chain") {
    Matrix a = Matrix::Constant(4, 4, 0.3);
    BrainGraph g(a);
    auto logits = forward(random_input({5, 4, 10, 1}, 1), g, params, Mode::kTrain, drop);
    CHECK(logits.shape() == Shape{5});
    CHECK(params.layers[0].spatial_weight.shape() == Shape{1, 8});
    CHECK(params.layers[1].spatial_weight.shape() == Shape{8, 8});
    CHECK(params.layers[2].temporal_kernel.shape() == Shape{3, 8, 8});
    CHECK(params.head_weight.shape() == Shape{8, 1});
  }
  SUBCASE("non-finite input is a data error") {
    BrainGraph g(4);
    auto x = random_input({4, 10, 1}, 2);
    x.values()[5] = INFINITY;
    CHECK_THROWS_AS(forward(x, g, params, Mode::kEval, drop), DataError);
  }
  SUBCASE("window shorter than the kernel") {
    BrainGraph g(4);
    CHECK_THROWS_AS(forward(random_input({4, 2, 1}, 2), g, params, Mode::kEval, drop), ShapeError);
  }
}

TEST_CASE("predict_proba") {
  CHECK(predict_proba(0.0) == 0.5);
  CHECK(predict_proba(1000.0) == 1.0);
  CHECK(predict_proba(-1000.0) == Approx(0.0));
  for (double z : {0.3, 2.0, 7.5}) CHECK(predict_proba(-z) == Approx(1 - predict_proba(z)).epsilon(1e-12));
}

TEST_CASE("default model shape") {
  ModelConfig cfg;
  cfg.nodes = 5;
  std::mt19937_64 rng(1);
  auto p = ModelParams::init(cfg, rng);
  CHECK(p.layers[0].spatial_weight.shape() == Shape{1, 64});
  CHECK(p.layers[0].spatial_bias.shape() == Shape{5, 64});
  CHECK(p.layers[0].temporal_kernel.shape() == Shape{7, 64, 64});
  CHECK(p.named_parameters().size() == 23);
  cfg.kernel_size = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
