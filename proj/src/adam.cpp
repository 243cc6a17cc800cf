#include "stdagcn/adam.hpp"

#include <cmath>

namespace stdagcn {

void Adam::add_param(Tensor param, bool decay) {
  const auto n = param.size();
  slots_.push_back({std::move(param), decay, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
}

void Adam::step() {
  ++step_;
  const auto& o = options_;
  const double t = static_cast<double>(step_);
  const double bias1 = 1.0 - std::pow(o.beta1, t);
  const double bias2 = 1.0 - std::pow(o.beta2, t);
  for (auto& slot : slots_) {
    if (!slot.param.has_grad()) continue;
    auto p = slot.param.values();
    auto g = slot.param.grad();
    const double shrink = slot.decay ? 1.0 - o.learning_rate * o.weight_decay : 1.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      slot.m[i] = o.beta1 * slot.m[i] + (1.0 - o.beta1) * g[i];
      slot.v[i] = o.beta2 * slot.v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = slot.m[i] / bias1;
      const double v_hat = slot.v[i] / bias2;
      p[i] = p[i] * shrink - o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (auto& slot : slots_) slot.param.zero_grad();
}

}  // namespace stdagcn
