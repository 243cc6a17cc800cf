#pragma once

#include <cstdint>
#include <vector>

#include "stdagcn/tensor.hpp"

namespace stdagcn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-3;
};

// Adam with bias correction and decoupled weight decay. Decay is applied
// only to parameters registered with `decay = true` (weight matrices).
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void add_param(Tensor param, bool decay);

  // One update of every registered parameter that carries a gradient.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const AdamOptions& options() const { return options_; }

  std::span<const double> first_moment(std::size_t slot) const { return slots_.at(slot).m; }
  std::span<const double> second_moment(std::size_t slot) const { return slots_.at(slot).v; }

 private:
  struct Slot {
    Tensor param;
    bool decay;
    std::vector<double> m;
    std::vector<double> v;
  };
  AdamOptions options_;
  std::vector<Slot> slots_;
  std::uint64_t step_ = 0;
};

}  // namespace stdagcn
