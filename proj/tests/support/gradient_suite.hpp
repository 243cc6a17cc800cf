#pragma once

#include <string>
#include <vector>

namespace oracle {

struct GradientCase {
  std::string name;
  double error;      // relative error, analytic vs central differences
  double tolerance;
};

// Every differentiable primitive on small random tensors, plus the full
// three-layer network (N=4, T'=16, eval-mode normalization, no dropout).
std::vector<GradientCase> run_gradient_suite();

// acyclicity_grad against central differences on `count` random 6x6 matrices;
// returns the largest relative error.
double acyclicity_gradient_error(int count);

}  // namespace oracle
