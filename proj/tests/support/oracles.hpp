#pragma once

#include <functional>
#include <span>
#include <vector>

#include "stdagcn/matrix.hpp"
#include "stdagcn/tensor.hpp"

namespace oracle {

// ||a - b|| / max(||a||, ||b||), or the absolute gap when both are tiny.
double relative_error(std::span<const double> a, std::span<const double> b);

// Central differences of a scalar-valued function with respect to every
// element of `input`, perturbing in place.
std::vector<double> numeric_gradient(const std::function<double()>& f, stdagcn::Tensor& input,
                                     double step = 1e-5);
std::vector<double> numeric_gradient(const std::function<double(const stdagcn::Matrix&)>& f,
                                     const stdagcn::Matrix& at, double step = 1e-5);

// Reduces any tensor to a scalar with fixed pseudo-random weights, so that
// every output element contributes a distinct coefficient.
stdagcn::Tensor weighted_sum(const stdagcn::Tensor& x, unsigned seed = 7);

// Recursive three-colour DFS over the nonzero support.
bool has_cycle(const stdagcn::Matrix& adjacency);
// Whether edge (u, v) lies on a directed cycle: v reaches u.
bool on_cycle(const stdagcn::Matrix& adjacency, std::size_t u, std::size_t v);

// Mean over all positive/negative pairs of 1[s+ > s-] + 0.5 * 1[s+ == s-].
double auc_all_pairs(std::span<const double> scores, std::span<const int> labels);

// Nearest class centroid on upper-triangular Pearson correlation features.
// Each series is [N x T]. Returns holdout accuracy.
double nearest_centroid_accuracy(const std::vector<stdagcn::Matrix>& train_series,
                                 std::span<const int> train_labels,
                                 const std::vector<stdagcn::Matrix>& test_series,
                                 std::span<const int> test_labels);

// Plain matrix power evaluation of tr[(I + A.A / N)^N] - N.
double acyclicity_direct(const stdagcn::Matrix& adjacency);

}  // namespace oracle
