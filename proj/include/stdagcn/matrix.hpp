#pragma once

#include <Eigen/Core>

namespace stdagcn {

// Row-major so that it shares layout with Tensor storage. Entry (j, i) of an
// adjacency matrix is the weight of edge j -> i.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace stdagcn
