#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stdagcn/matrix.hpp"

namespace stdagcn {

struct Edge {
  std::size_t source;
  std::size_t target;

  bool operator==(const Edge&) const = default;
};

enum class RemovalReason { kThreshold, kCycle };

struct RemovedEdge {
  std::size_t source;
  std::size_t target;
  double weight;
  RemovalReason reason;
};

struct ExtractedDag {
  Matrix dag;
  std::vector<RemovedEdge> removed_edges;
  Matrix residual;  // input minus dag

  std::size_t kept_count() const;
  std::size_t removed_count(RemovalReason reason) const;
};

// Elementwise mean of equally shaped matrices.
Matrix average_runs(std::span<const Matrix> runs);

// Zeroes every entry with |a| <= epsilon.
Matrix threshold_graph(const Matrix& adjacency, double epsilon);

// Some directed cycle in the support of `adjacency`, as its edge list in
// traversal order. DFS starts at the lowest unvisited node and visits
// neighbors in ascending index order.
std::optional<std::vector<Edge>> find_cycle(const Matrix& adjacency);

// Kahn topological sort over the nonzero support.
bool is_acyclic(const Matrix& adjacency);

// Thresholds, then repeatedly drops the weakest edge of a detected cycle
// (ties to the lowest (source, target)) until the support is acyclic.
ExtractedDag extract_dag(const Matrix& adjacency, double epsilon);

// source_index,source_name,target_index,target_name,weight,status with
// status in {kept, threshold_removed, cycle_removed}.
void write_edge_list(const std::filesystem::path& path, const ExtractedDag& result,
                     const std::vector<std::string>& names);
// Edge list of every nonzero entry, all marked kept.
void write_edge_list(const std::filesystem::path& path, const Matrix& adjacency,
                     const std::vector<std::string>& names);

std::vector<std::string> default_roi_names(std::size_t nodes);

}  // namespace stdagcn
