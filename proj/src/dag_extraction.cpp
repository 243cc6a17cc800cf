#include "stdagcn/dag_extraction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "stdagcn/csv.hpp"
#include "stdagcn/error.hpp"

namespace stdagcn {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw ShapeError(std::string(what) + " must be square, got " + std::to_string(m.rows()) +
                     "x" + std::to_string(m.cols()));
  }
}

const char* status_name(RemovalReason reason) {
  return reason == RemovalReason::kThreshold ? "threshold_removed" : "cycle_removed";
}

}  // namespace

std::size_t ExtractedDag::kept_count() const {
  return static_cast<std::size_t>((dag.array() != 0.0).count());
}

std::size_t ExtractedDag::removed_count(RemovalReason reason) const {
  return static_cast<std::size_t>(std::count_if(removed_edges.begin(), removed_edges.end(),
                                                [&](const RemovedEdge& e) { return e.reason == reason; }));
}

Matrix average_runs(std::span<const Matrix> runs) {
  if (runs.empty()) throw UsageError("average_runs needs at least one matrix");
  Matrix total = runs.front();
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].rows() != total.rows() || runs[r].cols() != total.cols()) {
      throw ShapeError("average_runs: run " + std::to_string(r) + " has a different shape");
    }
    total += runs[r];
  }
  return total / static_cast<double>(runs.size());
}

Matrix threshold_graph(const Matrix& adjacency, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("threshold epsilon must be positive");
  return (adjacency.array().abs() > epsilon).select(adjacency, 0.0);
}

std::optional<std::vector<Edge>> find_cycle(const Matrix& adjacency) {
  require_square(adjacency, "adjacency");
  const auto n = static_cast<std::size_t>(adjacency.rows());
  enum Color : unsigned char { kWhite, kGray, kBlack };
  std::vector<Color> color(n, kWhite);
  std::vector<std::size_t> parent(n, n);
  // Explicit stack of (node, next neighbor to try).
  std::vector<std::pair<std::size_t, std::size_t>> stack;

  for (std::size_t root = 0; root < n; ++root) {
    if (color[root] != kWhite) continue;
    color[root] = kGray;
    stack.emplace_back(root, 0);
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      bool descended = false;
      while (next < n) {
        std::size_t v = next++;
        if (adjacency(u, v) == 0.0) continue;
        if (color[v] == kGray) {
          // Back edge u -> v closes a cycle along the gray path v ... u.
          std::vector<Edge> cycle{{u, v}};
          for (std::size_t w = u; w != v; w = parent[w]) cycle.push_back({parent[w], w});
          std::reverse(cycle.begin(), cycle.end());
          return cycle;
        }
        if (color[v] == kWhite) {
          color[v] = kGray;
          parent[v] = u;
          stack.emplace_back(v, 0);
          descended = true;
          break;
        }
      }
      if (!descended) {
        color[stack.back().first] = kBlack;
        stack.pop_back();
      }
    }
  }
  return std::nullopt;
}

bool is_acyclic(const Matrix& adjacency) {
  require_square(adjacency, "adjacency");
  const auto n = static_cast<std::size_t>(adjacency.rows());
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (adjacency(j, i) != 0.0) ++indegree[i];
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push_back(i);
  std::size_t visited = 0;
  while (!ready.empty()) {
    auto j = ready.back();
    ready.pop_back();
    ++visited;
    for (std::size_t i = 0; i < n; ++i) {
      if (adjacency(j, i) != 0.0 && --indegree[i] == 0) ready.push_back(i);
    }
  }
  return visited == n;
}

ExtractedDag extract_dag(const Matrix& adjacency, double epsilon) {
  require_square(adjacency, "adjacency");
  ExtractedDag out;
  out.dag = threshold_graph(adjacency, epsilon);
  const auto n = adjacency.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (adjacency(j, i) != 0.0 && out.dag(j, i) == 0.0) {
        out.removed_edges.push_back({static_cast<std::size_t>(j), static_cast<std::size_t>(i),
                                     adjacency(j, i), RemovalReason::kThreshold});
      }
    }
  }
  while (auto cycle = find_cycle(out.dag)) {
    auto weakest = std::min_element(cycle->begin(), cycle->end(), [&](const Edge& a, const Edge& b) {
      double wa = std::abs(out.dag(a.source, a.target));
      double wb = std::abs(out.dag(b.source, b.target));
      if (wa != wb) return wa < wb;
      return std::tie(a.source, a.target) < std::tie(b.source, b.target);
    });
    out.removed_edges.push_back({weakest->source, weakest->target,
                                 out.dag(weakest->source, weakest->target), RemovalReason::kCycle});
    out.dag(weakest->source, weakest->target) = 0.0;
  }
  out.residual = adjacency - out.dag;
  return out;
}

std::vector<std::string> default_roi_names(std::size_t nodes) {
  std::vector<std::string> names;
  names.reserve(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "roi_%02zu", i);
    names.emplace_back(buf);
  }
  return names;
}

namespace {

void write_edges(const std::filesystem::path& path, const Matrix& kept,
                 std::span<const RemovedEdge> removed, const std::vector<std::string>& names) {
  const auto n = static_cast<std::size_t>(kept.rows());
  if (names.size() != n) throw ShapeError("edge list needs one name per node");
  struct Entry {
    std::size_t source, target;
    double weight;
    const char* status;
  };
  std::vector<Entry> entries;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (kept(j, i) != 0.0) entries.push_back({j, i, kept(j, i), "kept"});
  for (const auto& e : removed) entries.push_back({e.source, e.target, e.weight, status_name(e.reason)});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.source, a.target) < std::tie(b.source, b.target);
  });

  std::vector<csv::Row> rows{{"source_index", "source_name", "target_index", "target_name", "weight", "status"}};
  for (const auto& e : entries) {
    rows.push_back({std::to_string(e.source), names[e.source], std::to_string(e.target),
                    names[e.target], csv::format(e.weight), e.status});
  }
  csv::write(path, rows);
}

}  // namespace

void write_edge_list(const std::filesystem::path& path, const ExtractedDag& result,
                     const std::vector<std::string>& names) {
  write_edges(path, result.dag, result.removed_edges, names);
}

void write_edge_list(const std::filesystem::path& path, const Matrix& adjacency,
                     const std::vector<std::string>& names) {
  write_edges(path, adjacency, {}, names);
}

}  // namespace stdagcn
