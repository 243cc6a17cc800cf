#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stdagcn/matrix.hpp"
#include "stdagcn/tensor.hpp"

namespace stdagcn {

struct SubjectRecord {
  std::string subject_id;
  int label = 0;
  Matrix series;  // [N x T_total], one row per ROI
  bool standardized = false;
  std::vector<bool> constant_rows;  // rows that were constant before standardization
};

struct TimeSeriesDataset {
  std::vector<SubjectRecord> records;
  std::vector<std::string> roi_names;

  std::size_t nodes() const { return roi_names.size(); }
  std::size_t length() const;
  std::size_t size() const { return records.size(); }
  std::vector<int> labels() const;

  // Uniform N and T_total, unique ids, binary labels.
  void validate() const;
  TimeSeriesDataset subset(std::span<const std::size_t> indices) const;
};

// z-scores a row in place with the population standard deviation.
// Returns true when the row was constant; it is then set to zeros.
bool standardize(std::span<double> row);
void standardize(SubjectRecord& record);

std::size_t sample_start(std::size_t total_length, std::size_t window, std::mt19937_64& rng);

// Copies series[:, start:start+window] into dst laid out as [N x window].
void copy_window(const SubjectRecord& record, std::size_t start, std::size_t window, double* dst);

// Random contiguous window of every ROI, shaped [N x window x 1].
Tensor sample_subsequence(const SubjectRecord& record, std::size_t window, std::mt19937_64& rng,
                          std::size_t* start_out = nullptr);

// Manifest CSV with header subject_id,label,path; each path a CSV with a
// header of ROI names and T_total rows. Relative paths resolve against the
// manifest's directory. Rows are standardized after loading.
TimeSeriesDataset load_dataset(const std::filesystem::path& manifest);

// Writes manifest.csv and one series CSV per subject under `dir`.
// Returns the manifest path.
std::filesystem::path write_dataset(const TimeSeriesDataset& data, const std::filesystem::path& dir);

// Pearson correlation between ROI rows of one [N x T] series.
Matrix pearson_correlation(const Matrix& series);
// Elementwise mean of per-subject correlation matrices.
Matrix mean_correlation(const TimeSeriesDataset& data);

struct SyntheticSpec {
  std::size_t nodes = 10;
  std::size_t length = 256;
  std::size_t subjects_per_class = 100;
  double edge_probability = 0.3;
  double weight_min = 0.5;
  double weight_max = 1.5;
  double persistence = 0.5;
  double noise_std = 0.5;
  double perturbed_fraction = 0.3;
  double class_scale = 1.8;
  std::size_t burn_in = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

struct WeightedEdge {
  std::size_t source;
  std::size_t target;
  double weight;
};

struct SyntheticData {
  TimeSeriesDataset dataset;
  Matrix truth;  // class-0 SEM weights; support is the ground-truth DAG
  std::vector<WeightedEdge> perturbed_edges;
  std::vector<std::size_t> topological_order;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace stdagcn
