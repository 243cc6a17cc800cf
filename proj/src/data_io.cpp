#include "stdagcn/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "stdagcn/csv.hpp"
#include "stdagcn/error.hpp"
#include "stdagcn/rng.hpp"

namespace stdagcn {

namespace fs = std::filesystem;

std::size_t TimeSeriesDataset::length() const {
  return records.empty() ? 0 : static_cast<std::size_t>(records.front().series.cols());
}

std::vector<int> TimeSeriesDataset::labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

void TimeSeriesDataset::validate() const {
  if (records.empty()) throw DataError("dataset has no subjects");
  const auto n = static_cast<Eigen::Index>(nodes());
  const auto t = records.front().series.cols();
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (r.series.rows() != n || r.series.cols() != t) {
      throw DataError("subject '" + r.subject_id + "' has a " + std::to_string(r.series.rows()) +
                      " x " + std::to_string(r.series.cols()) + " series, expected " +
                      std::to_string(n) + " x " + std::to_string(t));
    }
    if (r.label != 0 && r.label != 1) {
      throw DataError("subject '" + r.subject_id + "' has non-binary label " + std::to_string(r.label));
    }
    if (!ids.insert(r.subject_id).second) throw DataError("duplicate subject id '" + r.subject_id + "'");
    if (!r.series.allFinite()) throw DataError("subject '" + r.subject_id + "' has non-finite values");
  }
}

TimeSeriesDataset TimeSeriesDataset::subset(std::span<const std::size_t> indices) const {
  TimeSeriesDataset out;
  out.roi_names = roi_names;
  out.records.reserve(indices.size());
  for (auto i : indices) out.records.push_back(records.at(i));
  return out;
}

bool standardize(std::span<double> row) {
  const double n = static_cast<double>(row.size());
  const double mean = std::accumulate(row.begin(), row.end(), 0.0) / n;
  double var = 0.0;
  for (double v : row) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    std::fill(row.begin(), row.end(), 0.0);
    return true;
  }
  for (double& v : row) v = (v - mean) / sd;
  return false;
}

void standardize(SubjectRecord& record) {
  const auto rows = static_cast<std::size_t>(record.series.rows());
  const auto cols = static_cast<std::size_t>(record.series.cols());
  record.constant_rows.assign(rows, false);
  for (std::size_t i = 0; i < rows; ++i) {
    record.constant_rows[i] = standardize(std::span<double>(record.series.data() + i * cols, cols));
  }
  record.standardized = true;
}

std::size_t sample_start(std::size_t total_length, std::size_t window, std::mt19937_64& rng) {
  if (window == 0 || window > total_length) {
    throw ConfigError("sub-sequence length " + std::to_string(window) +
                      " must lie in [1, " + std::to_string(total_length) + "]");
  }
  std::uniform_int_distribution<std::size_t> dist(0, total_length - window);
  return dist(rng);
}

void copy_window(const SubjectRecord& record, std::size_t start, std::size_t window, double* dst) {
  const auto rows = static_cast<std::size_t>(record.series.rows());
  const auto cols = static_cast<std::size_t>(record.series.cols());
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(record.series.data() + i * cols + start, window, dst + i * window);
  }
}

Tensor sample_subsequence(const SubjectRecord& record, std::size_t window, std::mt19937_64& rng,
                          std::size_t* start_out) {
  const auto total = static_cast<std::size_t>(record.series.cols());
  const std::size_t start = sample_start(total, window, rng);
  if (start_out) *start_out = start;
  const auto n = static_cast<std::size_t>(record.series.rows());
  std::vector<double> buf(n * window);
  copy_window(record, start, window, buf.data());
  return Tensor({n, window, 1}, std::move(buf));
}

namespace {

Matrix load_series(const fs::path& path, const std::string& subject,
                   std::vector<std::string>& names) {
  auto rows = csv::read(path);
  if (rows.size() < 2) throw DataError("subject '" + subject + "': series file " + path.string() + " has no data rows");
  names = rows[0];
  const std::size_t n = names.size();
  const std::size_t t = rows.size() - 1;
  Matrix series(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != n) {
      throw DataError("subject '" + subject + "': row " + std::to_string(r + 1) + " of " +
                      path.string() + " has " + std::to_string(rows[r].size()) +
                      " columns, expected " + std::to_string(n));
    }
    for (std::size_t c = 0; c < n; ++c) {
      series(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r - 1)) =
          csv::parse_number(rows[r][c], path, r + 1, c + 1);
    }
  }
  return series;
}

}  // namespace

TimeSeriesDataset load_dataset(const fs::path& manifest) {
  if (!fs::exists(manifest)) throw IoError("manifest not found: " + manifest.string());
  auto rows = csv::read(manifest);
  if (rows.empty() || rows[0] != csv::Row{"subject_id", "label", "path"}) {
    throw ParseError(manifest.string() + ": header must be subject_id,label,path");
  }
  if (rows.size() < 2) throw DataError(manifest.string() + ": manifest lists no subjects");
  const fs::path base = manifest.parent_path();
  TimeSeriesDataset data;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != 3) {
      throw ParseError(manifest.string() + ": row " + std::to_string(r + 1) + " needs 3 columns");
    }
    SubjectRecord rec;
    rec.subject_id = row[0];
    if (row[1] == "0" || row[1] == "1") {
      rec.label = row[1] == "1" ? 1 : 0;
    } else {
      throw DataError("subject '" + rec.subject_id + "' has non-binary label '" + row[1] + "'");
    }
    fs::path series_path = row[2];
    if (series_path.is_relative()) series_path = base / series_path;
    std::vector<std::string> names;
    rec.series = load_series(series_path, rec.subject_id, names);
    if (data.records.empty()) {
      data.roi_names = names;
    } else if (names.size() != data.roi_names.size() ||
               static_cast<std::size_t>(rec.series.cols()) != data.length()) {
      throw DataError("subject '" + rec.subject_id + "' has " + std::to_string(names.size()) +
                      " ROIs x " + std::to_string(rec.series.cols()) + " time points; cohort has " +
                      std::to_string(data.roi_names.size()) + " x " + std::to_string(data.length()));
    } else if (names != data.roi_names) {
      throw DataError("subject '" + rec.subject_id + "' has ROI names that differ from the cohort");
    }
    if (rec.series.cols() < 2) throw DataError("subject '" + rec.subject_id + "' needs at least 2 time points");
    standardize(rec);
    data.records.push_back(std::move(rec));
  }
  data.validate();
  return data;
}

fs::path write_dataset(const TimeSeriesDataset& data, const fs::path& dir) {
  fs::create_directories(dir / "series");
  std::vector<csv::Row> manifest{{"subject_id", "label", "path"}};
  for (const auto& rec : data.records) {
    const std::string rel = "series/" + rec.subject_id + ".csv";
    manifest.push_back({rec.subject_id, std::to_string(rec.label), rel});
    std::vector<csv::Row> rows;
    rows.push_back(data.roi_names);
    for (Eigen::Index t = 0; t < rec.series.cols(); ++t) {
      csv::Row row;
      for (Eigen::Index i = 0; i < rec.series.rows(); ++i) row.push_back(csv::format(rec.series(i, t)));
      rows.push_back(std::move(row));
    }
    csv::write(dir / rel, rows);
  }
  const fs::path path = dir / "manifest.csv";
  csv::write(path, manifest);
  return path;
}

Matrix pearson_correlation(const Matrix& series) {
  const Eigen::Index n = series.rows();
  const double t = static_cast<double>(series.cols());
  Matrix centered = series.colwise() - series.rowwise().mean();
  Vector sd = (centered.array().square().rowwise().sum() / t).sqrt();
  Matrix corr = (centered * centered.transpose()) / t;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double denom = sd(i) * sd(j);
      corr(i, j) = denom > 0.0 ? corr(i, j) / denom : 0.0;
    }
  }
  return corr;
}

Matrix mean_correlation(const TimeSeriesDataset& data) {
  const auto n = static_cast<Eigen::Index>(data.nodes());
  Matrix acc = Matrix::Zero(n, n);
  for (const auto& r : data.records) acc += pearson_correlation(r.series);
  return acc / static_cast<double>(std::max<std::size_t>(1, data.size()));
}

void SyntheticSpec::validate() const {
  if (nodes < 2) throw ConfigError("synthetic spec needs at least 2 nodes");
  if (length < 2) throw ConfigError("synthetic series length must be at least 2");
  if (subjects_per_class < 1) throw ConfigError("need at least one subject per class");
  if (!(edge_probability > 0.0 && edge_probability < 1.0)) {
    throw ConfigError("edge probability must lie in (0, 1), got " + std::to_string(edge_probability));
  }
  if (!(weight_min > 0.0 && weight_max >= weight_min)) throw ConfigError("weight range must satisfy 0 < min <= max");
  if (!(persistence >= 0.0 && persistence < 1.0)) throw ConfigError("persistence must lie in [0, 1)");
  if (!(noise_std > 0.0)) throw ConfigError("noise std must be positive");
  if (!(perturbed_fraction >= 0.0 && perturbed_fraction <= 1.0)) {
    throw ConfigError("perturbed-edge fraction must lie in [0, 1]");
  }
  if (!(class_scale > 0.0)) throw ConfigError("class scale must be positive");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.nodes;
  auto rng = make_stream(spec.seed, 0);
  SyntheticData out;
  out.topological_order.resize(n);
  std::iota(out.topological_order.begin(), out.topological_order.end(), std::size_t{0});
  std::shuffle(out.topological_order.begin(), out.topological_order.end(), rng);
  const auto& order = out.topological_order;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> magnitude(spec.weight_min, spec.weight_max);
  out.truth = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<WeightedEdge> edges;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (unit(rng) >= spec.edge_probability) continue;
      const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
      const double w = sign * magnitude(rng);
      out.truth(static_cast<Eigen::Index>(order[a]), static_cast<Eigen::Index>(order[b])) = w;
      edges.push_back({order[a], order[b], w});
    }
  }
  std::shuffle(edges.begin(), edges.end(), rng);
  std::size_t perturbed = static_cast<std::size_t>(std::lround(spec.perturbed_fraction * double(edges.size())));
  if (perturbed == 0 && !edges.empty() && spec.perturbed_fraction > 0.0) perturbed = 1;
  out.perturbed_edges.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(perturbed));
  std::sort(out.perturbed_edges.begin(), out.perturbed_edges.end(),
            [](const auto& l, const auto& r) { return std::pair(l.source, l.target) < std::pair(r.source, r.target); });

  Matrix scaled = out.truth;
  for (const auto& e : out.perturbed_edges) {
    scaled(static_cast<Eigen::Index>(e.source), static_cast<Eigen::Index>(e.target)) *= spec.class_scale;
  }

  auto& data = out.dataset;
  for (std::size_t i = 0; i < n; ++i) {
    data.roi_names.push_back("roi_" + std::string(i < 10 ? "0" : "") + std::to_string(i));
  }
  const std::size_t total = 2 * spec.subjects_per_class;
  const std::size_t steps = spec.burn_in + spec.length;
  std::normal_distribution<double> noise(0.0, spec.noise_std);
  for (std::size_t s = 0; s < total; ++s) {
    SubjectRecord rec;
    rec.label = s < spec.subjects_per_class ? 0 : 1;
    rec.subject_id = "sub_" + std::string(s < 10 ? "00" : s < 100 ? "0" : "") + std::to_string(s);
    const Matrix& w = rec.label == 0 ? out.truth : scaled;
    auto srng = make_stream(spec.seed, 1 + s);
    rec.series.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.length));
    std::vector<double> prev(n, 0.0), cur(n, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t node : order) {
        double x = spec.persistence * prev[node] + noise(srng);
        for (std::size_t j = 0; j < n; ++j) {
          const double wj = w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(node));
          if (wj != 0.0) x += wj * std::tanh(cur[j]);
        }
        cur[node] = x;
      }
      if (t >= spec.burn_in) {
        for (std::size_t i = 0; i < n; ++i) {
          rec.series(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t - spec.burn_in)) = cur[i];
        }
      }
      prev = cur;
    }
    standardize(rec);
    data.records.push_back(std::move(rec));
  }
  return out;
}

}  // namespace stdagcn
