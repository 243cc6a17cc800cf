#include "stdagcn/evaluation.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "stdagcn/csv.hpp"
#include "stdagcn/error.hpp"
#include "stdagcn/rng.hpp"

namespace stdagcn {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

void require_binary(std::span<const int> labels, const char* what) {
  for (int y : labels) {
    if (y != 0 && y != 1) throw UsageError(std::string(what) + " must be 0 or 1");
  }
}

}  // namespace

ConfusionMetrics confusion_metrics(const ConfusionCounts& c) {
  ConfusionMetrics m;
  m.counts = c;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  return m;
}

ConfusionMetrics confusion_metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw UsageError("confusion_metrics: " + std::to_string(predictions.size()) +
                     " predictions for " + std::to_string(labels.size()) + " labels");
  }
  require_binary(predictions, "predictions");
  require_binary(labels, "labels");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      (predictions[i] == 1 ? c.tp : c.fn)++;
    } else {
      (predictions[i] == 0 ? c.tn : c.fp)++;
    }
  }
  return confusion_metrics(c);
}

std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw UsageError("roc_auc: " + std::to_string(scores.size()) + " scores for " +
                     std::to_string(labels.size()) + " labels");
  }
  require_binary(labels, "labels");
  const std::size_t m = scores.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Count of negatives strictly below each positive, plus half of tied negatives,
  // accumulated group by group of equal scores.
  double wins = 0.0;
  std::size_t negatives_below = 0;
  std::size_t positives = 0;
  for (std::size_t start = 0; start < m;) {
    std::size_t end = start;
    std::size_t pos = 0, neg = 0;
    while (end < m && scores[order[end]] == scores[order[start]]) {
      (labels[order[end]] == 1 ? pos : neg)++;
      ++end;
    }
    wins += static_cast<double>(pos) * (static_cast<double>(negatives_below) + 0.5 * static_cast<double>(neg));
    negatives_below += neg;
    positives += pos;
    start = end;
  }
  const std::size_t negatives = m - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  return wins / (static_cast<double>(positives) * static_cast<double>(negatives));
}

double vote_predict(const BrainGraph& graph, ModelParams& params, const SubjectRecord& record,
                    std::size_t voters, std::size_t window, std::mt19937_64& rng) {
  if (voters == 0) throw ConfigError("number of voters must be at least 1");
  const auto n = static_cast<std::size_t>(record.series.rows());
  const auto total = static_cast<std::size_t>(record.series.cols());
  if (window > total) {
    throw ConfigError("sub-sequence length " + std::to_string(window) + " exceeds series length " +
                      std::to_string(total));
  }
  std::vector<double> batch(voters * n * window);
  for (std::size_t s = 0; s < voters; ++s) {
    copy_window(record, sample_start(total, window, rng), window, batch.data() + s * n * window);
  }
  Tensor x({voters, n, window, 1}, std::move(batch));
  auto logits = forward(x, graph, params, Mode::kEval, rng);
  double mean = 0.0;
  for (double z : logits.values()) mean += sigmoid(z);
  return mean / static_cast<double>(voters);
}

std::vector<std::size_t> FoldAssignment::train_indices(std::size_t repeat, std::size_t fold) const {
  std::vector<std::size_t> out;
  const auto& row = fold_of.at(repeat);
  for (std::size_t s = 0; s < row.size(); ++s)
    if (row[s] != fold) out.push_back(s);
  return out;
}

std::vector<std::size_t> FoldAssignment::test_indices(std::size_t repeat, std::size_t fold) const {
  std::vector<std::size_t> out;
  const auto& row = fold_of.at(repeat);
  for (std::size_t s = 0; s < row.size(); ++s)
    if (row[s] == fold) out.push_back(s);
  return out;
}

FoldAssignment repeated_stratified_kfold(std::span<const int> labels, std::size_t folds,
                                         std::size_t repeats, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (repeats < 1) throw ConfigError("cross-validation needs at least 1 repeat");
  require_binary(labels, "labels");
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t s = 0; s < labels.size(); ++s) members[labels[s]].push_back(s);
  for (int cls = 0; cls < 2; ++cls) {
    if (members[cls].size() < folds) {
      throw ConfigError("class " + std::to_string(cls) + " has " + std::to_string(members[cls].size()) +
                        " subjects, fewer than " + std::to_string(folds) + " folds");
    }
  }
  FoldAssignment out;
  out.folds = folds;
  for (std::size_t r = 0; r < repeats; ++r) {
    auto rng = make_stream(seed, r);
    std::vector<std::size_t> row(labels.size(), 0);
    // Deal each shuffled class round-robin; class 1 continues where class 0
    // stopped so that fold sizes differ by at most one overall.
    std::size_t next = 0;
    for (auto& cls : members) {
      auto shuffled = cls;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      for (auto s : shuffled) {
        row[s] = next;
        next = (next + 1) % folds;
      }
    }
    out.fold_of.push_back(std::move(row));
  }
  return out;
}

Summary summarize(std::span<const std::optional<double>> values) {
  Summary s;
  double total = 0.0;
  for (const auto& v : values) {
    if (v) {
      total += *v;
      ++s.count;
    }
  }
  if (s.count == 0) return s;
  const double mean = total / static_cast<double>(s.count);
  s.mean = mean;
  if (s.count > 1) {
    double ss = 0.0;
    for (const auto& v : values)
      if (v) ss += (*v - mean) * (*v - mean);
    s.std = std::sqrt(ss / static_cast<double>(s.count - 1));
  } else {
    s.std = 0.0;
  }
  return s;
}

void MetricsReport::aggregate() {
  std::vector<std::optional<double>> acc, sen, spe, au;
  pooled = {};
  for (const auto& f : folds) {
    acc.push_back(f.metrics.accuracy);
    sen.push_back(f.metrics.sensitivity);
    spe.push_back(f.metrics.specificity);
    au.push_back(f.auc);
    pooled.tp += f.metrics.counts.tp;
    pooled.fn += f.metrics.counts.fn;
    pooled.tn += f.metrics.counts.tn;
    pooled.fp += f.metrics.counts.fp;
  }
  accuracy = summarize(acc);
  sensitivity = summarize(sen);
  specificity = summarize(spe);
  auc = summarize(au);
}

void EvalOptions::validate() const {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (repeats < 1) throw ConfigError("cross-validation needs at least 1 repeat");
  if (voters < 1) throw ConfigError("number of voters must be at least 1");
  if (window < 1) throw ConfigError("voting window must be positive");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
}

FoldResult evaluate_holdout(const BrainGraph& graph, ModelParams& params,
                            const TimeSeriesDataset& data, std::size_t voters, std::size_t window,
                            std::uint64_t seed) {
  if (data.nodes() != graph.nodes()) {
    throw DataError("model expects N=" + std::to_string(graph.nodes()) + " ROIs, dataset has N=" +
                    std::to_string(data.nodes()));
  }
  std::vector<double> scores;
  std::vector<int> predictions;
  for (std::size_t s = 0; s < data.size(); ++s) {
    auto rng = make_stream(seed, s);
    double p = vote_predict(graph, params, data.records[s], voters, window, rng);
    scores.push_back(p);
    predictions.push_back(p >= 0.5 ? 1 : 0);
  }
  auto labels = data.labels();
  FoldResult out;
  out.metrics = confusion_metrics(predictions, labels);
  out.auc = roc_auc(scores, labels);
  return out;
}

MetricsReport cross_validate(const TimeSeriesDataset& data, const FitConfig& fit_cfg,
                             const EvalOptions& opts) {
  opts.validate();
  fit_cfg.validate();
  data.validate();
  auto labels = data.labels();
  auto assignment = repeated_stratified_kfold(labels, opts.folds, opts.repeats, opts.seed);

  MetricsReport report;
  report.eval_seed = opts.seed;
  report.voters = opts.voters;
  report.window = opts.window;
  const std::size_t total = opts.folds * opts.repeats;
  report.folds.resize(total);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t job; (job = next++) < total;) {
      try {
        const std::size_t r = job / opts.folds, f = job % opts.folds;
        auto train = data.subset(assignment.train_indices(r, f));
        auto test = data.subset(assignment.test_indices(r, f));
        // Seeds are a function of the fold alone, so results do not depend on jobs.
        const std::uint64_t fold_seed = opts.seed * 1000003ULL + job + 1;
        auto fitted = fit(train, fit_cfg, fold_seed);
        auto row = evaluate_holdout(fitted.graph, fitted.params, test, opts.voters, opts.window,
                                    fold_seed ^ 0x9e3779b97f4a7c15ULL);
        row.repeat = r;
        row.fold = f;
        row.termination = to_string(fitted.reason);
        row.final_h = acyclicity(fitted.graph);
        report.folds[job] = std::move(row);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = total;
      }
    }
  };
  const std::size_t threads = std::min(opts.jobs, total);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  report.aggregate();
  return report;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json counts_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fn", c.fn}, {"tn", c.tn}, {"fp", c.fp}};
}

nlohmann::json summary_json(const Summary& s) {
  return {{"mean", opt(s.mean)}, {"std", opt(s.std)}, {"count", s.count}};
}

}  // namespace

std::string to_json(const MetricsReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.folds) {
    folds.push_back({{"repeat", f.repeat},
                     {"fold", f.fold},
                     {"ACC", opt(f.metrics.accuracy)},
                     {"SEN", opt(f.metrics.sensitivity)},
                     {"SPE", opt(f.metrics.specificity)},
                     {"AUC", opt(f.auc)},
                     {"confusion", counts_json(f.metrics.counts)},
                     {"termination", f.termination.empty() ? nlohmann::json(nullptr) : nlohmann::json(f.termination)},
                     {"final_h", opt(f.final_h)}});
  }
  nlohmann::json out = {{"positive_label", 1},
                        {"eval_seed", report.eval_seed},
                        {"voters", report.voters},
                        {"window", report.window},
                        {"folds", std::move(folds)},
                        {"aggregate",
                         {{"ACC", summary_json(report.accuracy)},
                          {"SEN", summary_json(report.sensitivity)},
                          {"SPE", summary_json(report.specificity)},
                          {"AUC", summary_json(report.auc)},
                          {"confusion", counts_json(report.pooled)}}}};
  return out.dump(2);
}

GroupDifference group_difference(const Matrix& group1, const Matrix& group2) {
  if (group1.rows() != group2.rows() || group1.cols() != group2.cols()) {
    throw UsageError("group_difference: matrices differ in shape");
  }
  if (group1.rows() != group1.cols()) throw UsageError("group_difference: matrices must be square");
  const auto n = static_cast<std::size_t>(group1.rows());
  GroupDifference out;
  out.edge_diff = (group1 - group2).cwiseAbs();
  out.node_diff.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row += out.edge_diff(i, j);
      col += out.edge_diff(j, i);
    }
    out.node_diff[i] = row + col;
  }
  out.node_ranking.resize(n);
  std::iota(out.node_ranking.begin(), out.node_ranking.end(), 0);
  std::stable_sort(out.node_ranking.begin(), out.node_ranking.end(),
                   [&](auto a, auto b) { return out.node_diff[a] > out.node_diff[b]; });
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (out.edge_diff(j, i) != 0.0) out.edge_ranking.push_back({j, i, out.edge_diff(j, i)});
  std::stable_sort(out.edge_ranking.begin(), out.edge_ranking.end(),
                   [](const RankedEdge& a, const RankedEdge& b) { return a.value > b.value; });
  return out;
}

std::vector<std::size_t> GroupDifference::top_nodes(std::size_t k) const {
  if (k == 0 || k > node_ranking.size()) k = node_ranking.size();
  return {node_ranking.begin(), node_ranking.begin() + static_cast<std::ptrdiff_t>(k)};
}

std::vector<RankedEdge> GroupDifference::top_edges(std::size_t k) const {
  if (k == 0 || k > edge_ranking.size()) k = edge_ranking.size();
  return {edge_ranking.begin(), edge_ranking.begin() + static_cast<std::ptrdiff_t>(k)};
}

void write_node_differences(const std::filesystem::path& path, const GroupDifference& diff,
                            const std::vector<std::string>& names, std::size_t top_k) {
  if (names.size() != diff.node_diff.size()) throw ShapeError("node table needs one name per node");
  std::vector<csv::Row> rows{{"rank", "roi_index", "roi_name", "node_diff"}};
  std::size_t rank = 1;
  for (auto i : diff.top_nodes(top_k)) {
    rows.push_back({std::to_string(rank++), std::to_string(i), names[i], csv::format(diff.node_diff[i])});
  }
  csv::write(path, rows);
}

void write_edge_differences(const std::filesystem::path& path, const GroupDifference& diff,
                            const std::vector<std::string>& names, std::size_t top_k) {
  if (names.size() != diff.node_diff.size()) throw ShapeError("edge table needs one name per node");
  std::vector<csv::Row> rows{
      {"rank", "source_index", "source_name", "target_index", "target_name", "edge_diff"}};
  std::size_t rank = 1;
  for (const auto& e : diff.top_edges(top_k)) {
    rows.push_back({std::to_string(rank++), std::to_string(e.source), names[e.source],
                    std::to_string(e.target), names[e.target], csv::format(e.value)});
  }
  csv::write(path, rows);
}

StructureMetrics structure_metrics(const Matrix& learned, const Matrix& truth, double epsilon) {
  if (learned.rows() != truth.rows() || learned.cols() != truth.cols() || learned.rows() != learned.cols()) {
    throw ShapeError("structure_metrics: matrices must be square and of equal shape");
  }
  if (!(epsilon > 0.0)) throw ConfigError("threshold epsilon must be positive");
  const auto n = learned.rows();
  auto in_learned = [&](Eigen::Index j, Eigen::Index i) { return std::abs(learned(j, i)) > epsilon; };
  auto in_truth = [&](Eigen::Index j, Eigen::Index i) { return truth(j, i) != 0.0; };

  StructureMetrics m;
  std::size_t learned_edges = 0, truth_edges = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i == j) continue;
      learned_edges += in_learned(j, i);
      truth_edges += in_truth(j, i);
      if (in_learned(j, i) && in_truth(j, i)) ++m.true_positives;
    }
  }
  // SHD over unordered pairs: a pair whose edge only differs in direction costs one.
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const bool lf = in_learned(j, i), lb = in_learned(i, j);
      const bool tf = in_truth(j, i), tb = in_truth(i, j);
      if (lf == tf && lb == tb) continue;
      ++m.shd;
      const bool l_any = lf || lb, t_any = tf || tb;
      if (l_any && !t_any) {
        ++m.extra;
      } else if (!l_any && t_any) {
        ++m.missing;
      } else {
        ++m.reversed;
      }
    }
  }
  m.precision = ratio(m.true_positives, learned_edges);
  m.recall = ratio(m.true_positives, truth_edges);
  if (m.precision && m.recall) {
    const double s = *m.precision + *m.recall;
    m.f1 = s > 0.0 ? 2.0 * *m.precision * *m.recall / s : 0.0;
  }
  return m;
}

}  // namespace stdagcn
