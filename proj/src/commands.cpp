#include "stdagcn/commands.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "stdagcn/checkpoint.hpp"
#include "stdagcn/csv.hpp"
#include "stdagcn/error.hpp"

namespace stdagcn {

namespace fs = std::filesystem;

namespace {

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void echo_config(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const auto text = to_json(cfg);
  log << "config: " << nlohmann::json::parse(text).dump() << '\n';
  write_text(out / "config.json", text);
}

std::string opt_cell(const std::optional<double>& v) { return v ? csv::format(*v) : std::string(); }

struct LoadedMatrix {
  Matrix values;
  std::vector<std::string> names;
};

LoadedMatrix load_adjacency(const fs::path& path) {
  std::ifstream probe(path);
  if (!probe) throw IoError("cannot open " + path.string());
  char first = 0;
  probe >> first;
  if (first == '{') {
    auto ck = load_checkpoint(path);
    auto names = ck.roi_names.empty() ? default_roi_names(ck.graph.nodes()) : ck.roi_names;
    return {ck.graph.matrix(), names};
  }
  auto m = csv::read_matrix(path);
  if (m.values.rows() != m.values.cols()) {
    throw ParseError(path.string() + ": adjacency must be square, got " + std::to_string(m.values.rows()) +
                     "x" + std::to_string(m.values.cols()));
  }
  auto names = m.names.empty() ? default_roi_names(static_cast<std::size_t>(m.values.rows())) : m.names;
  return {m.values, names};
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) { return seed + trial; }

}  // namespace

void write_trajectory(const fs::path& path, const std::vector<TrajectoryRow>& rows) {
  std::vector<csv::Row> out{{"epoch", "outer_k", "cross_entropy", "h", "eta", "c", "l1_norm"}};
  for (const auto& r : rows) {
    out.push_back({std::to_string(r.epoch), std::to_string(r.outer_k), csv::format(r.cross_entropy),
                   opt_cell(r.h), opt_cell(r.eta), opt_cell(r.c), csv::format(r.l1_norm)});
  }
  csv::write(path, out);
}

void cmd_gen_synthetic(const SyntheticSpec& spec, const fs::path& out, std::ostream& log) {
  spec.validate();
  auto syn = generate_synthetic(spec);
  make_dir(out);
  write_dataset(syn.dataset, out);
  const auto& names = syn.dataset.roi_names;
  write_edge_list(out / "ground_truth_edges.csv", syn.truth, names);
  csv::write_matrix(out / "ground_truth_A.csv", syn.truth, names);

  auto sidecar = nlohmann::json::parse(to_json(spec));
  nlohmann::json perturbed = nlohmann::json::array();
  for (const auto& e : syn.perturbed_edges) {
    perturbed.push_back({{"source", e.source}, {"target", e.target}, {"weight", e.weight}});
  }
  nlohmann::json doc = {{"spec", sidecar},
                        {"topological_order", syn.topological_order},
                        {"perturbed_edges", perturbed}};
  write_text(out / "spec.json", doc.dump(2));
  log << "spec: " << sidecar.dump() << '\n';
  log << "wrote " << syn.dataset.size() << " subjects, N=" << syn.dataset.nodes()
      << ", T=" << syn.dataset.length() << ", " << (syn.truth.array() != 0.0).count()
      << " ground-truth edges to " << out.string() << '\n';
}

TrainOutcome cmd_train(const RunConfig& cfg, const fs::path& manifest, const fs::path& out,
                       bool fixed_correlation, std::size_t jobs, std::ostream& log) {
  cfg.validate();
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  auto data = load_dataset(manifest);
  make_dir(out);
  echo_config(cfg, out, log);
  const auto fit_cfg = cfg.fit_config();

  Matrix correlation;
  if (fixed_correlation) {
    correlation = mean_correlation(data);
    correlation.diagonal().setZero();
  }

  const std::size_t trials = cfg.trials;
  std::vector<std::optional<FitResult>> results(trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mutex;
  auto worker = [&] {
    for (std::size_t t; (t = next++) < trials;) {
      try {
        const auto seed = trial_seed(cfg.seed, t);
        results[t] = fixed_correlation
                         ? fit_fixed_graph(data, correlation, fit_cfg, seed, cfg.fixed_graph_epochs)
                         : fit(data, fit_cfg, seed);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        next = trials;
      }
    }
  };
  if (std::min(jobs, trials) <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < std::min(jobs, trials); ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  TrainOutcome outcome;
  std::vector<Matrix> matrices;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto& r = *results[t];
    const std::string suffix = trials == 1 ? "" : "_trial_" + std::to_string(t + 1);
    Checkpoint ck{r.graph, r.params, data.roi_names, to_string(r.reason), to_json(cfg)};
    save_checkpoint(out / ("checkpoint" + suffix + ".json"), ck);
    write_trajectory(out / ("trajectory" + suffix + ".csv"), r.trajectory);
    matrices.push_back(r.graph.matrix());
    csv::write_matrix(out / ("A" + suffix + ".csv"), matrices.back(), data.roi_names);
    outcome.reasons.push_back(r.reason);

    log << "trial " << t + 1 << ": " << to_string(r.reason) << ", epochs " << r.trajectory.size();
    if (!fixed_correlation) {
      log << ", outer iterations " << r.state.k << ", h " << csv::format(acyclicity(r.graph))
          << ", |A|_1 " << csv::format(l1_norm(matrices.back()));
    }
    if (!r.trajectory.empty()) log << ", final CE " << csv::format(r.trajectory.back().cross_entropy);
    log << '\n';
  }
  if (trials > 1) {
    outcome.adjacency = average_runs(matrices);
    csv::write_matrix(out / "A_mean.csv", outcome.adjacency, data.roi_names);
  } else {
    outcome.adjacency = matrices.front();
  }
  return outcome;
}

ExtractedDag cmd_extract(const RunConfig& cfg, const fs::path& input, const fs::path& out,
                         std::ostream& log) {
  if (!(cfg.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  auto a = load_adjacency(input);
  make_dir(out);
  echo_config(cfg, out, log);
  auto result = extract_dag(a.values, cfg.epsilon);
  write_edge_list(out / "edges.csv", result, a.names);
  csv::write_matrix(out / "A_dag.csv", result.dag, a.names);
  csv::write_matrix(out / "residual.csv", result.residual, a.names);
  log << "epsilon " << csv::format(cfg.epsilon) << ": kept " << result.kept_count()
      << ", threshold_removed " << result.removed_count(RemovalReason::kThreshold)
      << ", cycle_removed " << result.removed_count(RemovalReason::kCycle) << '\n';
  return result;
}

MetricsReport cmd_evaluate(const RunConfig& cfg, const fs::path& manifest,
                           const std::optional<fs::path>& checkpoint, const fs::path& out,
                           std::size_t jobs, std::ostream& log) {
  cfg.validate();
  auto data = load_dataset(manifest);
  MetricsReport report;
  if (checkpoint) {
    auto ck = load_checkpoint(*checkpoint);
    if (ck.graph.nodes() != data.nodes()) {
      throw DataError("checkpoint expects N=" + std::to_string(ck.graph.nodes()) +
                      " ROIs but the dataset has N=" + std::to_string(data.nodes()));
    }
    make_dir(out);
    echo_config(cfg, out, log);
    report.eval_seed = cfg.seed;
    report.voters = cfg.voters;
    report.window = cfg.window;
    report.folds.push_back(evaluate_holdout(ck.graph, ck.params, data, cfg.voters, cfg.window, cfg.seed));
    report.aggregate();
  } else {
    make_dir(out);
    echo_config(cfg, out, log);
    report = cross_validate(data, cfg.fit_config(), cfg.eval_options(jobs));
  }
  write_text(out / "metrics.json", to_json(report));
  auto show = [&](const char* name, const Summary& s) {
    log << name << ' ' << (s.mean ? csv::format(*s.mean) : "undefined");
    if (s.count > 1 && s.std) log << " +- " << csv::format(*s.std);
    log << '\n';
  };
  log << report.folds.size() << " evaluation(s), positive label 1\n";
  show("ACC", report.accuracy);
  show("SEN", report.sensitivity);
  show("SPE", report.specificity);
  show("AUC", report.auc);
  return report;
}

GroupDifference cmd_compare_groups(const RunConfig& cfg, const fs::path& group1,
                                   const fs::path& group2, const fs::path& out, std::ostream& log) {
  auto a = load_adjacency(group1);
  auto b = load_adjacency(group2);
  if (a.values.rows() != b.values.rows()) {
    throw DataError("group matrices differ in size: " + std::to_string(a.values.rows()) + " vs " +
                    std::to_string(b.values.rows()) + " ROIs");
  }
  for (std::size_t i = 0; i < a.names.size(); ++i) {
    if (a.names[i] != b.names[i]) {
      throw DataError("ROI names differ at index " + std::to_string(i) + ": '" + a.names[i] +
                      "' in " + group1.string() + " vs '" + b.names[i] + "' in " + group2.string());
    }
  }
  make_dir(out);
  echo_config(cfg, out, log);
  auto diff = group_difference(a.values, b.values);
  write_node_differences(out / "node_differences.csv", diff, a.names, cfg.top_k);
  write_edge_differences(out / "edge_differences.csv", diff, a.names, cfg.top_k);
  log << "top nodes:";
  for (auto i : diff.top_nodes(std::min<std::size_t>(cfg.top_k, 5))) log << ' ' << a.names[i];
  log << '\n';
  return diff;
}

}  // namespace stdagcn
