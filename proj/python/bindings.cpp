#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <iostream>
#include <sstream>

#include "stdagcn/commands.hpp"
#include "stdagcn/dag_extraction.hpp"
#include "stdagcn/dag_learning.hpp"
#include "stdagcn/error.hpp"
#include "stdagcn/evaluation.hpp"
#include "stdagcn/run_config.hpp"

namespace py = pybind11;
using namespace stdagcn;

namespace {

// Options arrive as a dict of plain Python values and go through the same
// key=value parser as config files, so validation is shared with the CLI.
template <typename T>
T with_options(T base, const py::dict& options) {
  for (auto [key, value] : options) {
    set_option(base, py::str(key).cast<std::string>(), py::str(value).cast<std::string>());
  }
  return base;
}

py::object opt(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

py::dict trajectory_row(const TrajectoryRow& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["outer_k"] = r.outer_k;
  d["cross_entropy"] = r.cross_entropy;
  d["h"] = opt(r.h);
  d["eta"] = opt(r.eta);
  d["c"] = opt(r.c);
  d["l1_norm"] = r.l1_norm;
  return d;
}

py::dict metrics_dict(const ConfusionMetrics& m) {
  py::dict d;
  d["accuracy"] = opt(m.accuracy);
  d["sensitivity"] = opt(m.sensitivity);
  d["specificity"] = opt(m.specificity);
  d["tp"] = m.counts.tp;
  d["fn"] = m.counts.fn;
  d["tn"] = m.counts.tn;
  d["fp"] = m.counts.fp;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spatio-temporal DAG convolutional network for brain time series";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<DataError>(m, "DataError", base);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<UsageError>(m, "UsageError", base);
  py::register_exception<ContractError>(m, "ContractError", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<DivergenceError>(m, "DivergenceError", base);

  // Graph constraint and sparsity.
  m.def("acyclicity", py::overload_cast<const Matrix&>(&acyclicity), py::arg("adjacency"));
  m.def("acyclicity_grad", py::overload_cast<const Matrix&>(&acyclicity_grad), py::arg("adjacency"));
  m.def("l1_norm", &l1_norm, py::arg("adjacency"));

  // Data.
  py::class_<SubjectRecord>(m, "SubjectRecord")
      .def_readonly("subject_id", &SubjectRecord::subject_id)
      .def_readonly("label", &SubjectRecord::label)
      .def_readonly("series", &SubjectRecord::series);
  py::class_<TimeSeriesDataset>(m, "TimeSeriesDataset")
      .def_readonly("records", &TimeSeriesDataset::records)
      .def_readonly("roi_names", &TimeSeriesDataset::roi_names)
      .def_property_readonly("nodes", &TimeSeriesDataset::nodes)
      .def_property_readonly("length", &TimeSeriesDataset::length)
      .def("labels", &TimeSeriesDataset::labels)
      .def("__len__", &TimeSeriesDataset::size);
  m.def("load_dataset", &load_dataset, py::arg("manifest"));
  m.def("write_dataset", &write_dataset, py::arg("dataset"), py::arg("directory"));
  m.def("mean_correlation", &mean_correlation, py::arg("dataset"));

  py::class_<SyntheticData>(m, "SyntheticData")
      .def_readonly("dataset", &SyntheticData::dataset)
      .def_readonly("truth", &SyntheticData::truth)
      .def_readonly("topological_order", &SyntheticData::topological_order)
      .def_property_readonly("perturbed_edges", [](const SyntheticData& s) {
        py::list out;
        for (const auto& e : s.perturbed_edges) out.append(py::make_tuple(e.source, e.target, e.weight));
        return out;
      });
  m.def(
      "generate_synthetic",
      [](const py::kwargs& params) { return generate_synthetic(with_options(SyntheticSpec{}, params)); },
      "Simulates a two-class cohort from a linear SEM; keyword arguments override spec fields.");

  // Training.
  py::class_<FitResult>(m, "FitResult")
      .def_property_readonly("adjacency", [](const FitResult& r) { return r.graph.matrix(); })
      .def_property_readonly("termination", [](const FitResult& r) { return to_string(r.reason); })
      .def_property_readonly("outer_iterations", [](const FitResult& r) { return r.state.k; })
      .def_property_readonly("eta", [](const FitResult& r) { return r.state.eta; })
      .def_property_readonly("c", [](const FitResult& r) { return r.state.c; })
      .def_property_readonly("trajectory", [](const FitResult& r) {
        py::list out;
        for (const auto& row : r.trajectory) out.append(trajectory_row(row));
        return out;
      });
  m.def(
      "fit",
      [](const TimeSeriesDataset& data, std::uint64_t seed, const py::kwargs& config) {
        auto cfg = with_options(RunConfig{}, config);
        cfg.validate();
        py::gil_scoped_release release;
        return fit(data, cfg.fit_config(), seed);
      },
      py::arg("dataset"), py::arg("seed") = 0,
      "Learns the graph and network jointly; keyword arguments override run-config fields.");
  m.def(
      "fit_fixed_graph",
      [](const TimeSeriesDataset& data, const Matrix& graph, std::size_t epochs, std::uint64_t seed,
         const py::kwargs& config) {
        auto cfg = with_options(RunConfig{}, config);
        cfg.validate();
        py::gil_scoped_release release;
        return fit_fixed_graph(data, graph, cfg.fit_config(), seed, epochs);
      },
      py::arg("dataset"), py::arg("graph"), py::arg("epochs"), py::arg("seed") = 0);

  // DAG extraction.
  m.def("threshold_graph", &threshold_graph, py::arg("adjacency"), py::arg("epsilon"));
  m.def("is_acyclic", &is_acyclic, py::arg("adjacency"));
  m.def(
      "find_cycle",
      [](const Matrix& a) -> py::object {
        auto cycle = find_cycle(a);
        if (!cycle) return py::none();
        py::list out;
        for (const auto& e : *cycle) out.append(py::make_tuple(e.source, e.target));
        return out;
      },
      py::arg("adjacency"));
  m.def(
      "extract_dag",
      [](const Matrix& a, double epsilon) {
        auto r = extract_dag(a, epsilon);
        py::list removed;
        for (const auto& e : r.removed_edges) {
          removed.append(py::make_tuple(e.source, e.target, e.weight,
                                        e.reason == RemovalReason::kCycle ? "cycle" : "threshold"));
        }
        py::dict d;
        d["dag"] = r.dag;
        d["residual"] = r.residual;
        d["removed_edges"] = removed;
        return d;
      },
      py::arg("adjacency"), py::arg("epsilon") = 0.015);

  // Evaluation.
  m.def(
      "confusion_metrics",
      [](const std::vector<int>& predicted, const std::vector<int>& truth) {
        return metrics_dict(confusion_metrics(predicted, truth));
      },
      py::arg("predicted"), py::arg("truth"));
  m.def(
      "roc_auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return opt(roc_auc(scores, labels));
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "group_difference",
      [](const Matrix& a1, const Matrix& a2) {
        auto g = group_difference(a1, a2);
        py::dict d;
        d["edge_diff"] = g.edge_diff;
        d["node_diff"] = g.node_diff;
        d["node_ranking"] = g.node_ranking;
        return d;
      },
      py::arg("group1"), py::arg("group2"));
  m.def(
      "structure_metrics",
      [](const Matrix& learned, const Matrix& truth, double epsilon) {
        auto s = structure_metrics(learned, truth, epsilon);
        py::dict d;
        d["precision"] = opt(s.precision);
        d["recall"] = opt(s.recall);
        d["f1"] = opt(s.f1);
        d["shd"] = s.shd;
        return d;
      },
      py::arg("learned"), py::arg("truth"), py::arg("epsilon") = 0.015);

  // CLI-equivalent commands; each writes its artifacts under `out`.
  m.def(
      "run_gen_synthetic",
      [](const std::filesystem::path& out, const py::kwargs& params) {
        std::ostringstream log;
        cmd_gen_synthetic(with_options(SyntheticSpec{}, params), out, log);
        return log.str();
      },
      py::arg("out"));
  m.def(
      "run_train",
      [](const std::filesystem::path& manifest, const std::filesystem::path& out, bool fixed_correlation,
         std::size_t jobs, const py::kwargs& config) {
        auto cfg = with_options(RunConfig{}, config);
        std::ostringstream log;
        py::gil_scoped_release release;
        cmd_train(cfg, manifest, out, fixed_correlation, jobs, log);
        return log.str();
      },
      py::arg("manifest"), py::arg("out"), py::arg("fixed_correlation") = false, py::arg("jobs") = 1);
  m.def(
      "run_extract_dag",
      [](const std::filesystem::path& input, const std::filesystem::path& out, const py::kwargs& config) {
        std::ostringstream log;
        cmd_extract(with_options(RunConfig{}, config), input, out, log);
        return log.str();
      },
      py::arg("input"), py::arg("out"));
  m.def(
      "run_evaluate",
      [](const std::filesystem::path& manifest, const std::filesystem::path& out,
         const std::optional<std::filesystem::path>& checkpoint, std::size_t jobs, const py::kwargs& config) {
        auto cfg = with_options(RunConfig{}, config);
        std::ostringstream log;
        py::gil_scoped_release release;
        auto report = cmd_evaluate(cfg, manifest, checkpoint, out, jobs, log);
        return to_json(report);
      },
      py::arg("manifest"), py::arg("out"), py::arg("checkpoint") = py::none(), py::arg("jobs") = 1,
      "Returns the metrics report as a JSON string.");
  m.def(
      "run_compare_groups",
      [](const std::filesystem::path& g1, const std::filesystem::path& g2, const std::filesystem::path& out,
         const py::kwargs& config) {
        std::ostringstream log;
        cmd_compare_groups(with_options(RunConfig{}, config), g1, g2, out, log);
        return log.str();
      },
      py::arg("group1"), py::arg("group2"), py::arg("out"));
}
