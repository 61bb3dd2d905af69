#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "qot/metrics.hpp"

namespace py = pybind11;
using namespace qot;

PYBIND11_MODULE(_core, m) {
    m.doc() = "QoT estimation pipeline: simulation, labeling, graph encoding, classification";

    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ValueError>(m, "ValueError", PyExc_ValueError);

    py::class_<Topology>(m, "Topology")
        .def_static("parse_file", &Topology::parse_file, py::arg("path"))
        .def_static("parse_string", &Topology::parse_string, py::arg("text"))
        .def_property_readonly("node_count", &Topology::node_count)
        .def_property_readonly("link_count", &Topology::link_count)
        .def_property_readonly("cores", &Topology::cores)
        .def_property_readonly("slots", &Topology::slots)
        .def_property_readonly("connection_count", &Topology::connection_count)
        .def("connection_index",
             py::overload_cast<const std::string&, const std::string&>(&Topology::connection_index,
                                                                       py::const_),
             py::arg("u"), py::arg("v"))
        .def("fingerprint", &Topology::fingerprint)
        .def("__repr__", [](const Topology& t) {
            std::ostringstream os;
            os << "Topology(nodes=" << t.node_count() << ", links=" << t.link_count()
               << ", cores=" << t.cores() << ", slots=" << t.slots() << ")";
            return os.str();
        });

    py::class_<TrafficConfig>(m, "TrafficConfig")
        .def(py::init<>())
        .def_readwrite("load_erlangs", &TrafficConfig::load_erlangs)
        .def_readwrite("mean_holding", &TrafficConfig::mean_holding)
        .def_readwrite("request_count", &TrafficConfig::request_count)
        .def_readwrite("seed", &TrafficConfig::seed);

    py::class_<OracleConfig>(m, "OracleConfig")
        .def(py::init<>())
        .def_readwrite("launch_power_dbm", &OracleConfig::launch_power_dbm)
        .def_readwrite("edfa_noise_figure_db", &OracleConfig::edfa_noise_figure_db)
        .def_readwrite("span_loss_db_per_km", &OracleConfig::span_loss_db_per_km)
        .def_readwrite("xt_coupling_h_per_km", &OracleConfig::xt_coupling_h_per_km)
        .def_readwrite("ber_threshold", &OracleConfig::ber_threshold)
        .def_static("read_file", &OracleConfig::read_file, py::arg("path"))
        .def("write_file", [](const OracleConfig& cfg, const std::string& path) {
            std::ofstream out(path);
            if (!out) throw ParseError("cannot open '" + path + "' for writing");
            cfg.write(out);
        });

    py::class_<CalibrationResult>(m, "CalibrationResult")
        .def_readonly("h_per_km", &CalibrationResult::h_per_km)
        .def_readonly("infeasible_fraction", &CalibrationResult::infeasible_fraction)
        .def_readonly("pilot_requests", &CalibrationResult::pilot_requests);

    m.def(
        "calibrate",
        [](const OracleConfig& cfg, const Topology& topo, const TrafficConfig& traffic) {
            return calibrate(cfg, topo, traffic);
        },
        py::arg("oracle"), py::arg("topology"), py::arg("traffic"),
        py::call_guard<py::gil_scoped_release>());

    py::class_<Pattern>(m, "Pattern")
        .def_readonly("request_id", &Pattern::request_id)
        .def_readonly("label", &Pattern::label)
        .def_readonly("active", &Pattern::active)
        .def_readonly("features", &Pattern::features)
        .def_readonly("edges", &Pattern::edges)
        .def_property_readonly("active_count", &Pattern::active_count);

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("n", &Dataset::n)
        .def_readonly("patterns", &Dataset::patterns)
        .def_readonly("topology_fingerprint", &Dataset::topology_fingerprint)
        .def_readonly("config_fingerprint", &Dataset::config_fingerprint)
        .def("label_counts", &Dataset::label_counts)
        .def("__len__", [](const Dataset& d) { return d.patterns.size(); })
        .def_static("read_file", &read_dataset_file, py::arg("path"))
        .def("write_file",
             [](const Dataset& d, const std::string& path) { write_dataset_file(path, d); },
             py::arg("path"));

    m.def(
        "generate",
        [](const Topology& topo, const TrafficConfig& traffic, const OracleConfig& oracle) {
            GenerationResult r = run_generation(topo, traffic, oracle);
            return py::make_tuple(std::move(r.dataset), r.arrivals, r.blocked, r.admitted,
                                  r.rejected_qot);
        },
        py::arg("topology"), py::arg("traffic"), py::arg("oracle"),
        "Run the simulation and return (dataset, arrivals, blocked, admitted, rejected_qot)");

    m.def("balance", &balance, py::arg("dataset"), py::arg("per_class"), py::arg("seed"));

    py::class_<DgcnnConfig>(m, "DgcnnConfig")
        .def(py::init<>())
        .def_readwrite("conv_channels", &DgcnnConfig::conv_channels)
        .def_readwrite("sortpool_k", &DgcnnConfig::sortpool_k)
        .def_readwrite("learning_rate", &DgcnnConfig::learning_rate)
        .def_readwrite("batch_size", &DgcnnConfig::batch_size)
        .def_readwrite("max_epochs", &DgcnnConfig::max_epochs)
        .def_readwrite("patience", &DgcnnConfig::patience)
        .def_readwrite("dropout_rate", &DgcnnConfig::dropout_rate)
        .def_readwrite("seed", &DgcnnConfig::seed);

    py::class_<DgcnnModel>(m, "DgcnnModel")
        .def_readonly("n", &DgcnnModel::n)
        .def_readonly("k", &DgcnnModel::k)
        .def_static("read_file", &read_model_file, py::arg("path"))
        .def("write_file",
             [](const DgcnnModel& model, const std::string& path) { write_model_file(path, model); },
             py::arg("path"))
        .def("score", [](const DgcnnModel& model, const Pattern& p) { return forward(model, p); },
             py::arg("pattern"))
        .def(
            "classify",
            [](const DgcnnModel& model, const Pattern& p, double threshold) {
                return classify_state(model, p, threshold) == Decision::Feasible;
            },
            py::arg("pattern"), py::arg("threshold") = 0.5);

    py::class_<EpochStats>(m, "EpochStats")
        .def_readonly("epoch", &EpochStats::epoch)
        .def_readonly("loss", &EpochStats::loss)
        .def_readonly("train_acc", &EpochStats::train_acc)
        .def_readonly("val_acc", &EpochStats::val_acc);

    m.def(
        "train",
        [](const Dataset& dataset, const DgcnnConfig& config) {
            TrainResult r = train(dataset, config);
            return std::make_pair(std::move(r.model), std::move(r.history));
        },
        py::arg("dataset"), py::arg("config") = DgcnnConfig{},
        py::call_guard<py::gil_scoped_release>(),
        "Train on the full dataset; returns (model, history)");

    py::class_<FoldReport>(m, "FoldReport")
        .def_readonly("fold", &FoldReport::fold)
        .def_readonly("acc", &FoldReport::acc)
        .def_readonly("auc", &FoldReport::auc)
        .def_readonly("scores", &FoldReport::scores)
        .def_readonly("labels", &FoldReport::labels);

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("folds", &EvalReport::folds)
        .def_readonly("mean_acc", &EvalReport::mean_acc)
        .def_readonly("mean_auc", &EvalReport::mean_auc)
        .def_readonly("pooled_acc", &EvalReport::pooled_acc)
        .def_readonly("pooled_auc", &EvalReport::pooled_auc)
        .def_readonly("total_seconds", &EvalReport::total_seconds);

    m.def("cross_validate", &cross_validate, py::arg("dataset"), py::arg("folds"),
          py::arg("config") = DgcnnConfig{}, py::arg("threads") = 1,
          py::call_guard<py::gil_scoped_release>());

    m.def("accuracy", &accuracy, py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);
    m.def("auc_roc", &auc_roc, py::arg("scores"), py::arg("labels"));
}
