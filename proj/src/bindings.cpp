#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "skan/basis.hpp"
#include "skan/bench.hpp"
#include "skan/checkpoint.hpp"
#include "skan/datasets.hpp"
#include "skan/suite.hpp"
#include "skan/training.hpp"

namespace py = pybind11;
using namespace skan;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor::from(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    Array out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

std::vector<double> flat(const Array& a) { return {a.data(), a.data() + a.size()}; }

Dataset make_regression(const Array& x, const Array& y) {
    if (x.ndim() < 2) throw ContractError("regression dataset: inputs need a leading batch axis");
    Dataset d;
    d.item_shape.assign(x.shape() + 1, x.shape() + x.ndim());
    d.inputs = flat(x);
    d.targets = flat(y);
    const auto n = static_cast<std::size_t>(x.shape(0));
    d.target_dim = n == 0 ? 1 : d.targets.size() / n;
    d.check();
    return d;
}

Dataset make_classification(const Array& x, const std::vector<int>& labels, std::size_t num_classes) {
    if (x.ndim() < 2) throw ContractError("classification dataset: inputs need a leading batch axis");
    Dataset d;
    d.item_shape.assign(x.shape() + 1, x.shape() + x.ndim());
    d.inputs = flat(x);
    d.labels = labels;
    d.num_classes = num_classes;
    d.check();
    return d;
}

std::vector<BasisDescriptor> pool_or_default(const std::optional<std::vector<BasisDescriptor>>& pool) {
    return pool ? *pool : default_pool();
}

py::dict row_dict(const ResultRow& r) {
    py::dict d;
    d["task"] = r.task;
    d["target"] = r.target;
    d["method"] = r.method;
    d["head"] = r.head;
    d["seed"] = r.seed;
    d["metric_name"] = r.metric_name;
    d["metric"] = r.metric;
    d["params"] = r.params;
    d["wall_seconds"] = r.wall_seconds;
    d["config_hash"] = r.config_hash;
    d["pretrain_epochs"] = r.pretrain_epochs;
    d["final_epochs"] = r.final_epochs;
    d["checkpoint"] = r.checkpoint;
    d["selection"] = r.selection;
    d["status"] = r.status;
    d["error"] = r.error;
    return d;
}

}  // namespace

PYBIND11_MODULE(_skan, m) {
    m.doc() = "Selectable KAN core";

    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
    py::register_exception<TrainingAborted>(m, "TrainingAborted", PyExc_RuntimeError);

    // Basis functions
    py::enum_<BasisKind>(m, "BasisKind")
        .value("BSpline", BasisKind::BSpline)
        .value("RBF", BasisKind::RBF)
        .value("FastKAN", BasisKind::FastKAN)
        .value("FasterKAN", BasisKind::FasterKAN)
        .value("Chebyshev", BasisKind::Chebyshev)
        .value("Gram", BasisKind::Gram)
        .value("Jacobi", BasisKind::Jacobi)
        .value("Bernstein", BasisKind::Bernstein)
        .value("WaveletMexicanHat", BasisKind::WaveletMexicanHat)
        .value("WaveletDoG", BasisKind::WaveletDoG)
        .value("WaveletShannon", BasisKind::WaveletShannon)
        .value("ReLUKAN", BasisKind::ReLUKAN)
        .value("BottleneckGram", BasisKind::BottleneckGram)
        .value("Linear", BasisKind::Linear);

    py::class_<BasisDescriptor>(m, "BasisDescriptor")
        .def(py::init([](const std::string& kind) { return default_descriptor(parse_kind(kind)); }), py::arg("kind"))
        .def_readwrite("kind", &BasisDescriptor::kind)
        .def_readwrite("degree_or_grid", &BasisDescriptor::degree_or_grid)
        .def_readwrite("lo", &BasisDescriptor::lo)
        .def_readwrite("hi", &BasisDescriptor::hi)
        .def_readwrite("hyperparams", &BasisDescriptor::hyperparams)
        .def_property_readonly("label", &BasisDescriptor::label)
        .def_property_readonly("param_count", [](const BasisDescriptor& d) { return param_count(d); })
        .def("__eq__", [](const BasisDescriptor& a, const BasisDescriptor& b) { return a == b; })
        .def("__repr__", [](const BasisDescriptor& d) { return "<BasisDescriptor " + d.label() + ">"; });

    m.def("default_pool", &default_pool);
    m.def("base_pool", &base_pool);
    m.def(
        "eval_basis",
        [](const BasisDescriptor& d, const Array& params, const Array& x) {
            validate(d);
            if (static_cast<std::size_t>(params.size()) != param_count(d))
                throw ContractError("eval_basis: " + d.label() + " takes " + std::to_string(param_count(d)) +
                                    " parameters, got " + std::to_string(params.size()));
            EdgeFunction f{d, Tensor::from({param_count(d)}, flat(params))};
            NoGradGuard guard;
            return to_array(eval_edge(f, to_tensor(x)));
        },
        py::arg("descriptor"), py::arg("params"), py::arg("x"), "Evaluates one edge function elementwise.");

    // Datasets
    py::class_<Dataset>(m, "Dataset")
        .def_static("regression", &make_regression, py::arg("inputs"), py::arg("targets"))
        .def_static("classification", &make_classification, py::arg("inputs"), py::arg("labels"),
                    py::arg("num_classes"))
        .def("__len__", &Dataset::size)
        .def_property_readonly("item_shape", [](const Dataset& d) { return d.item_shape; })
        .def_property_readonly("num_classes", [](const Dataset& d) { return d.num_classes; })
        .def_property_readonly("inputs",
                               [](const Dataset& d) {
                                   Shape s{d.size()};
                                   s.insert(s.end(), d.item_shape.begin(), d.item_shape.end());
                                   return to_array(Tensor::from(s, d.inputs));
                               })
        .def_property_readonly("targets", [](const Dataset& d) { return d.targets; })
        .def_property_readonly("labels", [](const Dataset& d) { return d.labels; });

    m.def("fit_functions", [] {
        std::vector<std::tuple<std::string, std::string, std::size_t>> out;
        for (const auto& f : fit_functions()) out.emplace_back(std::string(f.key), std::string(f.formula), f.arity);
        return out;
    });
    m.def(
        "eval_fit_function",
        [](const std::string& key, const std::vector<double>& x) { return eval_fit_function(parse_fit_function(key), x); },
        py::arg("key"), py::arg("x"));
    m.def(
        "gen_fit_dataset",
        [](const std::string& key, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
            return gen_fit_dataset(parse_fit_function(key), n_train, n_test, seed);
        },
        py::arg("key"), py::arg("n_train") = 3000, py::arg("n_test") = 1000, py::arg("seed") = 0);
    m.def(
        "load_image_set",
        [](const std::string& name, const std::filesystem::path& dir) {
            auto s = load_image_set(parse_image_set(name), dir);
            return std::make_pair(std::move(s.train), std::move(s.test));
        },
        py::arg("name"), py::arg("data_dir"));
    m.def(
        "subsample",
        [](const Dataset& d, double fraction, const std::string& strategy) {
            return subsample(d, fraction, parse_sampling(strategy));
        },
        py::arg("data"), py::arg("fraction"), py::arg("strategy"));

    // Models
    py::class_<Model>(m, "Model")
        .def(
            "forward",
            [](const Model& model, const Array& x) {
                NoGradGuard guard;
                return to_array(model.forward(to_tensor(x)));
            },
            py::arg("x"))
        .def("__call__",
             [](const Model& model, const Array& x) {
                 NoGradGuard guard;
                 return to_array(model.forward(to_tensor(x)));
             })
        .def("__len__", &Model::size)
        .def_property_readonly("param_count", [](const Model& model) { return count_params(model); })
        .def_property_readonly("has_selectable", &Model::has_selectable)
        .def_property_readonly("fully_selected", &Model::fully_selected)
        .def_property_readonly("max_candidates", &Model::max_candidates)
        .def("prune",
             [](Model& model) {
                 py::list out;
                 for (const auto& lp : model.prune())
                     for (const auto& e : lp.report) {
                         py::dict d;
                         d["layer"] = lp.layer;
                         d["node"] = e.node;
                         d["removed_index"] = e.removed_index;
                         d["removed_family"] = e.removed_family;
                         d["removed_weight"] = e.removed_weight;
                         d["weights_after"] = e.weights_after;
                         out.append(d);
                     }
                 return out;
             })
        .def("collapse", &Model::collapse)
        .def("reinitialize", &Model::reinitialize, py::arg("seed"))
        .def("summary", &Model::summary)
        .def("copy", [](const Model& model) { return Model(model); })
        .def("save", [](const Model& model, const std::filesystem::path& p) { save_model(p, model); }, py::arg("path"));

    m.def("load_model", &load_model, py::arg("path"));
    m.def(
        "build_fit_model",
        [](const std::string& method, std::size_t arity, const std::optional<std::vector<BasisDescriptor>>& pool,
           std::uint64_t seed) { return build_fit_model(parse_method(method), arity, pool_or_default(pool), seed); },
        py::arg("method"), py::arg("arity"), py::arg("pool") = py::none(), py::arg("seed") = 0);
    m.def(
        "build_classifier",
        [](const std::string& dataset, const std::string& method, const std::string& head,
           const std::optional<std::vector<BasisDescriptor>>& pool, std::uint64_t seed) {
            ClassifierOptions o;
            o.head = parse_head(head);
            return build_classifier(parse_image_set(dataset), parse_method(method), o, pool_or_default(pool), seed);
        },
        py::arg("dataset"), py::arg("method"), py::arg("head") = "FC", py::arg("pool") = py::none(),
        py::arg("seed") = 0);

    // Training
    py::class_<TrainSchedule>(m, "TrainSchedule")
        .def(py::init<>())
        .def_static("fitting", &TrainSchedule::fitting)
        .def_static("classification", &TrainSchedule::classification, py::arg("dataset"))
        .def_readwrite("full_epochs_per_cycle", &TrainSchedule::full_epochs_per_cycle)
        .def_readwrite("select_epochs_per_cycle", &TrainSchedule::select_epochs_per_cycle)
        .def_readwrite("total_epochs", &TrainSchedule::total_epochs)
        .def_readwrite("final_epochs", &TrainSchedule::final_epochs)
        .def_readwrite("lr", &TrainSchedule::lr)
        .def_readwrite("pretrain_fraction", &TrainSchedule::pretrain_fraction)
        .def_property(
            "sampling", [](const TrainSchedule& s) { return std::string(sampling_name(s.sampling)); },
            [](TrainSchedule& s, const std::string& v) { s.sampling = parse_sampling(v); })
        .def_readwrite("reinit_after_selection", &TrainSchedule::reinit_after_selection)
        .def_readwrite("seed", &TrainSchedule::seed)
        .def_readwrite("batch_size", &TrainSchedule::batch_size)
        .def_readwrite("eval_every", &TrainSchedule::eval_every)
        .def("validate", &TrainSchedule::validate);

    py::class_<EpochMetrics>(m, "EpochMetrics")
        .def_readonly("epoch", &EpochMetrics::epoch)
        .def_readonly("train_loss", &EpochMetrics::train_loss)
        .def_readonly("test_metric", &EpochMetrics::test_metric)
        .def("__repr__", [](const EpochMetrics& e) {
            return "<EpochMetrics epoch=" + std::to_string(e.epoch) + " loss=" + std::to_string(e.train_loss) + ">";
        });

    py::class_<SelectionRecord>(m, "SelectionRecord")
        .def_readonly("pool_size", &SelectionRecord::pool_size)
        .def_readonly("cycles", &SelectionRecord::cycles)
        .def_readonly("pretrain_items", &SelectionRecord::pretrain_items)
        .def("table", &SelectionRecord::table)
        .def("families", &SelectionRecord::families);

    auto loss_kind = [](const Dataset& d) { return d.is_classification() ? LossKind::CrossEntropy : LossKind::MSE; };

    m.def(
        "train",
        [loss_kind](Model& model, const Dataset& train, const Dataset* test, int epochs, double lr,
                    std::size_t batch_size, std::uint64_t seed) {
            TrainOptions o;
            o.epochs = epochs;
            o.loss = loss_kind(train);
            o.adam.lr = lr;
            o.batch_size = batch_size;
            o.seed = seed;
            py::gil_scoped_release release;
            return train_full(model, train, test, o);
        },
        py::arg("model"), py::arg("train"), py::arg("test") = nullptr, py::arg("epochs"), py::arg("lr") = 1e-3,
        py::arg("batch_size") = 0, py::arg("seed") = 0);
    m.def(
        "evaluate", [](const Model& model, const Dataset& d) { return evaluate(model, d); }, py::arg("model"),
        py::arg("data"));
    m.def(
        "pretrain_select",
        [loss_kind](Model& model, const Dataset& data, const TrainSchedule& schedule) {
            py::gil_scoped_release release;
            auto r = pretrain_select(model, data, schedule, loss_kind(data));
            return std::make_tuple(std::move(r.record), std::move(r.curve), r.epochs);
        },
        py::arg("model"), py::arg("data"), py::arg("schedule"));
    m.def(
        "run_protocol",
        [loss_kind](Model& model, const Dataset& train, const Dataset& test, const TrainSchedule& schedule) {
            ProtocolResult r;
            {
                py::gil_scoped_release release;
                r = run_protocol(model, train, test, schedule, loss_kind(train));
            }
            py::dict out;
            out["selection"] = r.selection ? py::cast(*r.selection) : py::none();
            out["pretrain_curve"] = r.pretrain_curve;
            out["final_curve"] = r.final_curve;
            out["pretrain_epochs"] = r.pretrain_epochs;
            out["final_epochs"] = r.final_epochs;
            out["test_metric"] = r.test_metric;
            return out;
        },
        py::arg("model"), py::arg("train"), py::arg("test"), py::arg("schedule"));

    // Suites
    m.def(
        "run_suite",
        [](const std::filesystem::path& config, const std::optional<std::filesystem::path>& out_dir, bool desk,
           const std::optional<std::string>& task, const std::optional<std::string>& method,
           const std::optional<std::uint64_t>& seed) {
            auto cfg = load_suite_config(config);
            if (desk) apply_desk_scale(cfg);
            if (out_dir) cfg.out_dir = *out_dir;
            RunFilter f{task, method, seed};
            SuiteResult r;
            {
                py::gil_scoped_release release;
                r = run_suite(cfg, f);
            }
            py::list rows;
            for (const auto& row : r.rows) rows.append(row_dict(row));
            return rows;
        },
        py::arg("config"), py::arg("out_dir") = py::none(), py::arg("desk") = false, py::arg("task") = py::none(),
        py::arg("method") = py::none(), py::arg("seed") = py::none());
    m.def(
        "load_results",
        [](const std::filesystem::path& dir) {
            py::list rows;
            for (const auto& row : load_results(dir)) rows.append(row_dict(row));
            return rows;
        },
        py::arg("out_dir"));
}
