#include "ncood/baselines.hpp"
#include "ncood/collapse_lab.hpp"
#include "ncood/detectors.hpp"
#include "ncood/error.hpp"
#include "ncood/metrics.hpp"
#include "ncood/nc_scores.hpp"
#include "ncood/synth_geometry.hpp"
#include "ncood/tensor_store.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace ncood;

namespace {

template <typename T>
py::array to_array(const std::vector<std::uint64_t>& shape, std::span<const T> values) {
    std::vector<py::ssize_t> dims(shape.begin(), shape.end());
    py::array_t<T> out(dims);
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

py::array tensor_to_array(const Tensor& t) {
    switch (t.dtype()) {
        case DType::f32: return to_array(t.shape(), t.values<float>());
        case DType::f64: return to_array(t.shape(), t.values<double>());
        case DType::i64: return to_array(t.shape(), t.values<std::int64_t>());
    }
    throw ContractError("unknown dtype");
}

template <typename T>
Tensor typed_tensor(const py::array& a) {
    const auto c = py::array_t<T, py::array::c_style | py::array::forcecast>::ensure(a);
    std::vector<std::uint64_t> shape(c.shape(), c.shape() + c.ndim());
    return Tensor(std::move(shape), std::vector<T>(c.data(), c.data() + c.size()));
}

Tensor array_to_tensor(const py::array& a) {
    if (a.ndim() == 0) throw ContractError("tensors need at least one dimension");
    const auto kind = a.dtype().kind();
    if (kind == 'f') return a.dtype().itemsize() == 4 ? typed_tensor<float>(a) : typed_tensor<double>(a);
    if (kind == 'i' || kind == 'u' || kind == 'b') return typed_tensor<std::int64_t>(a);
    throw ContractError("unsupported array dtype '" + std::string(1, kind) + "'");
}

py::dict tensors_to_dict(const TensorMap& tensors) {
    py::dict d;
    for (const auto& [role, t] : tensors) d[py::str(role)] = tensor_to_array(t);
    return d;
}

FeatureSet make_feature_set(const Matrix& features, const std::optional<Labels>& labels) {
    return FeatureSet{features, labels, "python"};
}

py::dict feature_set_dict(const FeatureSet& fs) {
    py::dict d;
    d["features"] = fs.features;
    if (fs.labels) d["labels"] = *fs.labels;
    d["name"] = fs.name;
    return d;
}

DetectorParams detector_params(std::optional<double> alpha, const std::string& filter_norm, int k,
                               double react_percentile, double dice_sparsity, std::optional<double> ridge) {
    DetectorParams p;
    p.alpha = alpha;
    p.filter_norm = parse_filter_norm(filter_norm);
    p.k = k;
    p.react_percentile = react_percentile;
    p.dice_sparsity = dice_sparsity;
    p.ridge = ridge;
    return p;
}

py::dict nc_report_dict(const NcReport& r) {
    py::dict d;
    d["nc1"] = r.nc1;
    d["nc2_norm_spread"] = r.nc2_norm_spread;
    d["nc2_angle_gap"] = r.nc2_angle_gap;
    d["nc3_duality_gap"] = r.nc3_duality_gap;
    d["nc4_agreement"] = r.nc4_agreement;
    d["theorem1_alignment"] = r.theorem1_alignment;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Post-hoc OOD scoring from penultimate features and a linear head";

    auto base = py::register_exception<Error>(m, "NcoodError", PyExc_RuntimeError);
    py::register_exception<ContractError>(m, "ContractError", base.ptr());
    py::register_exception<FitError>(m, "FitError", base.ptr());
    auto format = py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<LengthError>(m, "LengthError", format.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<ConsistencyError>(m, "ConsistencyError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<GenerationError>(m, "GenerationError", base.ptr());

    // Tensors and bundles
    m.def("save_tensor", [](const py::array& a, const std::filesystem::path& p) { save_tensor(array_to_tensor(a), p); },
          py::arg("array"), py::arg("path"));
    m.def("load_tensor", [](const std::filesystem::path& p) { return tensor_to_array(load_tensor(p)); },
          py::arg("path"));
    m.def(
        "write_bundle",
        [](const std::filesystem::path& dir, const std::map<std::string, py::array>& arrays,
           const std::string& dataset_name, const std::map<std::string, std::string>& metadata) {
            TensorMap t;
            for (const auto& [role, a] : arrays) t.emplace(role, array_to_tensor(a));
            BundleManifest manifest = make_manifest(dataset_name, t);
            manifest.metadata = metadata;
            return write_bundle(manifest, t, dir);
        },
        py::arg("dir"), py::arg("tensors"), py::arg("dataset_name") = "", py::arg("metadata") = py::dict());
    m.def(
        "read_bundle",
        [](const std::filesystem::path& p) {
            const Bundle b = read_bundle(p);
            return py::make_tuple(tensors_to_dict(b.tensors), b.manifest.dataset_name, b.manifest.metadata);
        },
        py::arg("path"), "Returns (tensors, dataset_name, metadata).");

    // Model objects
    py::class_<ClassifierHead>(m, "ClassifierHead")
        .def(py::init<Matrix, Vector>(), py::arg("weights"), py::arg("bias"))
        .def_property_readonly("weights", &ClassifierHead::weights)
        .def_property_readonly("bias", &ClassifierHead::bias)
        .def_property_readonly("num_classes", &ClassifierHead::num_classes)
        .def_property_readonly("dim", &ClassifierHead::dim)
        .def("logits", [](const ClassifierHead& h, const Matrix& x) { return compute_logits(h, x); })
        .def("predict", [](const ClassifierHead& h, const Matrix& x) { return predict_classes(h, x); });

    py::class_<TrainStats>(m, "TrainStats")
        .def_readonly("mu_G", &TrainStats::mu_G)
        .def_readonly("class_means", &TrainStats::class_means)
        .def_readonly("class_counts", &TrainStats::class_counts)
        .def_readonly("sigma_W", &TrainStats::sigma_W)
        .def_readonly("lambda_c", &TrainStats::lambda_c)
        .def_readonly("mean_feature", &TrainStats::mean_feature);

    m.def(
        "compute_train_stats",
        [](const Matrix& features, const Labels& labels, const ClassifierHead& head) {
            return compute_train_stats(make_feature_set(features, labels), head);
        },
        py::arg("features"), py::arg("labels"), py::arg("head"));

    // Scores
    m.def("p_score", [](const Matrix& x, const TrainStats& s, const ClassifierHead& h) { return p_score(x, s, h); },
          py::arg("features"), py::arg("stats"), py::arg("head"));
    m.def(
        "nc_score",
        [](const Matrix& x, const TrainStats& s, const ClassifierHead& h, double alpha, const std::string& norm) {
            return nc_score(x, s, h, NcScoreConfig{alpha, parse_filter_norm(norm)});
        },
        py::arg("features"), py::arg("stats"), py::arg("head"), py::arg("alpha"), py::arg("filter_norm") = "L1");
    m.def("cos_score", [](const Matrix& x, const TrainStats& s, const ClassifierHead& h) { return cos_score(x, s, h); },
          py::arg("features"), py::arg("stats"), py::arg("head"));
    m.def("dist_score", &dist_score, py::arg("features"), py::arg("stats"), py::arg("head"));
    m.def("msp_score", &msp_score, py::arg("logits"));
    m.def("energy_score", &energy_score, py::arg("logits"));
    m.def(
        "knn_score", [](const Matrix& x, const Matrix& train, int k) { return knn_score(x, KnnIndex(train, k)); },
        py::arg("features"), py::arg("train_features"), py::arg("k") = kDefaultKnnK);

    m.def("detector_names", &detector_names);
    m.def(
        "score",
        [](const std::string& detector, const ClassifierHead& head, const TrainStats& stats, const Matrix& features,
           const std::optional<Matrix>& train_features, const std::optional<Labels>& train_labels,
           std::optional<double> alpha, const std::string& filter_norm, int k, double react_percentile,
           double dice_sparsity, std::optional<double> ridge) {
            std::optional<FeatureSet> train;
            if (train_features) train = make_feature_set(*train_features, train_labels);
            const auto params = detector_params(alpha, filter_norm, k, react_percentile, dice_sparsity, ridge);
            const ScoreResult r = run_detector(detector, params, head, stats, train ? &*train : nullptr, features);
            return py::make_tuple(r.scores, r.predicted);
        },
        py::arg("detector"), py::arg("head"), py::arg("stats"), py::arg("features"),
        py::arg("train_features") = py::none(), py::arg("train_labels") = py::none(), py::arg("alpha") = py::none(),
        py::arg("filter_norm") = "L1", py::arg("k") = kDefaultKnnK, py::arg("react_percentile") = 90.0,
        py::arg("dice_sparsity") = kDiceSparsityCifar, py::arg("ridge") = py::none(),
        "Runs a named detector; returns (scores, predicted_classes).");

    m.def(
        "sweep_alpha",
        [](const TrainStats& stats, const ClassifierHead& head, const Matrix& id_val, const Matrix& noise_val,
           const std::vector<double>& grid, const std::string& norm) {
            const AlphaSweep s = sweep_alpha(stats, head, id_val, noise_val, grid, parse_filter_norm(norm));
            std::vector<std::pair<double, double>> rows;
            for (const auto& r : s.rows) rows.emplace_back(r.alpha, r.auroc);
            return py::make_tuple(s.best_alpha, rows);
        },
        py::arg("stats"), py::arg("head"), py::arg("id_val"), py::arg("noise_val"),
        py::arg("grid") = kDefaultAlphaGrid, py::arg("filter_norm") = "L1",
        "Returns (best_alpha, [(alpha, auroc), ...]).");

    // Metrics
    m.def(
        "auroc", [](const std::vector<double>& id, const std::vector<double>& ood) { return auroc(id, ood); },
        py::arg("id_scores"), py::arg("ood_scores"));
    m.def(
        "fpr_at_tpr",
        [](const std::vector<double>& id, const std::vector<double>& ood, double target) {
            return fpr_at_tpr(id, ood, target);
        },
        py::arg("id_scores"), py::arg("ood_scores"), py::arg("tpr_target") = 0.95);

    // Synthetic geometry
    m.def(
        "simplex_etf", [](int c, int d, double norm) { return simplex_etf(c, d, norm).vectors; }, py::arg("classes"),
        py::arg("dim"), py::arg("norm") = 1.0);
    m.def(
        "make_synth_world",
        [](int classes, int dim, int n_per_class, double scale, double noise_sigma, const std::string& ood_mode,
           int n_ood, std::uint64_t seed, int n_eval_per_class) {
            SynthSpec spec;
            spec.classes = classes;
            spec.dim = dim;
            spec.n_per_class = n_per_class;
            spec.scale = scale;
            spec.noise_sigma = noise_sigma;
            spec.ood_mode = parse_ood_mode(ood_mode);
            spec.n_ood = n_ood;
            spec.seed = seed;
            const SynthWorld w = make_synth_world(spec, n_eval_per_class);
            py::dict d;
            d["head"] = w.train.head;
            d["train"] = feature_set_dict(w.train.train);
            d["id_test"] = feature_set_dict(w.id_test);
            d["id_val"] = feature_set_dict(w.id_val);
            d["ood_test"] = feature_set_dict(w.ood_test);
            d["noise_val"] = feature_set_dict(w.noise_val);
            return d;
        },
        py::arg("classes") = 10, py::arg("dim") = 32, py::arg("n_per_class") = 100, py::arg("scale") = 5.0,
        py::arg("noise_sigma") = 0.5, py::arg("ood_mode") = "near_origin", py::arg("n_ood") = 1000,
        py::arg("seed") = 7, py::arg("n_eval_per_class") = 100);

    // Collapse lab
    m.def(
        "nc_metrics",
        [](const Matrix& features, const Labels& labels, const ClassifierHead& head) {
            return nc_report_dict(nc_metrics(features, labels, head));
        },
        py::arg("features"), py::arg("labels"), py::arg("head"));
    m.def(
        "collapse_run",
        [](int epochs, double lr, double weight_decay, std::vector<int> widths, const std::string& activation,
           std::uint64_t seed) {
            MlpConfig cfg;
            cfg.epochs = epochs;
            cfg.lr_schedule = {{0, lr}};
            cfg.weight_decay = weight_decay;
            cfg.layer_widths = std::move(widths);
            cfg.activation = parse_activation(activation);
            cfg.seed = seed;
            BlobsSpec blobs;
            blobs.input_dim = cfg.layer_widths.front();
            blobs.seed = seed;
            TrainTrace trace_out;
            {
                py::gil_scoped_release release;
                trace_out = train_mlp(cfg, make_blobs(blobs)).trace;
            }
            py::list trace;
            for (const auto& rec : trace_out.records) {
                py::dict d = nc_report_dict(rec.nc);
                d["epoch"] = rec.epoch;
                d["train_loss"] = rec.train_loss;
                d["train_accuracy"] = rec.train_accuracy;
                trace.append(d);
            }
            return trace;
        },
        py::arg("epochs") = 600, py::arg("lr") = 0.5, py::arg("weight_decay") = 5e-3,
        py::arg("widths") = std::vector<int>{16, 64, 32}, py::arg("activation") = "tanh", py::arg("seed") = 7,
        "Trains the blobs MLP and returns the per-epoch trace as a list of dicts.");
}
