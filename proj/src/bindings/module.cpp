// Python bindings for the route-change detection core. The compiled module
// is pathwatch._core; the pathwatch package re-exports the public names.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pathwatch/baselines.hpp"
#include "pathwatch/evaluate.hpp"
#include "pathwatch/runner.hpp"
#include "pathwatch/stacking.hpp"
#include "pathwatch/synth.hpp"
#include "pathwatch/tpe.hpp"

namespace py = pybind11;
using namespace pathwatch;

namespace {

py::array_t<double> matrix_to_numpy(const FeatureMatrix& m) {
    py::array_t<double> out({m.n_rows, m.n_cols()});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

GbdtParams params_from_kwargs(int n_estimators, double learning_rate, int max_leaves,
                              int max_depth, double feature_fraction,
                              double bagging_fraction, double l1, double l2,
                              const std::string& growth, std::uint64_t seed,
                              int n_bins) {
    GbdtParams p;
    p.n_estimators = n_estimators;
    p.learning_rate = learning_rate;
    p.max_leaves = max_leaves;
    p.max_depth = max_depth;
    p.feature_fraction = feature_fraction;
    p.bagging_fraction = bagging_fraction;
    p.l1 = l1;
    p.l2 = l2;
    p.growth = growth == "depth_wise" ? Growth::kDepthWise : Growth::kLeafWise;
    p.seed = seed;
    p.n_bins = n_bins;
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "route-change detection from traceroute latency measurements";

    py::register_exception<DataError>(m, "DataError");

    py::class_<TracerouteRecord>(m, "TracerouteRecord")
        .def(py::init<>())
        .def_readwrite("src", &TracerouteRecord::src)
        .def_readwrite("dst", &TracerouteRecord::dst)
        .def_readwrite("timestamp", &TracerouteRecord::timestamp)
        .def_readwrite("rtts", &TracerouteRecord::rtts)
        .def_readwrite("probes_sent", &TracerouteRecord::probes_sent)
        .def_readwrite("replies_last_hop", &TracerouteRecord::replies_last_hop)
        .def_readwrite("label", &TracerouteRecord::label);

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("records", &Dataset::records)
        .def_readonly("labeled", &Dataset::labeled)
        .def("__len__", &Dataset::size)
        .def("labels", &Dataset::labels);

    m.def("make_dataset", &make_dataset, py::arg("records"));
    m.def("parse_csv",
          [](const std::string& path) { return parse_csv(path); }, py::arg("path"));
    m.def("parse_jsonl",
          [](const std::string& path) { return parse_jsonl(path); }, py::arg("path"));
    m.def("write_csv",
          [](const Dataset& ds, const std::string& path) { write_csv(ds, path); },
          py::arg("dataset"), py::arg("path"));
    m.def("split", &split, py::arg("dataset"), py::arg("train_fraction"),
          py::arg("seed"));

    py::class_<ImbalanceReport>(m, "ImbalanceReport")
        .def_readonly("negatives", &ImbalanceReport::negatives)
        .def_readonly("positives", &ImbalanceReport::positives)
        .def_readonly("negative_pct", &ImbalanceReport::negative_pct)
        .def_readonly("positive_pct", &ImbalanceReport::positive_pct)
        .def_readonly("single_class", &ImbalanceReport::single_class)
        .def_readonly("imbalance_ratio", &ImbalanceReport::imbalance_ratio);
    m.def("class_distribution", &class_distribution, py::arg("dataset"));

    py::class_<FeatureConfig>(m, "FeatureConfig")
        .def(py::init<>())
        .def_readwrite("epsilon", &FeatureConfig::epsilon)
        .def_readwrite("ratio_clip", &FeatureConfig::ratio_clip)
        .def_readwrite("z_clip", &FeatureConfig::z_clip)
        .def_readwrite("rolling_windows", &FeatureConfig::rolling_windows)
        .def_readwrite("percentiles", &FeatureConfig::percentiles);

    py::class_<AggregateTables>(m, "AggregateTables");

    py::class_<FeatureMatrix>(m, "FeatureMatrix")
        .def_readonly("schema", &FeatureMatrix::schema)
        .def_readonly("labels", &FeatureMatrix::labels)
        .def_property_readonly("n_rows",
                               [](const FeatureMatrix& m_) { return m_.n_rows; })
        .def("to_numpy", &matrix_to_numpy)
        .def("to_csv", &FeatureMatrix::to_csv);

    m.def(
        "build_features",
        [](const Dataset& ds, const FeatureConfig& cfg,
           const std::optional<AggregateTables>& tables) {
            return build_features(ds, cfg, tables);
        },
        py::arg("dataset"), py::arg("config") = FeatureConfig{},
        py::arg("tables") = std::nullopt);

    m.def("gbdt_params", &params_from_kwargs, py::arg("n_estimators") = 300,
          py::arg("learning_rate") = 0.05, py::arg("max_leaves") = 31,
          py::arg("max_depth") = 16, py::arg("feature_fraction") = 1.0,
          py::arg("bagging_fraction") = 1.0, py::arg("l1") = 0.0, py::arg("l2") = 1.0,
          py::arg("growth") = "leaf_wise", py::arg("seed") = 0, py::arg("n_bins") = 256);

    py::class_<GbdtParams>(m, "GbdtParams")
        .def(py::init<>())
        .def_readwrite("n_estimators", &GbdtParams::n_estimators)
        .def_readwrite("learning_rate", &GbdtParams::learning_rate)
        .def_readwrite("max_leaves", &GbdtParams::max_leaves)
        .def_readwrite("max_depth", &GbdtParams::max_depth)
        .def_readwrite("feature_fraction", &GbdtParams::feature_fraction)
        .def_readwrite("bagging_fraction", &GbdtParams::bagging_fraction)
        .def_readwrite("l1", &GbdtParams::l1)
        .def_readwrite("l2", &GbdtParams::l2)
        .def_readwrite("seed", &GbdtParams::seed)
        .def_readwrite("n_bins", &GbdtParams::n_bins);

    py::class_<GbdtModel>(m, "GbdtModel")
        .def_property_readonly("n_trees",
                               [](const GbdtModel& model) { return model.trees.size(); })
        .def_readonly("base_score", &GbdtModel::base_score);

    m.def(
        "fit_gbdt",
        [](const FeatureMatrix& x, const std::vector<int>& y, const GbdtParams& params) {
            return fit_gbdt(x, y, params);
        },
        py::arg("x"), py::arg("y"), py::arg("params"));
    m.def("predict_proba",
          [](const GbdtModel& model, const FeatureMatrix& x) {
              return predict_proba(model, x);
          });
    m.def("serialize_model", &serialize_model);
    m.def("deserialize_model",
          [](const std::string& bytes) { return deserialize_model(bytes); });

    py::class_<BaselineParams>(m, "BaselineParams")
        .def(py::init<>())
        .def_readwrite("logistic_l2", &BaselineParams::logistic_l2)
        .def_readwrite("tree_max_depth", &BaselineParams::tree_max_depth)
        .def_readwrite("forest_size", &BaselineParams::forest_size)
        .def_readwrite("knn_k", &BaselineParams::knn_k)
        .def_readwrite("seed", &BaselineParams::seed);
    py::class_<BaselineModel>(m, "BaselineModel")
        .def_property_readonly(
            "kind", [](const BaselineModel& model) { return to_string(model.kind); });
    m.def(
        "fit_baseline",
        [](const std::string& kind, const FeatureMatrix& x, const std::vector<int>& y,
           const BaselineParams& params) {
            return fit_baseline(baseline_kind_from_string(kind), x, y, params);
        },
        py::arg("kind"), py::arg("x"), py::arg("y"),
        py::arg("params") = BaselineParams{});
    m.def("predict_baseline",
          [](const BaselineModel& model, const FeatureMatrix& x) {
              return predict_baseline(model, x);
          });

    py::class_<StackedModel>(m, "StackedModel")
        .def_readonly("threshold", &StackedModel::threshold)
        .def_readonly("k", &StackedModel::k)
        .def_readonly("seed", &StackedModel::seed);
    py::class_<StackedPrediction>(m, "StackedPrediction")
        .def_readonly("probabilities", &StackedPrediction::probabilities)
        .def_readonly("decisions", &StackedPrediction::decisions);
    m.def(
        "train_stacked",
        [](const Dataset& ds, std::uint64_t seed, int folds, int base_trees,
           int meta_trees, bool paper_mode) {
            auto bases = default_base_configs(seed);
            for (auto& b : bases) b.n_estimators = base_trees;
            GbdtParams meta = default_meta_params(seed);
            meta.n_estimators = meta_trees;
            return train_stacked(ds, FeatureConfig{}, bases, meta, folds, seed,
                                 paper_mode ? ThresholdMode::kInSample
                                            : ThresholdMode::kOutOfFold);
        },
        py::arg("dataset"), py::arg("seed") = 0, py::arg("folds") = 5,
        py::arg("base_trees") = 300, py::arg("meta_trees") = 200,
        py::arg("paper_mode") = false,
        py::call_guard<py::gil_scoped_release>());
    m.def("predict_stacked", &predict_stacked, py::arg("model"), py::arg("dataset"),
          py::call_guard<py::gil_scoped_release>());
    m.def("serialize_stacked", &serialize_stacked);
    m.def("deserialize_stacked",
          [](const std::string& bytes) { return deserialize_stacked(bytes); });

    m.def("stratified_kfold",
          [](const std::vector<int>& y, int k, std::uint64_t seed) {
              return stratified_kfold(y, k, seed).fold;
          },
          py::arg("y"), py::arg("k") = 5, py::arg("seed") = 0);

    m.def("threshold_scan",
          [](const std::vector<double>& probs, const std::vector<int>& y, double step) {
              auto scan = threshold_scan(probs, y, step);
              return py::make_tuple(scan.threshold, scan.f1);
          },
          py::arg("probs"), py::arg("y"), py::arg("grid_step") = 0.001);
    m.def("classification_metrics",
          [](const std::vector<int>& decisions, const std::vector<int>& y) {
              Metrics metrics = classification_metrics(decisions, y);
              py::dict out;
              out["tp"] = metrics.counts.tp;
              out["fp"] = metrics.counts.fp;
              out["tn"] = metrics.counts.tn;
              out["fn"] = metrics.counts.fn;
              out["precision"] = metrics.precision;
              out["recall"] = metrics.recall;
              out["f1"] = metrics.f1;
              out["accuracy"] = metrics.accuracy;
              return out;
          });
    m.def("wilcoxon_signed_rank",
          [](const std::vector<double>& a, const std::vector<double>& b) {
              auto result = wilcoxon_signed_rank(a, b);
              return py::make_tuple(result.statistic, result.p_value);
          });

    py::class_<ParamSpec>(m, "ParamSpec")
        .def_readonly("name", &ParamSpec::name)
        .def_readonly("lo", &ParamSpec::lo)
        .def_readonly("hi", &ParamSpec::hi)
        .def_readonly("step", &ParamSpec::step);
    py::class_<SearchSpace>(m, "SearchSpace")
        .def_readonly("params", &SearchSpace::params)
        .def("contains", &SearchSpace::contains);
    m.def("meta_search_space", &meta_search_space);
    m.def(
        "optimize",
        [](const std::function<double(const std::vector<double>&)>& objective,
           const SearchSpace& space, int n_trials, std::uint64_t seed) {
            auto result = optimize(objective, space, n_trials, seed);
            return py::make_tuple(result.best_point, result.best_value);
        },
        py::arg("objective"), py::arg("space"), py::arg("n_trials"), py::arg("seed"));

    py::class_<GroundTruth>(m, "GroundTruth").def_readonly("labels", &GroundTruth::labels);
    m.def(
        "synth_generate",
        [](int n_paths, int obs_per_path, double change_rate, std::uint64_t seed) {
            SynthConfig cfg;
            cfg.n_paths = n_paths;
            cfg.obs_per_path = obs_per_path;
            cfg.change_rate = change_rate;
            cfg.seed = seed;
            return generate(cfg);
        },
        py::arg("n_paths") = 100, py::arg("obs_per_path") = 100,
        py::arg("change_rate") = 0.02, py::arg("seed") = 0);
    m.def("benchmark_suite",
          [](std::uint64_t seed) {
              Benchmark bench = benchmark_suite(seed);
              return py::make_tuple(bench.data, bench.truth, bench.version);
          },
          py::arg("seed") = 7);

    m.def("set_max_jobs", &set_max_jobs, py::arg("jobs"));
    m.attr("__version__") = "0.1.0";
}
