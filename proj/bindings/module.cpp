#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "decal/calibrators.hpp"
#include "decal/decision_policy.hpp"
#include "decal/experiment.hpp"
#include "decal/metrics.hpp"
#include "decal/report.hpp"
#include "decal/stats_tests.hpp"
#include "decal/synthetic.hpp"
#include "decal/version.hpp"

namespace py = pybind11;
using namespace decal;

namespace {

ScoreSet make_scores(std::vector<double> scores, std::vector<int> labels,
                     const std::string& space) {
    ScoreSet s;
    s.scores = std::move(scores);
    s.labels = std::move(labels);
    s.score_space = score_space_from_string(space);
    s.validate();
    return s;
}

py::dict params_dict(const Calibrator& c) {
    py::dict d;
    switch (c.method()) {
    case Method::identity:
        break;
    case Method::platt: {
        const auto& p = std::get<PlattParams>(c.params());
        d["a"] = p.a;
        d["b"] = p.b;
        break;
    }
    case Method::isotonic: {
        const auto& m = std::get<IsotonicModel>(c.params());
        d["breakpoints"] = m.breakpoints;
        d["values"] = m.values;
        break;
    }
    case Method::temperature:
        d["temperature"] = std::get<TemperatureParams>(c.params()).temperature;
        break;
    case Method::beta: {
        const auto& p = std::get<BetaParams>(c.params());
        d["a"] = p.a;
        d["b"] = p.b;
        d["c"] = p.c;
        break;
    }
    }
    return d;
}

} // namespace

PYBIND11_MODULE(_decal, m) {
    m.doc() = "probability calibration and decision-threshold decoupling";
    m.attr("__version__") = kVersion;

    m.def("to_logit", &to_logit, py::arg("p"));
    m.def("sigmoid", &sigmoid, py::arg("z"));

    py::class_<Calibrator>(m, "Calibrator")
        .def_static(
            "fit",
            [](const std::string& method, std::vector<double> scores, std::vector<int> labels,
               const std::string& score_space, bool platt_smoothing) {
                return fit_calibrator(method_from_string(method),
                                      make_scores(std::move(scores), std::move(labels),
                                                  score_space),
                                      platt_smoothing);
            },
            py::arg("method"), py::arg("scores"), py::arg("labels"),
            py::arg("score_space") = "probability", py::arg("platt_smoothing") = true)
        .def("apply",
             [](const Calibrator& c, const std::vector<double>& scores) {
                 return c.apply(std::span<const double>(scores));
             },
             py::arg("scores"))
        .def("apply_one", [](const Calibrator& c, double s) { return c.apply(s); }, py::arg("s"))
        .def_property_readonly(
            "method", [](const Calibrator& c) { return std::string(to_string(c.method())); })
        .def_property_readonly(
            "score_space",
            [](const Calibrator& c) { return std::string(to_string(c.score_space())); })
        .def_property_readonly("params", &params_dict)
        .def("save", [](const Calibrator& c, const std::string& path) { save_calibrator(path, c); },
             py::arg("path"))
        .def_static("load", &load_calibrator, py::arg("path"));

    m.def(
        "confusion",
        [](std::vector<double> scores, std::vector<int> labels, double threshold) {
            auto c = confusion_at(make_scores(std::move(scores), std::move(labels), "probability"),
                                  threshold);
            py::dict d;
            d["tp"] = c.tp;
            d["fp"] = c.fp;
            d["tn"] = c.tn;
            d["fn"] = c.fn;
            d["precision"] = precision(c);
            d["recall"] = recall(c);
            d["fpr"] = fpr(c);
            return d;
        },
        py::arg("scores"), py::arg("labels"), py::arg("threshold"));

    m.def(
        "tpr_at_fpr",
        [](std::vector<double> scores, std::vector<int> labels, double target_fpr) {
            auto op = tpr_at_fpr(make_scores(std::move(scores), std::move(labels), "probability"),
                                 target_fpr);
            return py::make_tuple(op.tpr, op.fpr, op.threshold);
        },
        py::arg("scores"), py::arg("labels"), py::arg("target_fpr"));

    m.def(
        "ece",
        [](std::vector<double> scores, std::vector<int> labels, int bins) {
            return ece(make_scores(std::move(scores), std::move(labels), "probability"), bins);
        },
        py::arg("scores"), py::arg("labels"), py::arg("bins") = 15);
    m.def(
        "brier",
        [](std::vector<double> scores, std::vector<int> labels) {
            return brier(make_scores(std::move(scores), std::move(labels), "probability"));
        },
        py::arg("scores"), py::arg("labels"));
    m.def(
        "nll",
        [](std::vector<double> scores, std::vector<int> labels) {
            return nll(make_scores(std::move(scores), std::move(labels), "probability"));
        },
        py::arg("scores"), py::arg("labels"));

    m.def(
        "select_threshold",
        [](std::vector<double> scores, std::vector<int> labels, double target_recall) {
            return select_threshold(make_scores(std::move(scores), std::move(labels),
                                                "probability"),
                                    target_recall)
                .threshold;
        },
        py::arg("scores"), py::arg("labels"), py::arg("target_recall"));

    m.def(
        "wilcoxon",
        [](const std::vector<double>& x, const std::vector<double>& y) {
            auto r = wilcoxon_signed_rank(x, y);
            py::dict d;
            d["w_statistic"] = r.w_statistic;
            d["n_effective"] = r.n_effective;
            d["p_value"] = r.p_value;
            d["mode"] = r.mode == PValueMode::exact ? "exact" : "normal_approximation";
            return d;
        },
        py::arg("x"), py::arg("y"));

    m.def(
        "generate",
        [](const std::string& variant, std::size_t rows, std::uint64_t seed) {
            FeatureDataset d = generate(variant_spec(variant_from_name(variant), rows, seed));
            py::dict out;
            out["n_features"] = d.n_features;
            out["features"] = d.features; // row-major, size * n_features
            out["labels"] = d.labels;
            out["group"] = d.group;
            out["month"] = d.month;
            return out;
        },
        py::arg("variant") = "base", py::arg("rows") = 50000, py::arg("seed") = 0);

    m.def(
        "experiment",
        [](const std::string& config_json, int jobs) {
            ExperimentConfig cfg = config_from_json_string(config_json);
            ExperimentResult res = run(cfg, jobs);
            py::list records;
            for (const auto& r : res.records) {
                py::dict d;
                d["variant"] = std::string(variant_name(r.variant));
                d["method"] = std::string(to_string(r.method));
                d["bootstrap"] = r.bootstrap;
                d["precision"] = r.precision;
                d["recall"] = r.recall;
                d["tpr_at_fpr"] = r.tpr_at_fpr;
                d["ece"] = r.ece;
                d["brier"] = r.brier;
                d["threshold"] = r.threshold;
                records.append(std::move(d));
            }
            py::list aggregates;
            for (const auto& [key, agg] : res.aggregates) {
                const auto& [variant, method, metric] = key;
                py::dict d;
                d["variant"] = std::string(variant_name(variant));
                d["method"] = std::string(to_string(method));
                d["metric"] = std::string(to_string(metric));
                d["mean"] = agg.mean;
                d["stddev"] = agg.stddev;
                d["n"] = agg.n;
                aggregates.append(std::move(d));
            }
            py::list p_values;
            for (const auto& [key, p] : res.p_values) {
                const auto& [variant, method, metric] = key;
                py::dict d;
                d["variant"] = std::string(variant_name(variant));
                d["method"] = std::string(to_string(method));
                d["metric"] = std::string(to_string(metric));
                d["p_value"] = p;
                p_values.append(std::move(d));
            }
            py::dict out;
            out["records"] = std::move(records);
            out["aggregates"] = std::move(aggregates);
            out["p_values"] = std::move(p_values);
            out["skipped"] = res.skipped;
            return out;
        },
        py::arg("config_json") = "{}", py::arg("jobs") = 1);

    m.def(
        "report",
        [](const std::string& records_csv, const std::string& metric, const std::string& format) {
            ReportOptions opts;
            opts.metric = metric_from_string(metric);
            opts.format = format == "csv" ? ReportFormat::csv : ReportFormat::text;
            return render_report(read_records_csv(records_csv), opts);
        },
        py::arg("records_csv"), py::arg("metric") = "precision", py::arg("format") = "text");
}
