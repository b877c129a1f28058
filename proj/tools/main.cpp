#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "decal/calibrators.hpp"
#include "decal/csv.hpp"
#include "decal/decision_policy.hpp"
#include "decal/errors.hpp"
#include "decal/experiment.hpp"
#include "decal/manifest.hpp"
#include "decal/metrics.hpp"
#include "decal/report.hpp"
#include "decal/score_data.hpp"
#include "decal/synthetic.hpp"
#include "decal/version.hpp"

namespace {

using namespace decal;

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::io: return 3;
    case ErrorCode::parse:
    case ErrorCode::schema:
    case ErrorCode::unknown_method: return 4;
    case ErrorCode::invalid_argument: return 5;
    }
    return 1;
}

void emit_manifest(const std::string& manifest_path, const std::string& command,
                   const nlohmann::json& config, std::vector<std::uint64_t> seeds,
                   std::vector<std::string> inputs, std::vector<std::string> outputs) {
    RunManifest m;
    m.command = command;
    m.config_json = config.dump(2);
    m.seeds = std::move(seeds);
    m.inputs = std::move(inputs);
    m.outputs = std::move(outputs);
    m.tool_version = kVersion;
    m.timestamp_utc = utc_timestamp();
    write_manifest(manifest_path, m);
}

// -- subcommand bodies; flags already parsed ---------------------------------

int cmd_gen(const std::string& variant, std::size_t rows, std::uint64_t seed,
            const std::string& out) {
    int v = variant_from_name(variant);
    FeatureDataset d = generate(variant_spec(v, rows, seed));
    save_dataset(out, d);
    nlohmann::json cfg = {{"variant", variant_name(v)}, {"rows", rows}, {"seed", seed},
                          {"out", out}};
    emit_manifest(manifest_path_for(out), "gen", cfg, {seed}, {}, {out});
    std::cout << "wrote " << out << " (" << d.size() << " rows)\n";
    return 0;
}

ScoreSet load_scores_flagged(const std::string& path, const std::string& space) {
    ColumnMap cols;
    ScoreSet s = load_scores(path, cols, score_space_from_string(space));
    return s;
}

int cmd_fit(const std::string& method, const std::string& scores_path, const std::string& out,
            bool no_smoothing, const std::string& space) {
    Method m = method_from_string(method);
    ScoreSet val = load_scores_flagged(scores_path, space);
    Calibrator cal = fit_calibrator(m, val, !no_smoothing);
    save_calibrator(out, cal);
    nlohmann::json cfg = {{"method", method},
                          {"scores", scores_path},
                          {"out", out},
                          {"platt_smoothing", !no_smoothing},
                          {"score_space", space}};
    emit_manifest(manifest_path_for(out), "fit", cfg, {}, {scores_path}, {out});
    std::cout << "wrote " << out << '\n';
    return 0;
}

int cmd_apply(const std::string& calibrator_path, const std::string& scores_path,
              const std::string& out) {
    Calibrator cal = load_calibrator(calibrator_path);
    ScoreSet s = load_scores_flagged(scores_path, to_string(cal.score_space()));
    std::vector<double> calibrated = cal.apply(std::span<const double>(s.scores));

    CsvTable t = read_csv(scores_path);
    std::ofstream f(out);
    if (!f)
        throw_io("cannot write " + out);
    for (std::size_t c = 0; c < t.header.size(); ++c)
        f << t.header[c] << ',';
    f << "calibrated\n";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t c = 0; c < t.rows[r].size(); ++c)
            f << t.rows[r][c] << ',';
        f << format_double(calibrated[r]) << '\n';
    }
    if (!f)
        throw_io("write failed: " + out);

    nlohmann::json cfg = {{"calibrator", calibrator_path}, {"scores", scores_path}, {"out", out}};
    emit_manifest(manifest_path_for(out), "apply", cfg, {}, {calibrator_path, scores_path}, {out});
    std::cout << "wrote " << out << '\n';
    return 0;
}

int cmd_threshold(const std::string& scores_path, double target_recall, const std::string& out) {
    ScoreSet s = load_scores_flagged(scores_path, "probability");
    ThresholdPolicy p = select_threshold(s, target_recall, "scores=" + scores_path);
    save_policy(out, p);
    nlohmann::json cfg = {{"scores", scores_path}, {"target_recall", target_recall}, {"out", out}};
    emit_manifest(manifest_path_for(out), "threshold", cfg, {}, {scores_path}, {out});
    std::cout << "wrote " << out << " (threshold " << format_double(p.threshold) << ")\n";
    return 0;
}

int cmd_evaluate(const std::string& scores_path, const std::string& policy_path, int ece_bins,
                 const std::string& out) {
    ScoreSet s = load_scores_flagged(scores_path, "probability");
    ThresholdPolicy policy = load_policy(policy_path);
    MetricsReport r = evaluate_at(s, policy.threshold, ece_bins);

    nlohmann::json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["threshold"] = r.threshold;
    doc["confusion"] = {{"tp", r.confusion.tp},
                        {"fp", r.confusion.fp},
                        {"tn", r.confusion.tn},
                        {"fn", r.confusion.fn}};
    doc["precision"] = r.precision;
    doc["recall"] = r.recall;
    doc["fpr"] = r.fpr;
    doc["ece"] = r.ece;
    doc["brier"] = r.brier;
    doc["nll"] = r.nll;
    auto bins = nlohmann::json::array();
    for (const auto& b : r.bins)
        bins.push_back({{"lo", b.lo},
                        {"hi", b.hi},
                        {"mean_predicted", b.mean_predicted},
                        {"empirical_rate", b.empirical_rate},
                        {"count", b.count}});
    doc["reliability_bins"] = std::move(bins);

    std::ofstream f(out);
    if (!f)
        throw_io("cannot write " + out);
    f << doc.dump(2) << '\n';
    if (!f)
        throw_io("write failed: " + out);

    nlohmann::json cfg = {{"scores", scores_path},
                          {"policy", policy_path},
                          {"ece_bins", ece_bins},
                          {"out", out}};
    emit_manifest(manifest_path_for(out), "evaluate", cfg, {}, {scores_path, policy_path}, {out});
    std::cout << "wrote " << out << '\n';
    return 0;
}

int cmd_experiment(const ExperimentConfig& cfg, const std::string& config_origin,
                   const std::string& out_dir, int jobs) {
    std::filesystem::create_directories(out_dir);
    ExperimentResult result = run(cfg, jobs);

    std::string records_path = out_dir + "/records.csv";
    std::string aggregates_path = out_dir + "/aggregates.json";
    write_records_csv(records_path, result.records);
    write_aggregates_json(aggregates_path, result);

    emit_manifest(out_dir + "/manifest.json", "experiment",
                  nlohmann::json::parse(config_to_json_string(cfg)), {cfg.master_seed},
                  config_origin.empty() ? std::vector<std::string>{}
                                        : std::vector<std::string>{config_origin},
                  {records_path, aggregates_path});

    std::cout << "wrote " << records_path << " (" << result.records.size() << " records)\n";
    std::cout << "wrote " << aggregates_path << '\n';
    for (const auto& s : result.skipped)
        std::cout << "skipped " << s << '\n';
    return 0;
}

int cmd_report(const std::string& records_path, const std::string& metric,
               const std::string& format, const std::string& out) {
    ReportOptions opts;
    opts.metric = metric_from_string(metric);
    if (format == "text")
        opts.format = ReportFormat::text;
    else if (format == "csv")
        opts.format = ReportFormat::csv;
    else
        throw_invalid("format must be text or csv");

    std::vector<BootstrapRecord> records = read_records_csv(records_path);
    std::string rendered = render_report(records, opts);
    if (out.empty()) {
        std::cout << rendered;
        return 0;
    }
    std::ofstream f(out);
    if (!f)
        throw_io("cannot write " + out);
    f << rendered;
    if (!f)
        throw_io("write failed: " + out);
    nlohmann::json cfg = {{"records", records_path},
                          {"metric", metric},
                          {"format", format},
                          {"out", out}};
    emit_manifest(manifest_path_for(out), "report", cfg, {}, {records_path}, {out});
    std::cout << "wrote " << out << '\n';
    return 0;
}

// Re-runs the command recorded in a manifest; the data outputs it rewrites
// are byte-identical to the original run's.
int cmd_replay(const std::string& manifest_path) {
    RunManifest m = load_manifest(manifest_path);
    nlohmann::json cfg;
    try {
        cfg = nlohmann::json::parse(m.config_json);
    } catch (const nlohmann::json::exception& e) {
        throw_schema(manifest_path + ": bad config: " + e.what());
    }
    try {
        if (m.command == "gen")
            return cmd_gen(cfg.at("variant").get<std::string>(), cfg.at("rows").get<std::size_t>(),
                           cfg.at("seed").get<std::uint64_t>(), cfg.at("out").get<std::string>());
        if (m.command == "fit")
            return cmd_fit(cfg.at("method").get<std::string>(), cfg.at("scores").get<std::string>(),
                           cfg.at("out").get<std::string>(), !cfg.at("platt_smoothing").get<bool>(),
                           cfg.at("score_space").get<std::string>());
        if (m.command == "apply")
            return cmd_apply(cfg.at("calibrator").get<std::string>(),
                             cfg.at("scores").get<std::string>(), cfg.at("out").get<std::string>());
        if (m.command == "threshold")
            return cmd_threshold(cfg.at("scores").get<std::string>(),
                                 cfg.at("target_recall").get<double>(),
                                 cfg.at("out").get<std::string>());
        if (m.command == "evaluate")
            return cmd_evaluate(cfg.at("scores").get<std::string>(),
                                cfg.at("policy").get<std::string>(), cfg.at("ece_bins").get<int>(),
                                cfg.at("out").get<std::string>());
        if (m.command == "experiment") {
            ExperimentConfig ecfg = config_from_json_string(m.config_json);
            std::string out_dir = std::filesystem::path(manifest_path).parent_path().string();
            if (out_dir.empty())
                out_dir = ".";
            return cmd_experiment(ecfg, manifest_path, out_dir, 1);
        }
        if (m.command == "report")
            return cmd_report(cfg.at("records").get<std::string>(),
                              cfg.at("metric").get<std::string>(),
                              cfg.at("format").get<std::string>(), cfg.at("out").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw_schema(manifest_path + ": bad config: " + e.what());
    }
    throw_schema(manifest_path + ": unknown command '" + m.command + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"decal: decision-threshold decoupling via probability calibration"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset variant");
    std::string gen_variant = "base";
    std::size_t gen_rows = 50000;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--variant", gen_variant, "base or 1..5")->capture_default_str();
    gen->add_option("--rows", gen_rows, "row count")->capture_default_str();
    gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
    gen->add_option("--out", gen_out, "output CSV path")->required();

    // fit
    auto* fit = app.add_subcommand("fit", "fit a calibrator on a scored validation set");
    std::string fit_method, fit_scores, fit_out, fit_space = "probability";
    bool fit_no_smoothing = false;
    fit->add_option("--method", fit_method, "platt|isotonic|temperature|beta|identity")
        ->required();
    fit->add_option("--scores", fit_scores, "validation scores CSV")->required();
    fit->add_option("--out", fit_out, "calibrator file path")->required();
    fit->add_flag("--no-platt-smoothing", fit_no_smoothing, "disable Platt target smoothing");
    fit->add_option("--score-space", fit_space, "probability|margin")->capture_default_str();

    // apply
    auto* apply = app.add_subcommand("apply", "append a calibrated-score column");
    std::string apply_cal, apply_scores, apply_out;
    apply->add_option("--calibrator", apply_cal, "calibrator file")->required();
    apply->add_option("--scores", apply_scores, "scores CSV")->required();
    apply->add_option("--out", apply_out, "output CSV path")->required();

    // threshold
    auto* thr = app.add_subcommand("threshold", "select a recall-targeted threshold");
    std::string thr_scores, thr_out;
    double thr_recall = 0.95;
    thr->add_option("--scores", thr_scores, "calibrated scores CSV")->required();
    thr->add_option("--target-recall", thr_recall, "recall target in (0,1]")
        ->capture_default_str();
    thr->add_option("--out", thr_out, "policy file path")->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "metrics of calibrated scores under a policy");
    std::string ev_scores, ev_policy, ev_out;
    int ev_bins = 15;
    ev->add_option("--scores", ev_scores, "calibrated scores CSV")->required();
    ev->add_option("--policy", ev_policy, "policy file")->required();
    ev->add_option("--ece-bins", ev_bins, "reliability bin count")->capture_default_str();
    ev->add_option("--out", ev_out, "metrics JSON path")->required();

    // experiment
    auto* ex = app.add_subcommand("experiment", "run the bootstrap protocol");
    std::string ex_config, ex_out_dir;
    int ex_jobs = 1;
    ex->add_option("--config", ex_config, "experiment config JSON (defaults when omitted)");
    ex->add_option("--out-dir", ex_out_dir, "output directory")->required();
    ex->add_option("--jobs", ex_jobs, "parallel bootstrap workers")->capture_default_str();

    // report
    auto* rep = app.add_subcommand("report", "render the per-variant method grid");
    std::string rep_records, rep_metric = "precision", rep_format = "text", rep_out;
    rep->add_option("--records", rep_records, "records CSV from experiment")->required();
    rep->add_option("--metric", rep_metric, "precision|recall|tpr_at_fpr|ece|brier")
        ->capture_default_str();
    rep->add_option("--format", rep_format, "text|csv")->capture_default_str();
    rep->add_option("--out", rep_out, "output path (stdout when omitted)");

    // replay
    auto* rp = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    std::string rp_manifest;
    rp->add_option("--manifest", rp_manifest, "manifest JSON path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return cmd_gen(gen_variant, gen_rows, gen_seed, gen_out);
        if (fit->parsed())
            return cmd_fit(fit_method, fit_scores, fit_out, fit_no_smoothing, fit_space);
        if (apply->parsed())
            return cmd_apply(apply_cal, apply_scores, apply_out);
        if (thr->parsed())
            return cmd_threshold(thr_scores, thr_recall, thr_out);
        if (ev->parsed())
            return cmd_evaluate(ev_scores, ev_policy, ev_bins, ev_out);
        if (ex->parsed()) {
            ExperimentConfig cfg;
            if (!ex_config.empty())
                cfg = load_config(ex_config);
            else
                cfg.validate();
            return cmd_experiment(cfg, ex_config, ex_out_dir, ex_jobs);
        }
        if (rep->parsed())
            return cmd_report(rep_records, rep_metric, rep_format, rep_out);
        if (rp->parsed())
            return cmd_replay(rp_manifest);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
