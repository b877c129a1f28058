#include "decal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "decal/csv.hpp"
#include "decal/decision_policy.hpp"
#include "decal/errors.hpp"
#include "decal/metrics.hpp"
#include "decal/rng.hpp"
#include "decal/stats_tests.hpp"
#include "decal/version.hpp"

namespace decal {

namespace {

constexpr std::uint64_t kTagGenerate = 0x67656eULL;
constexpr std::uint64_t kTagValidation = 0x76616cULL;
constexpr std::uint64_t kTagBootstrap = 0x626f6f74ULL;

bool both_classes(const std::vector<int>& labels) {
    bool pos = false, neg = false;
    for (int y : labels)
        (y == 1 ? pos : neg) = true;
    return pos && neg;
}

FeatureDataset materialize(const FeatureDataset& src, std::span<const std::size_t> rows) {
    FeatureDataset out;
    out.n_features = src.n_features;
    out.features.reserve(rows.size() * src.n_features);
    out.labels.reserve(rows.size());
    for (std::size_t i : rows)
        out.push_row(src.row(i), src.labels[i], src.group[i], src.month[i]);
    return out;
}

} // namespace

void ExperimentConfig::validate() const {
    if (variants.empty())
        throw_invalid("config needs at least one variant");
    for (int v : variants)
        if (v < 0 || v > 5)
            throw_invalid("variant must lie in 0..5");
    if (methods.empty())
        throw_invalid("config needs at least one method");
    if (n_bootstraps < 1)
        throw_invalid("n_bootstraps must be >= 1");
    if (n_rows < static_cast<std::size_t>(kMonths))
        throw_invalid("n_rows must cover all months");
    if (!(target_recall > 0.0 && target_recall <= 1.0))
        throw_invalid("target_recall must lie in (0,1]");
    if (!(target_fpr > 0.0 && target_fpr < 1.0))
        throw_invalid("target_fpr must lie in (0,1)");
    if (!(split.validation_fraction > 0.0 && split.validation_fraction < 1.0))
        throw_invalid("validation_fraction must lie in (0,1)");
    if (split.train_months.lo < 1 || split.train_months.hi > kMonths ||
        split.train_months.lo > split.train_months.hi)
        throw_invalid("bad train month range");
    if (split.test_months.lo < 1 || split.test_months.hi > kMonths ||
        split.test_months.lo > split.test_months.hi)
        throw_invalid("bad test month range");
    if (split.train_months.overlaps(split.test_months))
        throw_invalid("train and test months overlap");
    if (ece_bins < 1)
        throw_invalid("ece_bins must be >= 1");
    if (classifier.epochs < 1 || !(classifier.learning_rate > 0.0))
        throw_invalid("bad classifier settings");
}

std::string config_to_json_string(const ExperimentConfig& cfg) {
    nlohmann::json doc;
    std::vector<std::string> vnames;
    for (int v : cfg.variants)
        vnames.push_back(variant_name(v));
    doc["variants"] = vnames;
    std::vector<std::string> mnames;
    for (Method m : cfg.methods)
        mnames.push_back(to_string(m));
    doc["methods"] = mnames;
    doc["n_bootstraps"] = cfg.n_bootstraps;
    doc["n_rows"] = cfg.n_rows;
    doc["target_recall"] = cfg.target_recall;
    doc["target_fpr"] = cfg.target_fpr;
    doc["master_seed"] = cfg.master_seed;
    doc["split"] = {{"train_months", {cfg.split.train_months.lo, cfg.split.train_months.hi}},
                    {"validation_fraction", cfg.split.validation_fraction},
                    {"test_months", {cfg.split.test_months.lo, cfg.split.test_months.hi}}};
    doc["classifier"] = {{"learning_rate", cfg.classifier.learning_rate},
                         {"epochs", cfg.classifier.epochs}};
    doc["ece_bins"] = cfg.ece_bins;
    doc["platt_smoothing"] = cfg.platt_smoothing;
    return doc.dump(2);
}

ExperimentConfig config_from_json_string(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw_parse(std::string("config: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        if (doc.contains("variants")) {
            cfg.variants.clear();
            for (const auto& v : doc["variants"])
                cfg.variants.push_back(v.is_number() ? v.get<int>()
                                                     : variant_from_name(v.get<std::string>()));
        }
        if (doc.contains("methods")) {
            cfg.methods.clear();
            for (const auto& m : doc["methods"])
                cfg.methods.push_back(method_from_string(m.get<std::string>()));
        }
        cfg.n_bootstraps = doc.value("n_bootstraps", cfg.n_bootstraps);
        cfg.n_rows = doc.value("n_rows", cfg.n_rows);
        cfg.target_recall = doc.value("target_recall", cfg.target_recall);
        cfg.target_fpr = doc.value("target_fpr", cfg.target_fpr);
        cfg.master_seed = doc.value("master_seed", cfg.master_seed);
        if (doc.contains("split")) {
            const auto& s = doc["split"];
            if (s.contains("train_months")) {
                cfg.split.train_months.lo = s["train_months"][0].get<int>();
                cfg.split.train_months.hi = s["train_months"][1].get<int>();
            }
            cfg.split.validation_fraction =
                s.value("validation_fraction", cfg.split.validation_fraction);
            if (s.contains("test_months")) {
                cfg.split.test_months.lo = s["test_months"][0].get<int>();
                cfg.split.test_months.hi = s["test_months"][1].get<int>();
            }
        }
        if (doc.contains("classifier")) {
            const auto& c = doc["classifier"];
            cfg.classifier.learning_rate = c.value("learning_rate", cfg.classifier.learning_rate);
            cfg.classifier.epochs = c.value("epochs", cfg.classifier.epochs);
        }
        cfg.ece_bins = doc.value("ece_bins", cfg.ece_bins);
        cfg.platt_smoothing = doc.value("platt_smoothing", cfg.platt_smoothing);
    } catch (const nlohmann::json::exception& e) {
        throw_schema(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw_io("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json_string(text);
}

const char* to_string(MetricId m) {
    switch (m) {
    case MetricId::precision: return "precision";
    case MetricId::recall: return "recall";
    case MetricId::tpr_at_fpr: return "tpr_at_fpr";
    case MetricId::ece: return "ece";
    case MetricId::brier: return "brier";
    }
    return "precision";
}

MetricId metric_from_string(const std::string& name) {
    for (MetricId m : kAllMetrics)
        if (name == to_string(m))
            return m;
    throw_invalid("unknown metric: '" + name + "'");
}

double BootstrapRecord::metric(MetricId id) const {
    switch (id) {
    case MetricId::precision: return precision;
    case MetricId::recall: return recall;
    case MetricId::tpr_at_fpr: return tpr_at_fpr;
    case MetricId::ece: return ece;
    case MetricId::brier: return brier;
    }
    return precision;
}

Aggregate aggregate(std::span<const double> values) {
    if (values.empty())
        throw_invalid("aggregate of an empty cell");
    Aggregate a;
    a.n = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values)
        sum += v;
    a.mean = sum / static_cast<double>(a.n);
    if (a.n > 1) {
        double ss = 0.0;
        for (double v : values) {
            double d = v - a.mean;
            ss += d * d;
        }
        a.stddev = std::sqrt(ss / static_cast<double>(a.n - 1));
    }
    return a;
}

VariantData prepare_variant(const ExperimentConfig& cfg, int variant) {
    SyntheticSpec spec = variant_spec(variant, cfg.n_rows,
                                      mix_seed({cfg.master_seed, kTagGenerate,
                                                static_cast<std::uint64_t>(variant)}));
    FeatureDataset data = generate(spec);

    std::vector<std::size_t> train_ids, test_ids;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (cfg.split.train_months.contains(data.month[i]))
            train_ids.push_back(i);
        else if (cfg.split.test_months.contains(data.month[i]))
            test_ids.push_back(i);
    }
    if (train_ids.empty() || test_ids.empty())
        throw_invalid("empty train or test month span");

    std::size_t k = static_cast<std::size_t>(
        std::floor(cfg.split.validation_fraction * static_cast<double>(train_ids.size())));
    if (k == 0 || k == train_ids.size())
        throw_invalid("degenerate validation split");

    // Partial Fisher-Yates over the training-month rows; the first k land
    // in validation, the rest form the bootstrap pool.
    Rng rng(mix_seed({cfg.master_seed, kTagValidation, static_cast<std::uint64_t>(variant)}));
    std::vector<std::size_t> ids = train_ids;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + rng.index(ids.size() - i);
        std::swap(ids[i], ids[j]);
    }
    VariantData vd;
    vd.validation_rows.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
    vd.pool_rows.assign(ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
    std::sort(vd.validation_rows.begin(), vd.validation_rows.end());
    std::sort(vd.pool_rows.begin(), vd.pool_rows.end());
    vd.test_rows = std::move(test_ids);

    vd.pool = materialize(data, vd.pool_rows);
    vd.validation = materialize(data, vd.validation_rows);
    vd.test = materialize(data, vd.test_rows);
    return vd;
}

std::vector<std::size_t> bootstrap_rows(const ExperimentConfig& cfg, int variant, int bootstrap,
                                        std::size_t pool_size) {
    if (pool_size == 0)
        throw_invalid("empty bootstrap pool");
    Rng rng(mix_seed({cfg.master_seed, kTagBootstrap, static_cast<std::uint64_t>(variant),
                      static_cast<std::uint64_t>(bootstrap)}));
    std::vector<std::size_t> rows(pool_size);
    for (std::size_t& r : rows)
        r = rng.index(pool_size);
    return rows;
}

namespace {

struct BootOutcome {
    std::vector<BootstrapRecord> records;
    std::string skip; // nonempty = whole bootstrap skipped
};

BootOutcome run_bootstrap(const ExperimentConfig& cfg, int variant, int b, const VariantData& vd,
                          const std::map<Method, double>* frozen,
                          std::map<Method, double>* freeze_out) {
    auto rows = bootstrap_rows(cfg, variant, b, vd.pool.size());
    FeatureDataset train = materialize(vd.pool, rows);
    if (!both_classes(train.labels))
        return {{}, "single-class training sample"};

    BaselineClassifier model = train_baseline(train, cfg.classifier);
    ScoreSet val_scores = score(model, vd.validation);
    ScoreSet test_scores = score(model, vd.test);

    BootOutcome out;
    for (Method m : cfg.methods) {
        Calibrator cal = fit_calibrator(m, val_scores, cfg.platt_smoothing);
        ScoreSet cal_test = cal.apply(test_scores);

        double threshold;
        if (freeze_out) {
            ScoreSet cal_val = cal.apply(val_scores);
            std::string source = std::string("variant=") + variant_name(variant) +
                                 ";method=" + to_string(m) + ";bootstrap=0";
            threshold = select_threshold(cal_val, cfg.target_recall, source).threshold;
            (*freeze_out)[m] = threshold;
        } else {
            threshold = frozen->at(m);
        }

        BootstrapRecord r;
        r.variant = variant;
        r.method = m;
        r.bootstrap = b;
        r.threshold = threshold;
        ConfusionCounts conf = confusion_at(cal_test, threshold);
        r.precision = precision(conf);
        r.recall = recall(conf);
        r.tpr_at_fpr = tpr_at_fpr(cal_test, cfg.target_fpr).tpr;
        r.ece = ece(cal_test, cfg.ece_bins);
        r.brier = brier(cal_test);
        out.records.push_back(r);
    }
    return out;
}

} // namespace

ExperimentResult run(const ExperimentConfig& cfg, int jobs) {
    cfg.validate();
    if (jobs < 1)
        jobs = 1;

    ExperimentResult result;
    for (int variant : cfg.variants) {
        std::string vname = variant_name(variant);
        VariantData vd = prepare_variant(cfg, variant);

        if (!both_classes(vd.validation.labels)) {
            result.skipped.push_back(vname + ":*: single-class validation set, variant skipped");
            continue;
        }
        if (!both_classes(vd.test.labels)) {
            result.skipped.push_back(vname + ":*: single-class test set, variant skipped");
            continue;
        }

        std::map<Method, double> frozen;
        BootOutcome first = run_bootstrap(cfg, variant, 0, vd, nullptr, &frozen);
        if (!first.skip.empty()) {
            result.skipped.push_back(vname + ":0: " + first.skip +
                                     "; thresholds unavailable, variant skipped");
            continue;
        }
        result.records.insert(result.records.end(), first.records.begin(), first.records.end());

        int nb = cfg.n_bootstraps;
        std::vector<BootOutcome> slots(nb);
        if (nb > 1) {
            int workers = std::min(jobs, nb - 1);
            if (workers <= 1) {
                for (int b = 1; b < nb; ++b)
                    slots[b] = run_bootstrap(cfg, variant, b, vd, &frozen, nullptr);
            } else {
                std::atomic<int> next{1};
                std::vector<std::exception_ptr> errors(workers);
                std::vector<std::thread> threads;
                threads.reserve(workers);
                for (int w = 0; w < workers; ++w) {
                    threads.emplace_back([&, w] {
                        try {
                            int b;
                            while ((b = next.fetch_add(1)) < nb)
                                slots[b] = run_bootstrap(cfg, variant, b, vd, &frozen, nullptr);
                        } catch (...) {
                            errors[w] = std::current_exception();
                        }
                    });
                }
                for (auto& t : threads)
                    t.join();
                for (const auto& e : errors)
                    if (e)
                        std::rethrow_exception(e);
            }
        }
        for (int b = 1; b < nb; ++b) {
            if (!slots[b].skip.empty())
                result.skipped.push_back(vname + ":" + std::to_string(b) + ": " + slots[b].skip);
            else
                result.records.insert(result.records.end(), slots[b].records.begin(),
                                      slots[b].records.end());
        }
    }

    ExperimentResult summary = summarize(std::move(result.records));
    summary.skipped = std::move(result.skipped);
    return summary;
}

bool higher_is_better(MetricId id) {
    return id != MetricId::ece && id != MetricId::brier;
}

ExperimentResult summarize(std::vector<BootstrapRecord> records) {
    ExperimentResult result;
    result.records = std::move(records);
    std::sort(result.records.begin(), result.records.end(),
              [](const BootstrapRecord& a, const BootstrapRecord& b) {
                  return std::tuple(a.variant, static_cast<int>(a.method), a.bootstrap) <
                         std::tuple(b.variant, static_cast<int>(b.method), b.bootstrap);
              });

    // Aggregates over the defined (non-NaN) values per cell.
    std::map<CellKey, std::vector<double>> cells;
    for (const auto& r : result.records)
        for (MetricId id : kAllMetrics) {
            double v = r.metric(id);
            if (!std::isnan(v))
                cells[{r.variant, r.method, id}].push_back(v);
        }
    for (const auto& [key, values] : cells)
        result.aggregates[key] = aggregate(values);

    // Paired Wilcoxon vs identity over common, defined bootstraps.
    std::map<std::pair<int, Method>, std::map<int, const BootstrapRecord*>> by_cell;
    for (const auto& r : result.records)
        by_cell[{r.variant, r.method}][r.bootstrap] = &r;
    for (const auto& [cell, recs] : by_cell) {
        auto [variant, method] = cell;
        if (method == Method::identity)
            continue;
        auto id_it = by_cell.find({variant, Method::identity});
        if (id_it == by_cell.end())
            continue;
        for (MetricId id : kAllMetrics) {
            std::vector<double> x, y;
            for (const auto& [b, rec] : recs) {
                auto match = id_it->second.find(b);
                if (match == id_it->second.end())
                    continue;
                double xv = rec->metric(id);
                double yv = match->second->metric(id);
                if (std::isnan(xv) || std::isnan(yv))
                    continue;
                x.push_back(xv);
                y.push_back(yv);
            }
            if (!x.empty())
                result.p_values[{variant, method, id}] =
                    wilcoxon_signed_rank(x, y).p_value;
        }
    }
    return result;
}

void write_records_csv(const std::string& path, const std::vector<BootstrapRecord>& records) {
    std::ofstream out(path);
    if (!out)
        throw_io("cannot write " + path);
    out << "variant,method,bootstrap,precision,recall,tpr_at_fpr,ece,brier,threshold\n";
    for (const auto& r : records) {
        out << variant_name(r.variant) << ',' << to_string(r.method) << ',' << r.bootstrap << ','
            << format_double(r.precision) << ',' << format_double(r.recall) << ','
            << format_double(r.tpr_at_fpr) << ',' << format_double(r.ece) << ','
            << format_double(r.brier) << ',' << format_double(r.threshold) << '\n';
    }
    if (!out)
        throw_io("write failed: " + path);
}

std::vector<BootstrapRecord> read_records_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    const char* needed[] = {"variant",    "method", "bootstrap", "precision", "recall",
                            "tpr_at_fpr", "ece",    "brier",     "threshold"};
    int col[9];
    for (int i = 0; i < 9; ++i) {
        col[i] = t.column(needed[i]);
        if (col[i] < 0)
            throw_schema(path + ": missing column '" + std::string(needed[i]) + "'");
    }
    std::vector<BootstrapRecord> records;
    records.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        std::string ctx = path + " row " + std::to_string(i + 2);
        BootstrapRecord r;
        r.variant = variant_from_name(row[col[0]]);
        r.method = method_from_string(row[col[1]]);
        r.bootstrap = static_cast<int>(parse_long(row[col[2]], ctx));
        r.precision = parse_double(row[col[3]], ctx);
        r.recall = parse_double(row[col[4]], ctx);
        r.tpr_at_fpr = parse_double(row[col[5]], ctx);
        r.ece = parse_double(row[col[6]], ctx);
        r.brier = parse_double(row[col[7]], ctx);
        r.threshold = parse_double(row[col[8]], ctx);
        records.push_back(r);
    }
    return records;
}

void write_aggregates_json(const std::string& path, const ExperimentResult& result) {
    nlohmann::json doc;
    doc["schema_version"] = kSchemaVersion;
    auto cells = nlohmann::json::array();
    for (const auto& [key, agg] : result.aggregates) {
        const auto& [variant, method, metric] = key;
        cells.push_back({{"variant", variant_name(variant)},
                         {"method", to_string(method)},
                         {"metric", to_string(metric)},
                         {"mean", agg.mean},
                         {"stddev", agg.stddev},
                         {"n", agg.n}});
    }
    doc["aggregates"] = std::move(cells);
    auto pvals = nlohmann::json::array();
    for (const auto& [key, p] : result.p_values) {
        const auto& [variant, method, metric] = key;
        pvals.push_back({{"variant", variant_name(variant)},
                         {"method", to_string(method)},
                         {"metric", to_string(metric)},
                         {"p_value", p}});
    }
    doc["p_values"] = std::move(pvals);
    doc["skipped"] = result.skipped;
    std::ofstream out(path);
    if (!out)
        throw_io("cannot write " + path);
    out << doc.dump(2) << '\n';
    if (!out)
        throw_io("write failed: " + path);
}

} // namespace decal
