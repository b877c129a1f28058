#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "decal/errors.hpp"
#include "decal/experiment.hpp"

namespace fs = std::filesystem;
using namespace decal;

namespace {

// Small but non-degenerate: every month keeps a handful of positives.
ExperimentConfig fast_config() {
    ExperimentConfig cfg;
    cfg.variants = {0};
    cfg.methods = {Method::identity, Method::platt, Method::isotonic};
    cfg.n_bootstraps = 4;
    cfg.n_rows = 8000;
    cfg.master_seed = 11;
    cfg.classifier = {1.0, 15};
    return cfg;
}

bool same_record(const BootstrapRecord& a, const BootstrapRecord& b) {
    return a.variant == b.variant && a.method == b.method && a.bootstrap == b.bootstrap &&
           a.precision == b.precision && a.recall == b.recall && a.tpr_at_fpr == b.tpr_at_fpr &&
           a.ece == b.ece && a.brier == b.brier && a.threshold == b.threshold;
}

bool same_result(const ExperimentResult& a, const ExperimentResult& b) {
    if (a.records.size() != b.records.size())
        return false;
    for (std::size_t i = 0; i < a.records.size(); ++i)
        if (!same_record(a.records[i], b.records[i]))
            return false;
    if (a.aggregates.size() != b.aggregates.size() || a.p_values != b.p_values ||
        a.skipped != b.skipped)
        return false;
    for (auto ita = a.aggregates.begin(), itb = b.aggregates.begin(); ita != a.aggregates.end();
         ++ita, ++itb) {
        if (ita->first != itb->first || ita->second.mean != itb->second.mean ||
            ita->second.stddev != itb->second.stddev || ita->second.n != itb->second.n)
            return false;
    }
    return true;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / ("decal_exp_" + name);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("aggregate matches the hand examples") {
    std::array<double, 3> v{10.0, 12.0, 14.0};
    auto a = aggregate(v);
    CHECK(a.mean == 12.0);
    CHECK(a.stddev == 2.0);
    CHECK(a.n == 3);

    std::array<double, 1> one{7.5};
    auto s = aggregate(one);
    CHECK(s.mean == 7.5);
    CHECK(s.stddev == 0.0);
    CHECK(s.n == 1);

    CHECK_THROWS_AS(aggregate({}), Error);
}

TEST_CASE("config JSON round trips including defaults") {
    ExperimentConfig cfg;
    cfg.variants = {0, 4, 5};
    cfg.methods = {Method::identity, Method::beta};
    cfg.n_bootstraps = 7;
    cfg.n_rows = 12345;
    cfg.target_recall = 0.9;
    cfg.target_fpr = 0.02;
    cfg.master_seed = 99;
    cfg.split.train_months = {2, 5};
    cfg.split.validation_fraction = 0.33;
    cfg.split.test_months = {6, 8};
    cfg.classifier = {0.25, 77};
    cfg.ece_bins = 10;
    cfg.platt_smoothing = false;

    auto back = config_from_json_string(config_to_json_string(cfg));
    CHECK(back.variants == cfg.variants);
    CHECK(back.methods == cfg.methods);
    CHECK(back.n_bootstraps == cfg.n_bootstraps);
    CHECK(back.n_rows == cfg.n_rows);
    CHECK(back.target_recall == cfg.target_recall);
    CHECK(back.target_fpr == cfg.target_fpr);
    CHECK(back.master_seed == cfg.master_seed);
    CHECK(back.split.train_months.lo == 2);
    CHECK(back.split.train_months.hi == 5);
    CHECK(back.split.validation_fraction == cfg.split.validation_fraction);
    CHECK(back.split.test_months.lo == 6);
    CHECK(back.split.test_months.hi == 8);
    CHECK(back.classifier.learning_rate == cfg.classifier.learning_rate);
    CHECK(back.classifier.epochs == cfg.classifier.epochs);
    CHECK(back.ece_bins == cfg.ece_bins);
    CHECK(back.platt_smoothing == cfg.platt_smoothing);

    // Omitted fields keep defaults; variants accept names and numbers.
    auto sparse = config_from_json_string(R"({"variants": ["V", 0], "master_seed": 5})");
    CHECK(sparse.variants == std::vector<int>{5, 0});
    CHECK(sparse.n_bootstraps == ExperimentConfig{}.n_bootstraps);
    CHECK(sparse.split.validation_fraction == ExperimentConfig{}.split.validation_fraction);
    CHECK(sparse.methods == ExperimentConfig{}.methods);
}

TEST_CASE("config parsing separates parse, schema, and value errors") {
    auto code_of = [](const std::string& text) {
        try {
            config_from_json_string(text);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::io; // placeholder never hit below
    };
    CHECK(code_of("{nope") == ErrorCode::parse);
    CHECK(code_of(R"({"n_bootstraps": "many"})") == ErrorCode::schema);
    CHECK(code_of(R"({"methods": ["sigmoidish"]})") == ErrorCode::unknown_method);
    CHECK(code_of(R"({"n_bootstraps": 0})") == ErrorCode::invalid_argument);
    CHECK(code_of(R"({"variants": []})") == ErrorCode::invalid_argument);
    CHECK(code_of(R"({"split": {"validation_fraction": 1.0}})") == ErrorCode::invalid_argument);
    CHECK(code_of(R"({"split": {"train_months": [1, 8]}})") == ErrorCode::invalid_argument);
    CHECK(code_of(R"({"ece_bins": 0})") == ErrorCode::invalid_argument);
    CHECK(code_of(R"({"classifier": {"epochs": 0}})") == ErrorCode::invalid_argument);

    CHECK_THROWS_AS(load_config("/nonexistent/decal.json"), Error);
}

TEST_CASE("single-bootstrap aggregates equal the lone record with zero spread") {
    auto cfg = fast_config();
    cfg.n_bootstraps = 1;
    auto result = run(cfg);
    REQUIRE(result.records.size() == cfg.methods.size());
    REQUIRE(result.skipped.empty());
    for (const auto& r : result.records) {
        for (MetricId id : kAllMetrics) {
            if (std::isnan(r.metric(id)))
                continue;
            const auto& agg = result.aggregates.at({r.variant, r.method, id});
            CHECK(agg.mean == r.metric(id));
            CHECK(agg.stddev == 0.0);
            CHECK(agg.n == 1);
        }
    }
}

TEST_CASE("runs are bit-identical across repeats and jobs counts") {
    auto cfg = fast_config();
    auto a = run(cfg, 1);
    auto b = run(cfg, 1);
    auto c = run(cfg, 3);
    CHECK(same_result(a, b));
    CHECK(same_result(a, c));
    REQUIRE(a.records.size() == cfg.methods.size() * cfg.n_bootstraps);
}

TEST_CASE("thresholds stay frozen at their bootstrap-zero value") {
    auto cfg = fast_config();
    cfg.variants = {0, 5};
    auto result = run(cfg, 2);
    std::map<std::pair<int, Method>, double> first;
    for (const auto& r : result.records)
        if (r.bootstrap == 0)
            first[{r.variant, r.method}] = r.threshold;
    REQUIRE(first.size() == cfg.variants.size() * cfg.methods.size());
    for (const auto& r : result.records)
        CHECK(r.threshold == first.at({r.variant, r.method}));
}

TEST_CASE("adding a drifted variant leaves base records untouched") {
    auto cfg = fast_config();
    auto base_only = run(cfg);
    cfg.variants = {0, 5};
    auto both = run(cfg);
    std::vector<BootstrapRecord> base_part;
    for (const auto& r : both.records)
        if (r.variant == 0)
            base_part.push_back(r);
    REQUIRE(base_part.size() == base_only.records.size());
    for (std::size_t i = 0; i < base_part.size(); ++i)
        CHECK(same_record(base_part[i], base_only.records[i]));
}

TEST_CASE("no validation or test row leaks into any bootstrap sample") {
    auto cfg = fast_config();
    auto vd = prepare_variant(cfg, 0);

    std::set<std::size_t> validation(vd.validation_rows.begin(), vd.validation_rows.end());
    std::set<std::size_t> test(vd.test_rows.begin(), vd.test_rows.end());
    for (std::size_t id : vd.pool_rows) {
        CHECK(validation.count(id) == 0);
        CHECK(test.count(id) == 0);
    }
    // The three parts are disjoint and the sampler stays inside the pool, so
    // bootstrap training rows can only be pool rows.
    for (int b = 0; b < cfg.n_bootstraps; ++b) {
        auto rows = bootstrap_rows(cfg, 0, b, vd.pool_rows.size());
        CHECK(rows.size() == vd.pool_rows.size());
        for (std::size_t r : rows) {
            REQUIRE(r < vd.pool_rows.size());
            std::size_t original = vd.pool_rows[r];
            CHECK(validation.count(original) == 0);
            CHECK(test.count(original) == 0);
        }
    }
    // Same (variant, bootstrap) stream every time.
    CHECK(bootstrap_rows(cfg, 0, 2, 100) == bootstrap_rows(cfg, 0, 2, 100));
    CHECK(bootstrap_rows(cfg, 0, 2, 100) != bootstrap_rows(cfg, 0, 3, 100));
    CHECK(bootstrap_rows(cfg, 0, 2, 100) != bootstrap_rows(cfg, 5, 2, 100));
}

TEST_CASE("validation splits carve the training months exactly") {
    auto cfg = fast_config();
    cfg.split.train_months = {1, 6};
    cfg.split.validation_fraction = 0.25;
    auto vd = prepare_variant(cfg, 0);

    std::size_t train_rows = 0;
    for (int m = cfg.split.train_months.lo; m <= cfg.split.train_months.hi; ++m)
        train_rows += cfg.n_rows / 8;
    CHECK(vd.validation_rows.size() ==
          static_cast<std::size_t>(std::floor(0.25 * static_cast<double>(train_rows))));
    CHECK(vd.validation_rows.size() + vd.pool_rows.size() == train_rows);
    CHECK(vd.pool.size() == vd.pool_rows.size());
    CHECK(vd.validation.size() == vd.validation_rows.size());
    CHECK(vd.test.size() == vd.test_rows.size());
    for (int m : vd.test.month)
        CHECK(cfg.split.test_months.contains(m));
    for (int m : vd.pool.month)
        CHECK(cfg.split.train_months.contains(m));
    for (int m : vd.validation.month)
        CHECK(cfg.split.train_months.contains(m));
}

TEST_CASE("identity recall stays near target on a drift-free variant") {
    ExperimentConfig cfg;
    cfg.variants = {0};
    cfg.methods = {Method::identity};
    cfg.n_bootstraps = 20;
    cfg.n_rows = 50000;
    cfg.master_seed = 42;
    cfg.split.validation_fraction = 0.25;
    cfg.classifier = {1.0, 60};
    auto result = run(cfg, 2);
    REQUIRE(result.records.size() == 20);
    for (const auto& r : result.records)
        CHECK(std::abs(r.recall - cfg.target_recall) < 0.05);
}

TEST_CASE("degenerate splits are skipped with a logged reason") {
    // Train month 1 only, tiny pool: the labels run out deterministically.
    ExperimentConfig cfg;
    cfg.variants = {0};
    cfg.methods = {Method::identity, Method::platt};
    cfg.n_bootstraps = 12;
    cfg.n_rows = 4000;
    cfg.split.train_months = {1, 1};
    cfg.split.validation_fraction = 0.6;
    cfg.classifier = {1.0, 10};

    cfg.master_seed = 1; // validation draws no positive rows
    auto no_val = run(cfg);
    REQUIRE(no_val.skipped.size() == 1);
    CHECK(no_val.skipped[0] == "base:*: single-class validation set, variant skipped");
    CHECK(no_val.records.empty());

    cfg.master_seed = 2; // bootstrap 0 degenerates, so no thresholds exist
    auto no_first = run(cfg);
    REQUIRE(no_first.skipped.size() == 1);
    CHECK(no_first.skipped[0] ==
          "base:0: single-class training sample; thresholds unavailable, variant skipped");
    CHECK(no_first.records.empty());

    cfg.master_seed = 4; // bootstraps 3 and 5 degenerate, the rest continue
    auto partial = run(cfg);
    CHECK(partial.skipped ==
          std::vector<std::string>{"base:3: single-class training sample",
                                   "base:5: single-class training sample"});
    std::set<int> seen;
    for (const auto& r : partial.records)
        seen.insert(r.bootstrap);
    CHECK(seen == std::set<int>{0, 1, 2, 4, 6, 7, 8, 9, 10, 11});
    REQUIRE(partial.records.size() == 2 * 10);
    // Wilcoxon pairing over the surviving common bootstraps still happens.
    CHECK(partial.p_values.count({0, Method::platt, MetricId::brier}) == 1);
}

TEST_CASE("summarize recomputes exactly what run stored") {
    auto cfg = fast_config();
    auto result = run(cfg);
    auto redone = summarize(result.records);
    CHECK(same_result(ExperimentResult{result.records, result.aggregates, result.p_values, {}},
                      redone));
}

TEST_CASE("records survive the CSV round trip exactly") {
    auto cfg = fast_config();
    auto result = run(cfg);
    TempDir dir("csvrt");
    auto path = dir.file("records.csv");
    write_records_csv(path, result.records);
    auto back = read_records_csv(path);
    REQUIRE(back.size() == result.records.size());
    for (std::size_t i = 0; i < back.size(); ++i)
        CHECK(same_record(back[i], result.records[i]));

    CHECK_THROWS_AS(read_records_csv(dir.file("missing.csv")), Error);
    std::ofstream bad(dir.file("bad.csv"));
    bad << "variant,method\nbase,identity\n";
    bad.close();
    CHECK_THROWS_AS(read_records_csv(dir.file("bad.csv")), Error);
}

TEST_CASE("aggregates JSON carries every cell, p-value, and skip note") {
    auto cfg = fast_config();
    auto result = run(cfg);
    TempDir dir("aggjson");
    auto path = dir.file("aggregates.json");
    write_aggregates_json(path, result);

    std::ifstream in(path);
    REQUIRE(in.good());
    nlohmann::json doc = nlohmann::json::parse(in);
    CHECK(doc.contains("schema_version"));
    REQUIRE(doc.contains("aggregates"));
    REQUIRE(doc.contains("p_values"));
    CHECK(doc["skipped"].is_array());

    std::map<std::tuple<std::string, std::string, std::string>, std::pair<double, double>> cells;
    for (const auto& c : doc["aggregates"])
        cells[{c["variant"].get<std::string>(), c["method"].get<std::string>(),
               c["metric"].get<std::string>()}] = {c["mean"].get<double>(),
                                                   c["stddev"].get<double>()};
    REQUIRE(cells.size() == result.aggregates.size());
    for (const auto& [key, agg] : result.aggregates) {
        const auto& [variant, method, metric] = key;
        auto it = cells.find({variant_name(variant), to_string(method), to_string(metric)});
        REQUIRE(it != cells.end());
        CHECK(it->second.first == agg.mean);
        CHECK(it->second.second == agg.stddev);
    }
    CHECK(doc["p_values"].size() == result.p_values.size());
}

TEST_CASE("metric names round trip and classify direction") {
    for (MetricId m : kAllMetrics)
        CHECK(metric_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(metric_from_string("auc"), Error);
    CHECK(higher_is_better(MetricId::precision));
    CHECK(higher_is_better(MetricId::recall));
    CHECK(higher_is_better(MetricId::tpr_at_fpr));
    CHECK_FALSE(higher_is_better(MetricId::ece));
    CHECK_FALSE(higher_is_better(MetricId::brier));
}
