#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "decal/calibrators.hpp"
#include "decal/score_data.hpp"
#include "decal/synthetic.hpp"

namespace decal {

struct SplitConfig {
    MonthRange train_months{1, 6};
    double validation_fraction = 0.2; // of the training-month rows, drawn once per variant
    MonthRange test_months{7, 8};
};

struct ExperimentConfig {
    std::vector<int> variants{0};
    std::vector<Method> methods{Method::identity, Method::platt, Method::isotonic,
                                Method::temperature, Method::beta};
    int n_bootstraps = 20;
    std::size_t n_rows = 50000;
    double target_recall = 0.95;
    double target_fpr = 0.05;
    std::uint64_t master_seed = 0;
    SplitConfig split;
    TrainSettings classifier;
    int ece_bins = 15;
    bool platt_smoothing = true;

    void validate() const;
};

ExperimentConfig load_config(const std::string& path);
std::string config_to_json_string(const ExperimentConfig& cfg);
ExperimentConfig config_from_json_string(const std::string& text);

enum class MetricId { precision, recall, tpr_at_fpr, ece, brier };
inline constexpr MetricId kAllMetrics[] = {MetricId::precision, MetricId::recall,
                                           MetricId::tpr_at_fpr, MetricId::ece, MetricId::brier};
const char* to_string(MetricId m);
MetricId metric_from_string(const std::string& name);

struct BootstrapRecord {
    int variant = 0;
    Method method = Method::identity;
    int bootstrap = 0;
    double precision = 0.0;
    double recall = 0.0;
    double tpr_at_fpr = 0.0;
    double ece = 0.0;
    double brier = 0.0;
    double threshold = 0.0; // frozen from bootstrap 0

    double metric(MetricId id) const;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0; // sample std, n-1 denominator; 0 for a single value
    int n = 0;
};

// mean and sample standard deviation; throws on empty input
Aggregate aggregate(std::span<const double> values);

using CellKey = std::tuple<int, Method, MetricId>; // (variant, method, metric)

struct ExperimentResult {
    std::vector<BootstrapRecord> records; // sorted by (variant, method, bootstrap)
    std::map<CellKey, Aggregate> aggregates;
    std::map<CellKey, double> p_values; // paired Wilcoxon vs identity, two-sided
    std::vector<std::string> skipped;   // "<variant>:<bootstrap>: reason"
};

// The five-phase bootstrap protocol: per variant, generate data and split
// it; per bootstrap, resample the training pool, train the baseline model,
// fit every calibration method on the fixed validation subset, freeze the
// per-method threshold at bootstrap 0, and evaluate on the test months.
// `jobs` bounds parallelism over bootstraps; results are identical for any
// jobs value.
ExperimentResult run(const ExperimentConfig& cfg, int jobs = 1);

// Recomputes aggregates (over the defined, non-NaN values per cell) and
// paired Wilcoxon p-values vs identity from bare records; sorts them.
ExperimentResult summarize(std::vector<BootstrapRecord> records);

bool higher_is_better(MetricId id); // false for ece and brier

// -- deterministic sub-steps, exposed so tests can replay the bookkeeping --

struct VariantData {
    FeatureDataset pool;       // bootstrap source (training months minus validation)
    FeatureDataset validation; // fixed per variant
    FeatureDataset test;
    std::vector<std::size_t> pool_rows; // original row ids in the generated dataset
    std::vector<std::size_t> validation_rows;
    std::vector<std::size_t> test_rows;
};

VariantData prepare_variant(const ExperimentConfig& cfg, int variant);

// with-replacement draw of pool indices for bootstrap b of `variant`
std::vector<std::size_t> bootstrap_rows(const ExperimentConfig& cfg, int variant, int bootstrap,
                                        std::size_t pool_size);

void write_records_csv(const std::string& path, const std::vector<BootstrapRecord>& records);
std::vector<BootstrapRecord> read_records_csv(const std::string& path);

// Companion document: aggregates plus Wilcoxon p-values, as JSON text.
void write_aggregates_json(const std::string& path, const ExperimentResult& result);

} // namespace decal
