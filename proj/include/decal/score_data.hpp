#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace decal {

// Whether a score is already a probability in [0,1] or an unbounded
// classifier margin (logit-like).
enum class ScoreSpace { probability, margin };

const char* to_string(ScoreSpace s);
ScoreSpace score_space_from_string(const std::string& s);

// Parallel arrays of model scores and binary labels, the currency of the
// whole pipeline. weights/group/month are optional; empty means absent.
struct ScoreSet {
    std::vector<double> scores;
    std::vector<int> labels; // 0/1
    std::vector<double> weights;
    std::vector<std::string> group;
    std::vector<int> month; // 1..8
    ScoreSpace score_space = ScoreSpace::probability;

    std::size_t size() const { return scores.size(); }
    bool has_weights() const { return !weights.empty(); }
    bool has_group() const { return !group.empty(); }
    bool has_month() const { return !month.empty(); }
    double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }

    std::size_t positives() const;

    // Throws ErrorCode::invalid_argument on any violated invariant.
    void validate() const;
};

// Fixed-width feature rows with label/group/month tags, stored row-major.
struct FeatureDataset {
    std::size_t n_features = 0;
    std::vector<double> features; // size() * n_features
    std::vector<int> labels;
    std::vector<std::string> group;
    std::vector<int> month;

    std::size_t size() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * n_features, n_features};
    }

    void push_row(std::span<const double> x, int label, std::string group_tag, int month_tag);
    void validate() const;
};

// Header names for load_scores; empty optional names mean "not present".
struct ColumnMap {
    std::string score = "score";
    std::string label = "label";
    std::string weight;
    std::string group;
    std::string month;
};

ScoreSet load_scores(const std::string& path, const ColumnMap& columns = {},
                     ScoreSpace space = ScoreSpace::probability);
void save_scores(const std::string& path, const ScoreSet& s);

FeatureDataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const FeatureDataset& d);

// Inclusive month range.
struct MonthRange {
    int lo = 1;
    int hi = 8;
    bool contains(int m) const { return m >= lo && m <= hi; }
    bool overlaps(const MonthRange& o) const { return lo <= o.hi && o.lo <= hi; }
};

// Partitions by month tag, preserving intra-part row order. Rows matching
// neither range are dropped. Throws if the ranges overlap or months are absent.
std::pair<ScoreSet, ScoreSet> split_by_month(const ScoreSet& s, MonthRange train, MonthRange test);
std::pair<FeatureDataset, FeatureDataset> split_by_month(const FeatureDataset& d, MonthRange train,
                                                         MonthRange test);

} // namespace decal
