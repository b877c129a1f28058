#include "decal/score_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "decal/csv.hpp"
#include "decal/errors.hpp"

namespace decal {

const char* to_string(ScoreSpace s) {
    return s == ScoreSpace::probability ? "probability" : "margin";
}

ScoreSpace score_space_from_string(const std::string& s) {
    if (s == "probability")
        return ScoreSpace::probability;
    if (s == "margin")
        return ScoreSpace::margin;
    throw_invalid("unknown score space: '" + s + "'");
}

std::size_t ScoreSet::positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

void ScoreSet::validate() const {
    if (labels.size() != scores.size())
        throw_invalid("scores/labels length mismatch");
    if (!weights.empty() && weights.size() != scores.size())
        throw_invalid("weights length mismatch");
    if (!group.empty() && group.size() != scores.size())
        throw_invalid("group length mismatch");
    if (!month.empty() && month.size() != scores.size())
        throw_invalid("month length mismatch");
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i]))
            throw_invalid("non-finite score at row " + std::to_string(i));
        if (score_space == ScoreSpace::probability && (scores[i] < 0.0 || scores[i] > 1.0))
            throw_invalid("probability score out of [0,1] at row " + std::to_string(i));
        if (labels[i] != 0 && labels[i] != 1)
            throw_invalid("label not 0/1 at row " + std::to_string(i));
        if (!weights.empty() && !(weights[i] > 0.0 && std::isfinite(weights[i])))
            throw_invalid("non-positive weight at row " + std::to_string(i));
    }
}

void FeatureDataset::push_row(std::span<const double> x, int label, std::string group_tag,
                              int month_tag) {
    if (n_features == 0)
        n_features = x.size();
    if (x.size() != n_features)
        throw_invalid("feature row width mismatch");
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(label);
    group.push_back(std::move(group_tag));
    month.push_back(month_tag);
}

void FeatureDataset::validate() const {
    if (n_features == 0)
        throw_invalid("dataset has no feature columns");
    if (features.size() != labels.size() * n_features)
        throw_invalid("feature matrix size mismatch");
    if (group.size() != labels.size() || month.size() != labels.size())
        throw_invalid("group/month length mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw_invalid("label not 0/1 at row " + std::to_string(i));
    }
    for (double v : features)
        if (!std::isfinite(v))
            throw_invalid("non-finite feature value");
}

ScoreSet load_scores(const std::string& path, const ColumnMap& columns, ScoreSpace space) {
    CsvTable t = read_csv(path);

    int ci_score = t.column(columns.score);
    int ci_label = t.column(columns.label);
    if (ci_score < 0)
        throw_schema(path + ": missing column '" + columns.score + "'");
    if (ci_label < 0)
        throw_schema(path + ": missing column '" + columns.label + "'");

    auto optional_column = [&](const std::string& name) {
        if (name.empty())
            return -1;
        int c = t.column(name);
        if (c < 0)
            throw_schema(path + ": missing column '" + name + "'");
        return c;
    };
    int ci_weight = optional_column(columns.weight);
    int ci_group = optional_column(columns.group);
    int ci_month = optional_column(columns.month);

    ScoreSet s;
    s.score_space = space;
    s.scores.reserve(t.rows.size());
    s.labels.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        std::string ctx = path + " row " + std::to_string(r + 2);
        s.scores.push_back(parse_double(row[ci_score], ctx));
        s.labels.push_back(static_cast<int>(parse_long(row[ci_label], ctx)));
        if (ci_weight >= 0)
            s.weights.push_back(parse_double(row[ci_weight], ctx));
        if (ci_group >= 0)
            s.group.push_back(row[ci_group]);
        if (ci_month >= 0)
            s.month.push_back(static_cast<int>(parse_long(row[ci_month], ctx)));
    }
    s.validate();
    return s;
}

void save_scores(const std::string& path, const ScoreSet& s) {
    s.validate();
    std::ofstream out(path);
    if (!out)
        throw_io("cannot write " + path);
    out << "score,label";
    if (s.has_weights())
        out << ",weight";
    if (s.has_group())
        out << ",group";
    if (s.has_month())
        out << ",month";
    out << '\n';
    for (std::size_t i = 0; i < s.size(); ++i) {
        out << format_double(s.scores[i]) << ',' << s.labels[i];
        if (s.has_weights())
            out << ',' << format_double(s.weights[i]);
        if (s.has_group())
            out << ',' << s.group[i];
        if (s.has_month())
            out << ',' << s.month[i];
        out << '\n';
    }
    if (!out)
        throw_io("write failed: " + path);
}

FeatureDataset load_dataset(const std::string& path) {
    CsvTable t = read_csv(path);

    std::vector<int> feature_cols;
    for (std::size_t c = 0; c < t.header.size(); ++c)
        if (t.header[c].rfind("x", 0) == 0 &&
            t.header[c].find_first_not_of("0123456789", 1) == std::string::npos &&
            t.header[c].size() > 1)
            feature_cols.push_back(static_cast<int>(c));
    if (feature_cols.empty())
        throw_schema(path + ": no feature columns (x0, x1, ...)");

    int ci_label = t.column("label");
    int ci_group = t.column("group");
    int ci_month = t.column("month");
    if (ci_label < 0 || ci_group < 0 || ci_month < 0)
        throw_schema(path + ": need label, group and month columns");

    FeatureDataset d;
    d.n_features = feature_cols.size();
    std::vector<double> x(d.n_features);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        std::string ctx = path + " row " + std::to_string(r + 2);
        for (std::size_t j = 0; j < feature_cols.size(); ++j)
            x[j] = parse_double(row[feature_cols[j]], ctx);
        d.push_row(x, static_cast<int>(parse_long(row[ci_label], ctx)), row[ci_group],
                   static_cast<int>(parse_long(row[ci_month], ctx)));
    }
    d.validate();
    return d;
}

void save_dataset(const std::string& path, const FeatureDataset& d) {
    d.validate();
    std::ofstream out(path);
    if (!out)
        throw_io("cannot write " + path);
    for (std::size_t j = 0; j < d.n_features; ++j)
        out << 'x' << j << ',';
    out << "label,group,month\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto row = d.row(i);
        for (double v : row)
            out << format_double(v) << ',';
        out << d.labels[i] << ',' << d.group[i] << ',' << d.month[i] << '\n';
    }
    if (!out)
        throw_io("write failed: " + path);
}

namespace {

template <typename T, typename CopyRow>
std::pair<T, T> split_impl(const T& src, std::size_t n, const std::vector<int>& month,
                           MonthRange train, MonthRange test, CopyRow copy_row) {
    if (train.overlaps(test))
        throw_invalid("train/test month ranges overlap");
    if (month.empty())
        throw_invalid("month tags required for a month split");
    std::pair<T, T> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (train.contains(month[i]))
            copy_row(out.first, src, i);
        else if (test.contains(month[i]))
            copy_row(out.second, src, i);
    }
    return out;
}

} // namespace

std::pair<ScoreSet, ScoreSet> split_by_month(const ScoreSet& s, MonthRange train, MonthRange test) {
    auto copy_row = [](ScoreSet& dst, const ScoreSet& src, std::size_t i) {
        dst.score_space = src.score_space;
        dst.scores.push_back(src.scores[i]);
        dst.labels.push_back(src.labels[i]);
        if (src.has_weights())
            dst.weights.push_back(src.weights[i]);
        if (src.has_group())
            dst.group.push_back(src.group[i]);
        dst.month.push_back(src.month[i]);
    };
    return split_impl(s, s.size(), s.month, train, test, copy_row);
}

std::pair<FeatureDataset, FeatureDataset> split_by_month(const FeatureDataset& d, MonthRange train,
                                                         MonthRange test) {
    auto copy_row = [](FeatureDataset& dst, const FeatureDataset& src, std::size_t i) {
        dst.push_row(src.row(i), src.labels[i], src.group[i], src.month[i]);
    };
    return split_impl(d, d.size(), d.month, train, test, copy_row);
}

} // namespace decal
