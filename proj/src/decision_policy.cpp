#include "decal/decision_policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "decal/errors.hpp"
#include "decal/version.hpp"

namespace decal {

ThresholdPolicy select_threshold(const ScoreSet& calibrated_val, double target_recall,
                                 std::string source) {
    if (!(target_recall > 0.0 && target_recall <= 1.0))
        throw_invalid("target_recall must lie in (0,1]");

    std::vector<double> pos_scores;
    for (std::size_t i = 0; i < calibrated_val.size(); ++i)
        if (calibrated_val.labels[i] == 1)
            pos_scores.push_back(calibrated_val.scores[i]);
    if (pos_scores.empty())
        throw_invalid("threshold selection needs at least one positive label");

    // recall(t) = fraction of positive scores >= t; candidates are the
    // positive scores sorted descending, where recall steps up.
    std::sort(pos_scores.begin(), pos_scores.end(), std::greater<>());
    double n_pos = static_cast<double>(pos_scores.size());
    double chosen = pos_scores.back();
    for (std::size_t k = 0; k < pos_scores.size(); ++k) {
        double t = pos_scores[k];
        std::size_t covered = k + 1;
        while (k + 1 < pos_scores.size() && pos_scores[k + 1] == t) {
            ++k;
            ++covered;
        }
        if (static_cast<double>(covered) / n_pos >= target_recall) {
            chosen = t;
            break;
        }
    }

    ThresholdPolicy p;
    p.threshold = chosen;
    p.target_recall = target_recall;
    p.source = std::move(source);
    p.score_space = calibrated_val.score_space;
    return p;
}

Decision decide(const ThresholdPolicy& policy, double calibrated_score) {
    if (!std::isfinite(calibrated_score))
        throw_invalid("non-finite score");
    return calibrated_score >= policy.threshold ? Decision::reject : Decision::approve;
}

void save_policy(const std::string& path, const ThresholdPolicy& p) {
    nlohmann::json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["threshold"] = p.threshold;
    doc["target_recall"] = p.target_recall;
    doc["source"] = p.source;
    doc["score_space"] = to_string(p.score_space);
    std::ofstream out(path);
    if (!out)
        throw_io("cannot write " + path);
    out << doc.dump(2) << '\n';
    if (!out)
        throw_io("write failed: " + path);
}

ThresholdPolicy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw_io("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw_parse(path + ": " + e.what());
    }
    if (!doc.contains("schema_version"))
        throw_schema(path + ": missing schema_version");
    if (doc["schema_version"].get<int>() != kSchemaVersion)
        throw_schema(path + ": unsupported schema_version");
    try {
        ThresholdPolicy p;
        p.threshold = doc.at("threshold").get<double>();
        p.target_recall = doc.at("target_recall").get<double>();
        p.source = doc.value("source", std::string());
        p.score_space = score_space_from_string(doc.value("score_space", "probability"));
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw_schema(path + ": " + e.what());
    }
}

} // namespace decal
