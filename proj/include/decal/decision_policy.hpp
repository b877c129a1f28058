#pragma once

#include <string>

#include "decal/score_data.hpp"

namespace decal {

// A decision threshold frozen once, plus the provenance it was derived
// from. The whole point is that it does not adapt afterwards.
struct ThresholdPolicy {
    double threshold = 0.0;
    double target_recall = 0.0; // (0, 1]
    std::string source;         // e.g. "variant=base;method=isotonic;bootstrap=0"
    ScoreSpace score_space = ScoreSpace::probability;
};

// Largest threshold, taken from the observed positive-class scores, whose
// recall under the >= rule meets target_recall on `calibrated_val`.
ThresholdPolicy select_threshold(const ScoreSet& calibrated_val, double target_recall,
                                 std::string source = {});

enum class Decision { approve, reject };

// reject (flag as fraud) iff score >= policy.threshold
Decision decide(const ThresholdPolicy& policy, double calibrated_score);

// JSON document {schema_version, threshold, target_recall, source, score_space}.
void save_policy(const std::string& path, const ThresholdPolicy& p);
ThresholdPolicy load_policy(const std::string& path);

} // namespace decal
