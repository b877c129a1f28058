#pragma once

#include <cstdint>
#include <vector>

#include "decal/score_data.hpp"

namespace decal {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;

    std::int64_t total() const { return tp + fp + tn + fn; }
};

// Decision rule everywhere: predict positive iff score >= threshold.
ConfusionCounts confusion_at(const ScoreSet& s, double threshold);

// Ratios return NaN when their denominator is zero ("undefined", never thrown).
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double fpr(const ConfusionCounts& c);

struct OperatingPoint {
    double tpr = 0.0;
    double fpr = 0.0;
    double threshold = 0.0;
};

// Best TPR subject to FPR <= target_fpr; among thresholds attaining it the
// largest one is returned. Requires both classes and 0 < target_fpr < 1.
OperatingPoint tpr_at_fpr(const ScoreSet& s, double target_fpr);

struct ReliabilityBin {
    double lo = 0.0;
    double hi = 0.0;
    double mean_predicted = 0.0; // NaN when empty
    double empirical_rate = 0.0; // NaN when empty
    std::int64_t count = 0;
};

// Equal-width right-closed bins on [0,1]; a score of exactly 0 falls in the
// first bin, 1.0 in the last. Probability-space scores only.
std::vector<ReliabilityBin> reliability_bins(const ScoreSet& s, int bins);

// sum_b (n_b/n) * |mean predicted_b - empirical rate_b|
double ece(const ScoreSet& s, int bins = 15);

double brier(const ScoreSet& s);
double nll(const ScoreSet& s);

struct MetricsReport {
    double threshold = 0.0;
    ConfusionCounts confusion;
    double precision = 0.0;
    double recall = 0.0;
    double fpr = 0.0;
    double ece = 0.0;
    double brier = 0.0;
    double nll = 0.0;
    std::vector<ReliabilityBin> bins;
};

MetricsReport evaluate_at(const ScoreSet& calibrated, double threshold, int ece_bins = 15);

} // namespace decal
