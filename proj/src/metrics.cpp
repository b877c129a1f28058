#include "decal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "decal/calibrators.hpp"
#include "decal/errors.hpp"

namespace decal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_probability_space(const ScoreSet& s, const char* what) {
    if (s.score_space != ScoreSpace::probability)
        throw_invalid(std::string(what) + " needs probability-space scores");
}

} // namespace

ConfusionCounts confusion_at(const ScoreSet& s, double threshold) {
    ConfusionCounts c;
    for (std::size_t i = 0; i < s.size(); ++i) {
        bool predicted = s.scores[i] >= threshold;
        if (s.labels[i] == 1)
            (predicted ? c.tp : c.fn) += 1;
        else
            (predicted ? c.fp : c.tn) += 1;
    }
    return c;
}

double precision(const ConfusionCounts& c) {
    return c.tp + c.fp == 0 ? kNaN : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const ConfusionCounts& c) {
    return c.tp + c.fn == 0 ? kNaN : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double fpr(const ConfusionCounts& c) {
    return c.fp + c.tn == 0 ? kNaN : static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
}

OperatingPoint tpr_at_fpr(const ScoreSet& s, double target_fpr) {
    if (!(target_fpr > 0.0 && target_fpr < 1.0))
        throw_invalid("target_fpr must lie in (0,1)");
    std::int64_t n_pos = 0, n_neg = 0;
    for (int y : s.labels)
        (y == 1 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw_invalid("tpr_at_fpr needs both classes");

    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });

    // Sweep thresholds downward through the unique scores; the virtual
    // threshold just above the maximum (nothing predicted positive) seeds
    // the feasible starting point.
    OperatingPoint best{0.0, 0.0,
                        std::nextafter(s.scores[order[0]], std::numeric_limits<double>::infinity())};
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        double t = s.scores[order[i]];
        while (i < order.size() && s.scores[order[i]] == t) {
            (s.labels[order[i]] == 1 ? tp : fp) += 1;
            ++i;
        }
        double cur_fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
        double cur_tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
        if (cur_fpr <= target_fpr && cur_tpr > best.tpr)
            best = {cur_tpr, cur_fpr, t};
    }
    return best;
}

std::vector<ReliabilityBin> reliability_bins(const ScoreSet& s, int bins) {
    require_probability_space(s, "reliability_bins");
    if (bins < 1)
        throw_invalid("bins must be >= 1");

    std::vector<ReliabilityBin> out(bins);
    std::vector<double> sum_p(bins, 0.0), sum_y(bins, 0.0);
    for (int b = 0; b < bins; ++b) {
        out[b].lo = static_cast<double>(b) / bins;
        out[b].hi = static_cast<double>(b + 1) / bins;
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        double p = s.scores[i];
        int idx = static_cast<int>(std::ceil(p * bins)) - 1;
        idx = std::clamp(idx, 0, bins - 1);
        out[idx].count += 1;
        sum_p[idx] += p;
        sum_y[idx] += s.labels[i];
    }
    for (int b = 0; b < bins; ++b) {
        if (out[b].count == 0) {
            out[b].mean_predicted = kNaN;
            out[b].empirical_rate = kNaN;
        } else {
            out[b].mean_predicted = sum_p[b] / out[b].count;
            out[b].empirical_rate = sum_y[b] / out[b].count;
        }
    }
    return out;
}

double ece(const ScoreSet& s, int bins) {
    auto rb = reliability_bins(s, bins);
    if (s.size() == 0)
        return 0.0;
    double acc = 0.0;
    for (const auto& b : rb)
        if (b.count > 0)
            acc += static_cast<double>(b.count) / static_cast<double>(s.size()) *
                   std::fabs(b.mean_predicted - b.empirical_rate);
    return acc;
}

double brier(const ScoreSet& s) {
    require_probability_space(s, "brier");
    if (s.size() == 0)
        return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double d = s.labels[i] - s.scores[i];
        acc += d * d;
    }
    return acc / static_cast<double>(s.size());
}

double nll(const ScoreSet& s) {
    require_probability_space(s, "nll");
    if (s.size() == 0)
        return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double p = std::clamp(s.scores[i], kProbClamp, 1.0 - kProbClamp);
        acc += s.labels[i] == 1 ? -std::log(p) : -std::log1p(-p);
    }
    return acc / static_cast<double>(s.size());
}

MetricsReport evaluate_at(const ScoreSet& calibrated, double threshold, int ece_bins) {
    require_probability_space(calibrated, "evaluate_at");
    MetricsReport r;
    r.threshold = threshold;
    r.confusion = confusion_at(calibrated, threshold);
    r.precision = precision(r.confusion);
    r.recall = recall(r.confusion);
    r.fpr = fpr(r.confusion);
    r.bins = reliability_bins(calibrated, ece_bins);
    r.ece = ece(calibrated, ece_bins);
    r.brier = brier(calibrated);
    r.nll = nll(calibrated);
    return r;
}

} // namespace decal
