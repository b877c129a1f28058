#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "decal/score_data.hpp"

namespace decal {

inline constexpr int kMonths = 8;
inline constexpr const char* kMajorityTag = "g0";
inline constexpr const char* kMinorityTag = "g1";

// Knobs for the synthetic fraud-score testbed: two demographic groups with
// configurable size, per-month fraud prevalence, per-group separability and
// an optional per-month shift of the fraud-class feature means.
struct SyntheticSpec {
    std::size_t n_rows = 0;
    int n_features = 8;
    double minority_fraction = 0.3;
    // prevalence[group][month-1]; group 0 = majority, 1 = minority
    std::array<std::array<double, kMonths>, 2> prevalence{};
    // distance between class-conditional feature means, per group
    std::array<double, 2> separability_gap{1.0, 1.0};
    // per-month additive shift of the fraud-class mean, kMonths x n_features;
    // empty means no drift
    std::vector<std::vector<double>> drift_shift;
    std::uint64_t seed = 0;

    void validate() const;
};

// Base testbed: monthly fraud rate ramping 0.85% -> 1.5%, 30% minority,
// equal separability, no drift.
SyntheticSpec base_spec(std::size_t n_rows, std::uint64_t seed);

// variant 0 is the base; 1..5 add one disparity/drift pattern each:
//   1  minority group shrunk to 10%
//   2  equal group sizes, one group 5x the fraud rate
//   3  better separability for the majority group
//   4  5x prevalence disparity during months 1-6 only
//   5  balanced groups, fraud-class feature means shifting over months
SyntheticSpec variant_spec(int variant, std::size_t n_rows, std::uint64_t seed);

const char* variant_name(int variant);
int variant_from_name(const std::string& name);

// Deterministic given the spec (including its seed). Rows are laid out
// month by month, n_rows/8 rows each with the remainder on early months.
FeatureDataset generate(const SyntheticSpec& spec);

struct TrainSettings {
    double learning_rate = 0.5;
    int epochs = 200;
};

// Linear-logistic scorer; deliberately simple so that calibration, not
// model capacity, is what the experiments exercise.
struct BaselineClassifier {
    std::vector<double> weights;
    double bias = 0.0;
};

// Full-batch gradient descent on mean log-loss. Deterministic given data
// order and settings. Throws on single-class input.
BaselineClassifier train_baseline(const FeatureDataset& train, const TrainSettings& settings = {});

// Mean log-loss of the classifier on d (clamped probabilities).
double mean_logloss(const BaselineClassifier& c, const FeatureDataset& d);

// Loss and gradient at an arbitrary parameter point; the training loop uses
// this and the finite-difference tests probe it.
double logloss_gradient(const FeatureDataset& d, std::span<const double> weights, double bias,
                        std::span<double> grad_weights, double& grad_bias);

// Probability-space scores with labels/group/month carried through.
ScoreSet score(const BaselineClassifier& c, const FeatureDataset& d);

} // namespace decal
