#include "decal/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "decal/errors.hpp"
#include "decal/rng.hpp"

namespace decal {

namespace {

// Monthly fraud rate ramp, 0.85% in month 1 rising to 1.5% in month 8.
std::array<double, kMonths> base_ramp() {
    std::array<double, kMonths> r{};
    for (int m = 0; m < kMonths; ++m)
        r[m] = 0.0085 + (0.015 - 0.0085) * static_cast<double>(m) / (kMonths - 1);
    return r;
}

constexpr std::uint64_t kMonthStreamTag = 0x6d6f6e7468ULL;

} // namespace

void SyntheticSpec::validate() const {
    if (n_rows == 0)
        throw_invalid("n_rows must be positive");
    if (n_features < 1)
        throw_invalid("n_features must be >= 1");
    if (!(minority_fraction > 0.0 && minority_fraction < 1.0))
        throw_invalid("minority_fraction must lie in (0,1)");
    for (const auto& g : prevalence)
        for (double p : g)
            if (!(p > 0.0 && p < 1.0))
                throw_invalid("prevalence values must lie in (0,1)");
    for (double gap : separability_gap)
        if (!(gap >= 0.0) || !std::isfinite(gap))
            throw_invalid("separability gaps must be finite and nonnegative");
    if (!drift_shift.empty()) {
        if (drift_shift.size() != static_cast<std::size_t>(kMonths))
            throw_invalid("drift_shift must cover all months");
        for (const auto& row : drift_shift)
            if (row.size() != static_cast<std::size_t>(n_features))
                throw_invalid("drift_shift row width must equal n_features");
    }
}

SyntheticSpec base_spec(std::size_t n_rows, std::uint64_t seed) {
    SyntheticSpec s;
    s.n_rows = n_rows;
    s.seed = seed;
    auto ramp = base_ramp();
    s.prevalence = {ramp, ramp};
    return s;
}

SyntheticSpec variant_spec(int variant, std::size_t n_rows, std::uint64_t seed) {
    SyntheticSpec s = base_spec(n_rows, seed);
    auto ramp = base_ramp();
    switch (variant) {
    case 0:
        break;
    case 1:
        s.minority_fraction = 0.1;
        break;
    case 2:
        // Equal group sizes, minority at five times the majority rate,
        // monthly mean held at the base ramp: r + 5r = 2*ramp.
        s.minority_fraction = 0.5;
        for (int m = 0; m < kMonths; ++m) {
            s.prevalence[0][m] = ramp[m] / 3.0;
            s.prevalence[1][m] = 5.0 * ramp[m] / 3.0;
        }
        break;
    case 3:
        s.separability_gap = {2.5, 1.2};
        break;
    case 4:
        // Five-fold prevalence disparity in months 1-6 only; mean matches
        // the ramp given the 30% minority share.
        for (int m = 0; m < 6; ++m) {
            double r = ramp[m] / (1.0 + 4.0 * s.minority_fraction);
            s.prevalence[0][m] = r;
            s.prevalence[1][m] = 5.0 * r;
        }
        break;
    case 5: {
        // Balanced groups; fraud-class feature means ramp away from the
        // legitimate class across months, 90% of the class gap in total, so
        // scores drift upward relative to any threshold frozen early.
        s.minority_fraction = 0.5;
        double total = 0.90 * s.separability_gap[0] / std::sqrt(s.n_features);
        s.drift_shift.assign(kMonths, std::vector<double>(s.n_features, 0.0));
        for (int m = 0; m < kMonths; ++m)
            for (int j = 0; j < s.n_features; ++j)
                s.drift_shift[m][j] = total * static_cast<double>(m) / (kMonths - 1);
        break;
    }
    default:
        throw_invalid("variant must lie in 0..5");
    }
    return s;
}

const char* variant_name(int variant) {
    switch (variant) {
    case 0: return "base";
    case 1: return "I";
    case 2: return "II";
    case 3: return "III";
    case 4: return "IV";
    case 5: return "V";
    }
    throw_invalid("variant must lie in 0..5");
}

int variant_from_name(const std::string& name) {
    if (name == "base" || name == "0") return 0;
    if (name == "1" || name == "I") return 1;
    if (name == "2" || name == "II") return 2;
    if (name == "3" || name == "III") return 3;
    if (name == "4" || name == "IV") return 4;
    if (name == "5" || name == "V") return 5;
    throw_invalid("unknown variant: '" + name + "'");
}

FeatureDataset generate(const SyntheticSpec& spec) {
    spec.validate();

    FeatureDataset d;
    d.n_features = static_cast<std::size_t>(spec.n_features);
    d.features.reserve(spec.n_rows * d.n_features);
    d.labels.reserve(spec.n_rows);

    double unit = 1.0 / std::sqrt(static_cast<double>(spec.n_features));
    std::vector<double> x(d.n_features);
    for (int month = 1; month <= kMonths; ++month) {
        std::size_t rows = spec.n_rows / kMonths +
                           (static_cast<std::size_t>(month) <= spec.n_rows % kMonths ? 1 : 0);
        Rng rng(mix_seed({spec.seed, kMonthStreamTag, static_cast<std::uint64_t>(month)}));
        for (std::size_t r = 0; r < rows; ++r) {
            int group = rng.bernoulli(spec.minority_fraction) ? 1 : 0;
            int label = rng.bernoulli(spec.prevalence[group][month - 1]) ? 1 : 0;
            double mean = label == 1 ? spec.separability_gap[group] * unit : 0.0;
            for (std::size_t j = 0; j < d.n_features; ++j) {
                double shift =
                    label == 1 && !spec.drift_shift.empty() ? spec.drift_shift[month - 1][j] : 0.0;
                x[j] = rng.normal() + mean + shift;
            }
            d.push_row(x, label, group == 1 ? kMinorityTag : kMajorityTag, month);
        }
    }
    return d;
}

double logloss_gradient(const FeatureDataset& d, std::span<const double> weights, double bias,
                        std::span<double> grad_weights, double& grad_bias) {
    if (weights.size() != d.n_features || grad_weights.size() != d.n_features)
        throw_invalid("weight dimension mismatch");
    std::fill(grad_weights.begin(), grad_weights.end(), 0.0);
    grad_bias = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto row = d.row(i);
        double u = bias;
        for (std::size_t j = 0; j < d.n_features; ++j)
            u += weights[j] * row[j];
        double y = d.labels[i];
        if (u >= 0.0)
            loss += (1.0 - y) * u + std::log1p(std::exp(-u));
        else
            loss += -y * u + std::log1p(std::exp(u));
        double p = u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
        double r = p - y;
        for (std::size_t j = 0; j < d.n_features; ++j)
            grad_weights[j] += r * row[j];
        grad_bias += r;
    }
    double n = static_cast<double>(d.size());
    for (std::size_t j = 0; j < d.n_features; ++j)
        grad_weights[j] /= n;
    grad_bias /= n;
    return loss / n;
}

BaselineClassifier train_baseline(const FeatureDataset& train, const TrainSettings& settings) {
    train.validate();
    bool has_pos = false, has_neg = false;
    for (int y : train.labels)
        (y == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw_invalid("training needs both classes");
    if (settings.epochs < 1 || !(settings.learning_rate > 0.0))
        throw_invalid("bad training settings");

    BaselineClassifier c;
    c.weights.assign(train.n_features, 0.0);
    std::vector<double> grad(train.n_features);
    double grad_bias = 0.0;
    for (int epoch = 0; epoch < settings.epochs; ++epoch) {
        logloss_gradient(train, c.weights, c.bias, grad, grad_bias);
        for (std::size_t j = 0; j < train.n_features; ++j)
            c.weights[j] -= settings.learning_rate * grad[j];
        c.bias -= settings.learning_rate * grad_bias;
    }
    return c;
}

double mean_logloss(const BaselineClassifier& c, const FeatureDataset& d) {
    std::vector<double> grad(d.n_features);
    double grad_bias = 0.0;
    return logloss_gradient(d, c.weights, c.bias, grad, grad_bias);
}

ScoreSet score(const BaselineClassifier& c, const FeatureDataset& d) {
    if (c.weights.size() != d.n_features)
        throw_invalid("classifier dimension mismatch");
    ScoreSet s;
    s.score_space = ScoreSpace::probability;
    s.scores.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto row = d.row(i);
        double u = c.bias;
        for (std::size_t j = 0; j < d.n_features; ++j)
            u += c.weights[j] * row[j];
        s.scores.push_back(u >= 0.0 ? 1.0 / (1.0 + std::exp(-u))
                                    : std::exp(u) / (1.0 + std::exp(u)));
    }
    s.labels = d.labels;
    s.group = d.group;
    s.month = d.month;
    return s;
}

} // namespace decal
