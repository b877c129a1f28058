#pragma once

#include <string>
#include <variant>
#include <vector>

#include "decal/score_data.hpp"

namespace decal {

// P(y=1|s) = 1 / (1 + exp(a*s + b)). For positively oriented scores the
// fitted `a` comes out negative; the sign convention is kept as-is.
struct PlattParams {
    double a = 0.0;
    double b = 0.0;
};

// Pooled-block representation of the isotonic fit: breakpoints are the
// blocks' weighted mean scores (strictly increasing), values the block
// means (nondecreasing, in [0,1]).
struct IsotonicModel {
    std::vector<double> breakpoints;
    std::vector<double> values;
};

struct TemperatureParams {
    double temperature = 1.0; // search bounds [0.05, 20]
};

// m(p; a, b, c) = p^a * c / (p^a * c + (1-p)^b), a,b >= 0, c > 0.
struct BetaParams {
    double a = 1.0;
    double b = 1.0;
    double c = 1.0;
};

enum class Method { identity, platt, isotonic, temperature, beta };

const char* to_string(Method m);
Method method_from_string(const std::string& name); // throws unknown_method

inline constexpr double kProbClamp = 1e-12;

// clamp to [kProbClamp, 1-kProbClamp], then ln(p/(1-p)); total and monotone
double to_logit(double p);
double sigmoid(double z);

// A fitted, tagged transform raw score -> calibrated probability, together
// with the score space it was fitted on. Immutable once constructed.
class Calibrator {
public:
    using Params = std::variant<std::monostate, PlattParams, IsotonicModel, TemperatureParams, BetaParams>;

    static Calibrator identity(ScoreSpace space);
    static Calibrator platt(PlattParams p, ScoreSpace space);
    static Calibrator isotonic(IsotonicModel m, ScoreSpace space);
    static Calibrator temperature(TemperatureParams t, ScoreSpace space);
    static Calibrator beta(BetaParams b); // probability space by construction

    Method method() const { return method_; }
    ScoreSpace score_space() const { return space_; }
    const Params& params() const { return params_; }

    // Calibrated probability in [0,1]; monotone nondecreasing in s.
    // Throws on non-finite input.
    double apply(double s) const;
    std::vector<double> apply(std::span<const double> s) const;

    // Applies to a whole set, yielding probability-space scores with
    // labels/weights/group/month carried through.
    ScoreSet apply(const ScoreSet& s) const;

private:
    Calibrator(Method m, ScoreSpace space, Params p);

    Method method_;
    ScoreSpace space_;
    Params params_;
};

// Per-point minimizer of sum_i w_i (y_i - p_i)^2 subject to p monotone
// nondecreasing in the score order, by pool-adjacent-violators; exact ties
// in score are pre-pooled. Returned in the input row order.
std::vector<double> isotonic_fit_values(std::span<const double> scores,
                                        std::span<const int> labels,
                                        std::span<const double> weights);

PlattParams fit_platt(const ScoreSet& val, bool smoothing = true);
IsotonicModel fit_isotonic(const ScoreSet& val);
double apply_isotonic(const IsotonicModel& m, double s);
TemperatureParams fit_temperature(const ScoreSet& val);
BetaParams fit_beta(const ScoreSet& val);

// Fits `method` on the validation set and wraps it with the set's score space.
Calibrator fit_calibrator(Method method, const ScoreSet& val, bool platt_smoothing = true);

// JSON document {schema_version, method, params, score_space}.
void save_calibrator(const std::string& path, const Calibrator& c);
Calibrator load_calibrator(const std::string& path);

} // namespace decal
