#include "decal/calibrators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "decal/errors.hpp"
#include "decal/version.hpp"

namespace decal {

const char* to_string(Method m) {
    switch (m) {
    case Method::identity: return "identity";
    case Method::platt: return "platt";
    case Method::isotonic: return "isotonic";
    case Method::temperature: return "temperature";
    case Method::beta: return "beta";
    }
    return "identity";
}

Method method_from_string(const std::string& name) {
    if (name == "identity") return Method::identity;
    if (name == "platt") return Method::platt;
    if (name == "isotonic") return Method::isotonic;
    if (name == "temperature") return Method::temperature;
    if (name == "beta") return Method::beta;
    throw Error(ErrorCode::unknown_method, "unknown method: '" + name + "'");
}

double to_logit(double p) {
    double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    return std::log(q / (1.0 - q));
}

double sigmoid(double z) {
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

// -[t*ln(sigmoid(u)) + (1-t)*ln(1-sigmoid(u))], branch-stable for any u.
double bernoulli_nll(double u, double t) {
    if (u >= 0.0)
        return (1.0 - t) * u + std::log1p(std::exp(-u));
    return -t * u + std::log1p(std::exp(u));
}

// Gaussian elimination with partial pivoting, n <= 3. Solves H x = g,
// writes x over g. Returns false on a (near-)singular system.
bool solve_dense(int n, double* H, double* g) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(H[r * n + col]) > std::fabs(H[piv * n + col]))
                piv = r;
        if (std::fabs(H[piv * n + col]) < 1e-300)
            return false;
        if (piv != col) {
            for (int c = 0; c < n; ++c)
                std::swap(H[col * n + c], H[piv * n + c]);
            std::swap(g[col], g[piv]);
        }
        for (int r = col + 1; r < n; ++r) {
            double f = H[r * n + col] / H[col * n + col];
            for (int c = col; c < n; ++c)
                H[r * n + c] -= f * H[col * n + c];
            g[r] -= f * g[col];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double acc = g[r];
        for (int c = r + 1; c < n; ++c)
            acc -= H[r * n + c] * g[c];
        g[r] = acc / H[r * n + r];
    }
    return true;
}

constexpr double kParamCap = 1e3;
constexpr int kMaxNewtonIters = 200;
constexpr double kGradTol = 1e-8;

// Weighted-mean logistic NLL over u_i = dot(theta, x_i) for k <= 3 active
// features, minimized by damped Newton with Armijo backtracking and a
// per-parameter cap. theta holds the start and receives the result.
void newton_logistic(int k, const std::vector<std::array<double, 3>>& x,
                     const std::vector<double>& target, const std::vector<double>& w,
                     double total_w, double* theta) {
    auto eval_loss = [&](const double* th) {
        double loss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double u = 0.0;
            for (int j = 0; j < k; ++j)
                u += th[j] * x[i][j];
            loss += w[i] * bernoulli_nll(u, target[i]);
        }
        return loss / total_w;
    };

    double loss = eval_loss(theta);
    for (int iter = 0; iter < kMaxNewtonIters; ++iter) {
        double g[3] = {0, 0, 0};
        double H[9] = {0, 0, 0, 0, 0, 0, 0, 0, 0};
        for (std::size_t i = 0; i < x.size(); ++i) {
            double u = 0.0;
            for (int j = 0; j < k; ++j)
                u += theta[j] * x[i][j];
            double p = sigmoid(u);
            double r = w[i] * (p - target[i]);
            double h = w[i] * std::max(p * (1.0 - p), 1e-12);
            for (int j = 0; j < k; ++j) {
                g[j] += r * x[i][j];
                for (int l = 0; l < k; ++l)
                    H[j * k + l] += h * x[i][j] * x[i][l];
            }
        }
        double gmax = 0.0;
        for (int j = 0; j < k; ++j) {
            g[j] /= total_w;
            gmax = std::max(gmax, std::fabs(g[j]));
        }
        if (gmax < kGradTol)
            return;
        for (int j = 0; j < k * k; ++j)
            H[j] /= total_w;
        for (int j = 0; j < k; ++j)
            H[j * k + j] += 1e-12;

        double d[3] = {-g[0], -g[1], -g[2]};
        if (!solve_dense(k, H, d))
            return;
        double slope = 0.0;
        for (int j = 0; j < k; ++j)
            slope += g[j] * d[j];
        if (slope >= 0.0)
            return;

        double step = 1.0;
        bool accepted = false;
        for (int halvings = 0; halvings < 60; ++halvings) {
            double cand[3];
            for (int j = 0; j < k; ++j)
                cand[j] = std::clamp(theta[j] + step * d[j], -kParamCap, kParamCap);
            double cand_loss = eval_loss(cand);
            if (cand_loss <= loss + 1e-4 * step * slope) {
                std::copy(cand, cand + k, theta);
                loss = cand_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            return;
    }
}

void require_both_classes(const ScoreSet& val, const char* fit) {
    std::size_t pos = val.positives();
    if (pos == 0 || pos == val.size())
        throw_invalid(std::string(fit) + " needs both classes in the validation set");
}

std::vector<double> logit_scores(const ScoreSet& s) {
    std::vector<double> z(s.scores);
    if (s.score_space == ScoreSpace::probability)
        for (double& v : z)
            v = to_logit(v);
    return z;
}

} // namespace

std::vector<double> isotonic_fit_values(std::span<const double> scores, std::span<const int> labels,
                                        std::span<const double> weights) {
    std::size_t n = scores.size();
    if (n == 0)
        throw_invalid("isotonic fit needs at least one point");
    if (labels.size() != n || (!weights.empty() && weights.size() != n))
        throw_invalid("isotonic fit: array length mismatch");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Pre-pool exact score ties, remembering each row's pooled point.
    struct Block {
        double w, wy, ws;
        std::size_t last_point;
    };
    std::vector<std::size_t> point_of(n);
    std::vector<Block> points;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t i = order[k];
        double w = weights.empty() ? 1.0 : weights[i];
        if (!points.empty() && scores[order[k - 1]] == scores[i]) {
            points.back().w += w;
            points.back().wy += w * labels[i];
            points.back().ws += w * scores[i];
        } else {
            points.push_back({w, w * static_cast<double>(labels[i]), w * scores[i], 0});
        }
        point_of[i] = points.size() - 1;
    }

    // Pool adjacent violators over the tie-pooled points.
    std::vector<Block> stack;
    for (std::size_t p = 0; p < points.size(); ++p) {
        Block b = points[p];
        b.last_point = p;
        while (!stack.empty() && stack.back().wy * b.w > b.wy * stack.back().w) {
            b.w += stack.back().w;
            b.wy += stack.back().wy;
            b.ws += stack.back().ws;
            stack.pop_back();
        }
        stack.push_back(b);
    }

    std::vector<double> point_value(points.size());
    std::size_t p = 0;
    for (const Block& b : stack) {
        for (; p <= b.last_point; ++p)
            point_value[p] = b.wy / b.w;
    }

    std::vector<double> fitted(n);
    for (std::size_t i = 0; i < n; ++i)
        fitted[i] = point_value[point_of[i]];
    return fitted;
}

IsotonicModel fit_isotonic(const ScoreSet& val) {
    std::size_t n = val.size();
    if (n == 0)
        throw_invalid("isotonic fit needs at least one point");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return val.scores[a] < val.scores[b]; });

    struct Block {
        double w, wy, ws;
    };
    std::vector<Block> points;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t i = order[k];
        double w = val.weight(i);
        if (!points.empty() && val.scores[order[k - 1]] == val.scores[i]) {
            points.back().w += w;
            points.back().wy += w * val.labels[i];
            points.back().ws += w * val.scores[i];
        } else {
            points.push_back({w, w * static_cast<double>(val.labels[i]), w * val.scores[i]});
        }
    }

    std::vector<Block> stack;
    for (const Block& pt : points) {
        Block b = pt;
        while (!stack.empty() && stack.back().wy * b.w > b.wy * stack.back().w) {
            b.w += stack.back().w;
            b.wy += stack.back().wy;
            b.ws += stack.back().ws;
            stack.pop_back();
        }
        stack.push_back(b);
    }

    IsotonicModel m;
    m.breakpoints.reserve(stack.size());
    m.values.reserve(stack.size());
    for (const Block& b : stack) {
        m.breakpoints.push_back(b.ws / b.w);
        m.values.push_back(b.wy / b.w);
    }
    return m;
}

double apply_isotonic(const IsotonicModel& m, double s) {
    if (m.breakpoints.empty())
        throw_invalid("empty isotonic model");
    if (s <= m.breakpoints.front())
        return m.values.front();
    if (s >= m.breakpoints.back())
        return m.values.back();
    auto it = std::upper_bound(m.breakpoints.begin(), m.breakpoints.end(), s);
    std::size_t hi = static_cast<std::size_t>(it - m.breakpoints.begin());
    std::size_t lo = hi - 1;
    double t = (s - m.breakpoints[lo]) / (m.breakpoints[hi] - m.breakpoints[lo]);
    return m.values[lo] + t * (m.values[hi] - m.values[lo]);
}

PlattParams fit_platt(const ScoreSet& val, bool smoothing) {
    require_both_classes(val, "platt");
    std::vector<double> z = logit_scores(val);

    double n_pos = 0.0, n_neg = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i)
        (val.labels[i] == 1 ? n_pos : n_neg) += val.weight(i);

    double hi_target = smoothing ? (n_pos + 1.0) / (n_pos + 2.0) : 1.0;
    double lo_target = smoothing ? 1.0 / (n_neg + 2.0) : 0.0;

    // P(y=1|s) = sigmoid(-(A*s + B)); fit u = -(A*s + B) as a logistic
    // model with features (-s, -1).
    std::vector<std::array<double, 3>> x(val.size());
    std::vector<double> target(val.size()), w(val.size());
    for (std::size_t i = 0; i < val.size(); ++i) {
        x[i] = {-z[i], -1.0, 0.0};
        target[i] = val.labels[i] == 1 ? hi_target : lo_target;
        w[i] = val.weight(i);
    }

    double theta[3] = {0.0, std::log((n_neg + 1.0) / (n_pos + 1.0)), 0.0};
    newton_logistic(2, x, target, w, n_pos + n_neg, theta);
    return {theta[0], theta[1]};
}

TemperatureParams fit_temperature(const ScoreSet& val) {
    require_both_classes(val, "temperature");
    std::vector<double> z = logit_scores(val);

    auto mean_nll = [&](double temp) {
        double loss = 0.0, total_w = 0.0;
        for (std::size_t i = 0; i < val.size(); ++i) {
            loss += val.weight(i) * bernoulli_nll(z[i] / temp, val.labels[i]);
            total_w += val.weight(i);
        }
        return loss / total_w;
    };

    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::log(0.05), b = std::log(20.0);
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = mean_nll(std::exp(x1)), f2 = mean_nll(std::exp(x2));
    while (b - a > 1e-10) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = mean_nll(std::exp(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = mean_nll(std::exp(x2));
        }
    }
    return {std::exp(0.5 * (a + b))};
}

namespace {

// One constrained pass of the beta fit: active flags select which of the
// (ln p, -ln(1-p)) features stay in the model.
void beta_pass(const std::vector<std::array<double, 3>>& feats, const std::vector<double>& target,
               const std::vector<double>& w, double total_w, bool use_a, bool use_b,
               double out[3]) {
    int k = (use_a ? 1 : 0) + (use_b ? 1 : 0) + 1;
    std::vector<std::array<double, 3>> x(feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) {
        int j = 0;
        if (use_a)
            x[i][j++] = feats[i][0];
        if (use_b)
            x[i][j++] = feats[i][1];
        x[i][j] = 1.0;
    }
    double theta[3] = {0, 0, 0};
    int j = 0;
    if (use_a)
        theta[j++] = 1.0;
    if (use_b)
        theta[j++] = 1.0;
    theta[j] = 0.0;
    newton_logistic(k, x, target, w, total_w, theta);

    j = 0;
    out[0] = use_a ? theta[j++] : 0.0;
    out[1] = use_b ? theta[j++] : 0.0;
    out[2] = theta[j];
}

} // namespace

BetaParams fit_beta(const ScoreSet& val) {
    if (val.score_space != ScoreSpace::probability)
        throw_invalid("beta fit needs probability-space scores");
    require_both_classes(val, "beta");

    std::vector<std::array<double, 3>> feats(val.size());
    std::vector<double> target(val.size()), w(val.size());
    double total_w = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i) {
        double p = std::clamp(val.scores[i], kProbClamp, 1.0 - kProbClamp);
        feats[i] = {std::log(p), -std::log1p(-p), 0.0};
        target[i] = val.labels[i];
        w[i] = val.weight(i);
        total_w += w[i];
    }

    double th[3];
    bool use_a = true, use_b = true;
    beta_pass(feats, target, w, total_w, use_a, use_b, th);
    if (th[0] < 0.0) {
        use_a = false;
        beta_pass(feats, target, w, total_w, use_a, use_b, th);
    }
    if (th[1] < 0.0) {
        use_b = false;
        beta_pass(feats, target, w, total_w, use_a, use_b, th);
    }
    if (th[0] < 0.0) {
        use_a = false;
        beta_pass(feats, target, w, total_w, use_a, use_b, th);
    }

    double ln_c = std::clamp(th[2], -300.0, 300.0);
    return {th[0], th[1], std::exp(ln_c)};
}

Calibrator::Calibrator(Method m, ScoreSpace space, Params p)
    : method_(m), space_(space), params_(std::move(p)) {}

Calibrator Calibrator::identity(ScoreSpace space) {
    return Calibrator(Method::identity, space, std::monostate{});
}

Calibrator Calibrator::platt(PlattParams p, ScoreSpace space) {
    if (!std::isfinite(p.a) || !std::isfinite(p.b))
        throw_invalid("platt params must be finite");
    return Calibrator(Method::platt, space, p);
}

Calibrator Calibrator::isotonic(IsotonicModel m, ScoreSpace space) {
    if (m.breakpoints.size() != m.values.size() || m.breakpoints.empty())
        throw_invalid("isotonic model shape mismatch");
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        if (m.values[i] < 0.0 || m.values[i] > 1.0)
            throw_invalid("isotonic values must lie in [0,1]");
        if (i > 0 && (m.breakpoints[i] <= m.breakpoints[i - 1] || m.values[i] < m.values[i - 1]))
            throw_invalid("isotonic model must be monotone");
    }
    return Calibrator(Method::isotonic, space, std::move(m));
}

Calibrator Calibrator::temperature(TemperatureParams t, ScoreSpace space) {
    if (!(t.temperature >= 0.05 && t.temperature <= 20.0))
        throw_invalid("temperature out of [0.05, 20]");
    return Calibrator(Method::temperature, space, t);
}

Calibrator Calibrator::beta(BetaParams b) {
    if (!(b.a >= 0.0) || !(b.b >= 0.0) || !(b.c > 0.0) || !std::isfinite(b.a) ||
        !std::isfinite(b.b) || !std::isfinite(b.c))
        throw_invalid("beta params need a,b >= 0 and c > 0");
    return Calibrator(Method::beta, ScoreSpace::probability, b);
}

double Calibrator::apply(double s) const {
    if (!std::isfinite(s))
        throw_invalid("non-finite score");
    switch (method_) {
    case Method::identity:
        return space_ == ScoreSpace::probability ? std::clamp(s, 0.0, 1.0) : sigmoid(s);
    case Method::platt: {
        const auto& p = std::get<PlattParams>(params_);
        double z = space_ == ScoreSpace::probability ? to_logit(s) : s;
        return sigmoid(-(p.a * z + p.b));
    }
    case Method::isotonic:
        return apply_isotonic(std::get<IsotonicModel>(params_), s);
    case Method::temperature: {
        double z = space_ == ScoreSpace::probability ? to_logit(s) : s;
        return sigmoid(z / std::get<TemperatureParams>(params_).temperature);
    }
    case Method::beta: {
        const auto& p = std::get<BetaParams>(params_);
        double q = std::clamp(s, kProbClamp, 1.0 - kProbClamp);
        return sigmoid(p.a * std::log(q) - p.b * std::log1p(-q) + std::log(p.c));
    }
    }
    throw_invalid("bad method tag");
}

std::vector<double> Calibrator::apply(std::span<const double> s) const {
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        out[i] = apply(s[i]);
    return out;
}

ScoreSet Calibrator::apply(const ScoreSet& s) const {
    if (s.score_space != space_)
        throw_invalid("score space does not match the calibrator");
    ScoreSet out = s;
    out.score_space = ScoreSpace::probability;
    out.scores = apply(std::span<const double>(s.scores));
    return out;
}

Calibrator fit_calibrator(Method method, const ScoreSet& val, bool platt_smoothing) {
    switch (method) {
    case Method::identity:
        return Calibrator::identity(val.score_space);
    case Method::platt:
        return Calibrator::platt(fit_platt(val, platt_smoothing), val.score_space);
    case Method::isotonic:
        return Calibrator::isotonic(fit_isotonic(val), val.score_space);
    case Method::temperature:
        return Calibrator::temperature(fit_temperature(val), val.score_space);
    case Method::beta:
        return Calibrator::beta(fit_beta(val));
    }
    throw_invalid("bad method tag");
}

void save_calibrator(const std::string& path, const Calibrator& c) {
    nlohmann::json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["method"] = to_string(c.method());
    doc["score_space"] = to_string(c.score_space());
    nlohmann::json params = nlohmann::json::object();
    switch (c.method()) {
    case Method::identity:
        break;
    case Method::platt: {
        const auto& p = std::get<PlattParams>(c.params());
        params["a"] = p.a;
        params["b"] = p.b;
        break;
    }
    case Method::isotonic: {
        const auto& m = std::get<IsotonicModel>(c.params());
        params["breakpoints"] = m.breakpoints;
        params["values"] = m.values;
        break;
    }
    case Method::temperature:
        params["temperature"] = std::get<TemperatureParams>(c.params()).temperature;
        break;
    case Method::beta: {
        const auto& p = std::get<BetaParams>(c.params());
        params["a"] = p.a;
        params["b"] = p.b;
        params["c"] = p.c;
        break;
    }
    }
    doc["params"] = std::move(params);

    std::ofstream out(path);
    if (!out)
        throw_io("cannot write " + path);
    out << doc.dump(2) << '\n';
    if (!out)
        throw_io("write failed: " + path);
}

Calibrator load_calibrator(const std::string& path) {
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
    if (!doc.contains("method") || !doc.contains("params") || !doc.contains("score_space"))
        throw_schema(path + ": missing method/params/score_space");

    Method method = method_from_string(doc["method"].get<std::string>());
    ScoreSpace space = score_space_from_string(doc["score_space"].get<std::string>());
    const auto& params = doc["params"];
    try {
        switch (method) {
        case Method::identity:
            return Calibrator::identity(space);
        case Method::platt:
            return Calibrator::platt({params.at("a").get<double>(), params.at("b").get<double>()},
                                     space);
        case Method::isotonic: {
            IsotonicModel m;
            m.breakpoints = params.at("breakpoints").get<std::vector<double>>();
            m.values = params.at("values").get<std::vector<double>>();
            return Calibrator::isotonic(std::move(m), space);
        }
        case Method::temperature:
            return Calibrator::temperature({params.at("temperature").get<double>()}, space);
        case Method::beta:
            return Calibrator::beta({params.at("a").get<double>(), params.at("b").get<double>(),
                                     params.at("c").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw_schema(path + ": " + e.what());
    }
    throw_schema(path + ": bad method");
}

} // namespace decal
