#include "decal/stats_tests.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "decal/errors.hpp"

namespace decal {

namespace {

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

} // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    const WilcoxonOptions& opts) {
    if (x.size() != y.size())
        throw_invalid("wilcoxon: series length mismatch");
    if (x.empty())
        throw_invalid("wilcoxon: empty series");

    std::vector<double> d;
    d.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double diff = x[i] - y[i];
        if (diff != 0.0)
            d.push_back(diff);
    }

    WilcoxonResult res;
    res.n_effective = static_cast<int>(d.size());
    if (d.empty()) {
        res.w_statistic = 0.0;
        res.p_value = 1.0;
        res.mode = PValueMode::exact;
        return res;
    }

    std::size_t n = d.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::fabs(d[a]) < std::fabs(d[b]); });

    // Average ranks over tie runs; doubled ranks stay integral.
    std::vector<std::int64_t> doubled_rank(n);
    std::vector<std::int64_t> tie_sizes;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]]))
            ++j;
        std::int64_t dr = static_cast<std::int64_t>(i) + static_cast<std::int64_t>(j) + 2;
        for (std::size_t k = i; k <= j; ++k)
            doubled_rank[order[k]] = dr;
        tie_sizes.push_back(static_cast<std::int64_t>(j - i + 1));
        i = j + 1;
    }

    std::int64_t w2 = 0; // doubled W+
    for (std::size_t k = 0; k < n; ++k)
        if (d[k] > 0.0)
            w2 += doubled_rank[k];
    res.w_statistic = static_cast<double>(w2) / 2.0;

    if (res.n_effective <= opts.exact_cutoff) {
        // Subset-sum counting over the doubled ranks: ways[s] = number of
        // sign assignments whose positive doubled ranks sum to s.
        std::int64_t total2 = static_cast<std::int64_t>(n) * (static_cast<std::int64_t>(n) + 1);
        std::vector<std::uint64_t> ways(static_cast<std::size_t>(total2) + 1, 0);
        ways[0] = 1;
        std::int64_t reached = 0;
        for (std::size_t k = 0; k < n; ++k) {
            std::int64_t dr = doubled_rank[k];
            reached += dr;
            for (std::int64_t s = reached; s >= dr; --s)
                ways[s] += ways[s - dr];
        }
        long double denom = std::pow(2.0L, static_cast<long double>(n));
        long double lo = 0.0L, hi = 0.0L;
        for (std::int64_t s = 0; s <= total2; ++s) {
            if (s <= w2)
                lo += ways[s];
            if (s >= w2)
                hi += ways[s];
        }
        lo /= denom;
        hi /= denom;
        res.p_value = static_cast<double>(std::min(1.0L, 2.0L * std::min(lo, hi)));
        res.mode = PValueMode::exact;
        return res;
    }

    double nn = static_cast<double>(n);
    double mu = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    for (std::int64_t t : tie_sizes) {
        double td = static_cast<double>(t);
        var -= (td * td * td - td) / 48.0;
    }
    double sigma = std::sqrt(var);
    double w = res.w_statistic;
    double lo = normal_cdf((w - mu + 0.5) / sigma);
    double hi = normal_cdf((mu - w + 0.5) / sigma);
    res.p_value = std::min(1.0, 2.0 * std::min(lo, hi));
    res.mode = PValueMode::normal_approximation;
    return res;
}

} // namespace decal
