#include "decal/report.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "decal/csv.hpp"
#include "decal/errors.hpp"
#include "decal/stats_tests.hpp"

namespace decal {

namespace {

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v * 100.0);
    return buf;
}

struct Cell {
    bool present = false;
    double mean = 0.0;
    double stddev = 0.0;
    int n = 0;
    double p_value = -1.0; // < 0 = none
    bool best = false;
    bool starred = false;
};

} // namespace

std::string render_report(const std::vector<BootstrapRecord>& records, const ReportOptions& opts) {
    if (records.empty())
        throw_invalid("report needs at least one record");

    ExperimentResult sum = summarize(records);

    std::set<int> variant_set;
    std::set<Method> method_set;
    for (const auto& r : sum.records) {
        variant_set.insert(r.variant);
        method_set.insert(r.method);
    }
    std::vector<int> variants(variant_set.begin(), variant_set.end());
    std::vector<Method> methods(method_set.begin(), method_set.end());

    MetricId metric = opts.metric;
    bool higher = higher_is_better(metric);

    std::map<std::pair<Method, int>, Cell> grid;
    for (Method m : methods)
        for (int v : variants) {
            Cell c;
            auto agg = sum.aggregates.find({v, m, metric});
            if (agg != sum.aggregates.end()) {
                c.present = true;
                c.mean = agg->second.mean;
                c.stddev = agg->second.stddev;
                c.n = agg->second.n;
            }
            auto p = sum.p_values.find({v, m, metric});
            if (p != sum.p_values.end())
                c.p_value = p->second;
            grid[{m, v}] = c;
        }

    for (int v : variants) {
        // Per-variant best mean (direction-aware); ties share the marker.
        bool any = false;
        double best = 0.0;
        for (Method m : methods) {
            const Cell& c = grid[{m, v}];
            if (!c.present)
                continue;
            if (!any || (higher ? c.mean > best : c.mean < best)) {
                best = c.mean;
                any = true;
            }
        }
        auto identity = grid.find({Method::identity, v});
        for (Method m : methods) {
            Cell& c = grid[{m, v}];
            if (!c.present)
                continue;
            c.best = any && c.mean == best;
            if (m != Method::identity && c.p_value >= 0.0 &&
                significance_star(c.p_value, opts.alpha) && identity != grid.end() &&
                identity->second.present)
                c.starred = higher ? c.mean > identity->second.mean
                                   : c.mean < identity->second.mean;
        }
    }

    std::ostringstream out;
    if (opts.format == ReportFormat::csv) {
        out << "method,variant,mean,stddev,n,p_value,best,starred\n";
        for (Method m : methods)
            for (int v : variants) {
                const Cell& c = grid[{m, v}];
                if (!c.present)
                    continue;
                out << to_string(m) << ',' << variant_name(v) << ',' << format_double(c.mean)
                    << ',' << format_double(c.stddev) << ',' << c.n << ','
                    << (c.p_value >= 0.0 ? format_double(c.p_value) : std::string()) << ','
                    << (c.best ? 1 : 0) << ',' << (c.starred ? 1 : 0) << '\n';
            }
        return out.str();
    }

    auto cell_text = [](const Cell& c) -> std::string {
        if (!c.present)
            return "n/a";
        std::string s = percent(c.mean);
        if (c.starred)
            s += '*';
        s += " \xc2\xb1 " + percent(c.stddev);
        if (c.best)
            s = "**" + s + "**";
        return s;
    };
    auto display_width = [](const std::string& s) {
        // the ± glyph is two bytes, one column
        std::size_t w = 0;
        for (unsigned char ch : s)
            if ((ch & 0xc0) != 0x80)
                ++w;
        return w;
    };

    std::vector<std::string> head{"method"};
    for (int v : variants)
        head.push_back(variant_name(v));
    std::vector<std::vector<std::string>> body;
    for (Method m : methods) {
        std::vector<std::string> row{to_string(m)};
        for (int v : variants)
            row.push_back(cell_text(grid[{m, v}]));
        body.push_back(std::move(row));
    }

    std::vector<std::size_t> width(head.size());
    for (std::size_t c = 0; c < head.size(); ++c) {
        width[c] = display_width(head[c]);
        for (const auto& row : body)
            width[c] = std::max(width[c], display_width(row[c]));
    }

    out << "# metric: " << to_string(metric) << " (percent, mean \xc2\xb1 sample std over "
        << "bootstraps)\n";
    out << "# **bold** = best per variant (" << (higher ? "highest" : "lowest") << " mean); "
        << "* = two-sided Wilcoxon vs identity p <= " << format_double(opts.alpha)
        << " with the better mean\n";
    auto emit_row = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c)
                out << " | ";
            out << row[c] << std::string(width[c] - display_width(row[c]), ' ');
        }
        out << '\n';
    };
    emit_row(head);
    for (std::size_t c = 0; c < head.size(); ++c) {
        if (c)
            out << "-+-";
        out << std::string(width[c], '-');
    }
    out << '\n';
    for (const auto& row : body)
        emit_row(row);
    return out.str();
}

} // namespace decal
