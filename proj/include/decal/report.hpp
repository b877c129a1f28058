#pragma once

#include <string>
#include <vector>

#include "decal/experiment.hpp"

namespace decal {

enum class ReportFormat { text, csv };

struct ReportOptions {
    MetricId metric = MetricId::precision;
    ReportFormat format = ReportFormat::text;
    double alpha = 0.01;
};

// Renders the per-variant grid (rows = methods, columns = variants, cells =
// "mean ± std" in percent). The per-variant maximum is wrapped in ** ** and
// a * is attached when the method significantly beats identity (two-sided
// Wilcoxon p <= alpha and a better mean). Aggregates and p-values are
// recomputed from the records.
std::string render_report(const std::vector<BootstrapRecord>& records, const ReportOptions& opts);

} // namespace decal
