#pragma once

#include <string>
#include <vector>

namespace decal {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // -1 when absent
    int column(const std::string& name) const;
};

// Reads a comma-separated file with a header row. Handles CRLF and
// double-quoted fields; surrounding whitespace is trimmed.
CsvTable read_csv(const std::string& path);

// Shortest round-trip text for a double ("nan"/"inf" spelled out).
std::string format_double(double v);

// Locale-independent parse; throws ErrorCode::parse with `context` on failure.
double parse_double(const std::string& field, const std::string& context);
long parse_long(const std::string& field, const std::string& context);

} // namespace decal
