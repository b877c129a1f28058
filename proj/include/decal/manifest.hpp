#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace decal {

// Everything needed to replay a run bit-identically: the subcommand, its
// fully resolved configuration (as a JSON object, serialized text here),
// seeds, and the paths touched.
struct RunManifest {
    std::string command;
    std::string config_json; // resolved flags/config as a JSON object
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string tool_version;
    std::string timestamp_utc;
};

// Conventional manifest location for a given output path.
std::string manifest_path_for(const std::string& output_path);

void write_manifest(const std::string& path, const RunManifest& m);
RunManifest load_manifest(const std::string& path);

std::string utc_timestamp();

} // namespace decal
