#include "decal/manifest.hpp"

#include <ctime>
#include <fstream>

#include <json.hpp>

#include "decal/errors.hpp"
#include "decal/version.hpp"

namespace decal {

std::string manifest_path_for(const std::string& output_path) {
    return output_path + ".manifest.json";
}

void write_manifest(const std::string& path, const RunManifest& m) {
    nlohmann::json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["command"] = m.command;
    try {
        doc["config"] = m.config_json.empty() ? nlohmann::json::object()
                                              : nlohmann::json::parse(m.config_json);
    } catch (const nlohmann::json::exception& e) {
        throw_invalid(std::string("manifest config not valid JSON: ") + e.what());
    }
    doc["seeds"] = m.seeds;
    doc["inputs"] = m.inputs;
    doc["outputs"] = m.outputs;
    doc["tool_version"] = m.tool_version;
    doc["timestamp_utc"] = m.timestamp_utc;

    std::ofstream out(path);
    if (!out)
        throw_io("cannot write " + path);
    out << doc.dump(2) << '\n';
    if (!out)
        throw_io("write failed: " + path);
}

RunManifest load_manifest(const std::string& path) {
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
    try {
        RunManifest m;
        m.command = doc.at("command").get<std::string>();
        m.config_json = doc.at("config").dump(2);
        m.seeds = doc.value("seeds", std::vector<std::uint64_t>{});
        m.inputs = doc.value("inputs", std::vector<std::string>{});
        m.outputs = doc.value("outputs", std::vector<std::string>{});
        m.tool_version = doc.value("tool_version", std::string());
        m.timestamp_utc = doc.value("timestamp_utc", std::string());
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw_schema(path + ": " + e.what());
    }
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace decal
