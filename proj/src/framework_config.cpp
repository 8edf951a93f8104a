#include "kf/framework_config.hpp"

#include "kf/error.hpp"
#include "kf/fsutil.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <set>

using nlohmann::json;

namespace kf {

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (!known.count(key)) fail(ErrorCode::ValidationError, where + ": unknown field '" + key + "'");
    }
}

std::string get_string(const json& obj, const char* key, const std::string& where, std::string fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) fail(ErrorCode::ParseError, where + "." + key + " must be a string");
    return obj[key].get<std::string>();
}

std::vector<std::string> get_strings(const json& v, const std::string& where) {
    if (!v.is_array()) fail(ErrorCode::ParseError, where + " must be a list of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) fail(ErrorCode::ParseError, where + " must be a list of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace

std::optional<std::vector<std::string>> FrameworkConfig::locate(std::string_view operator_name) const {
    if (auto it = operator_locations.find(std::string(operator_name)); it != operator_locations.end()) return it->second;
    auto eq = [](std::string_view a, std::string_view b) {
        return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
                   return std::tolower(x) == std::tolower(y);
               });
    };
    for (const auto& [name, paths] : operator_locations) {
        if (eq(name, operator_name)) return paths;
    }
    return std::nullopt;
}

FrameworkConfig parse_framework_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ParseError, std::string("framework config: ") + e.what());
    }
    if (!doc.is_object()) fail(ErrorCode::ParseError, "framework config root must be an object");
    reject_unknown(doc, {"schema_version", "name", "operators", "build", "runner", "bridge"}, "framework config");
    if (get_string(doc, "schema_version", "framework config", "1") != "1")
        fail(ErrorCode::ValidationError, "framework config: unsupported schema_version");

    FrameworkConfig cfg;
    cfg.name = get_string(doc, "name", "framework config", "framework");
    if (doc.contains("operators")) {
        if (!doc["operators"].is_object()) fail(ErrorCode::ParseError, "operators must be an object");
        for (const auto& [op, paths] : doc["operators"].items()) {
            auto list = get_strings(paths, "operators." + op);
            for (const auto& p : list) {
                std::filesystem::path rel(p);
                if (rel.is_absolute() || p.find("..") != std::string::npos)
                    fail(ErrorCode::ValidationError, "operators." + op + ": path must stay inside the tree: " + p);
            }
            cfg.operator_locations[op] = std::move(list);
        }
    }
    if (doc.contains("build")) {
        const json& b = doc["build"];
        if (!b.is_object()) fail(ErrorCode::ParseError, "build must be an object");
        reject_unknown(b, {"marker", "full", "incremental", "env_passthrough", "timeout_s", "jobs"}, "build");
        cfg.build.marker = get_string(b, "marker", "build", cfg.build.marker);
        cfg.build.full_command = get_string(b, "full", "build", "");
        cfg.build.incremental_command = get_string(b, "incremental", "build", cfg.build.full_command);
        if (b.contains("env_passthrough")) cfg.build.env_passthrough = get_strings(b["env_passthrough"], "build.env_passthrough");
        if (b.contains("timeout_s")) {
            if (!b["timeout_s"].is_number() || b["timeout_s"].get<double>() <= 0)
                fail(ErrorCode::ValidationError, "build.timeout_s must be a positive number");
            cfg.build.timeout_s = b["timeout_s"].get<double>();
        }
        if (b.contains("jobs")) {
            if (!b["jobs"].is_number_integer() || b["jobs"].get<int>() < 1)
                fail(ErrorCode::ValidationError, "build.jobs must be a positive integer");
            cfg.build.jobs = b["jobs"].get<int>();
        }
    }
    if (doc.contains("runner")) {
        const json& r = doc["runner"];
        reject_unknown(r, {"binary"}, "runner");
        cfg.runner.binary = get_string(r, "binary", "runner", cfg.runner.binary);
    }
    if (doc.contains("bridge")) {
        const json& r = doc["bridge"];
        reject_unknown(r, {"executable", "staging_dir"}, "bridge");
        cfg.bridge.executable = get_string(r, "executable", "bridge", cfg.bridge.executable);
        cfg.bridge.staging_dir = get_string(r, "staging_dir", "bridge", cfg.bridge.staging_dir);
    }
    return cfg;
}

FrameworkConfig load_framework_config(const std::filesystem::path& path) {
    return parse_framework_config(read_text_file(path));
}

FrameworkConfig load_framework_config_for(const std::filesystem::path& root) {
    auto path = root / std::string(kFrameworkConfigFile);
    if (!std::filesystem::is_regular_file(path))
        fail(ErrorCode::IoError, "framework config not found: " + path.string());
    return load_framework_config(path);
}

}  // namespace kf
