#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kf {

// Per-framework configuration: where each operator's sources live, how the
// tree is built and where the operator runner binary ends up.
struct BuildRecipe {
    // File whose presence at the workspace root marks a recognised build setup.
    std::string marker = "CMakeLists.txt";
    // Command templates; {root} and {jobs} are substituted before running.
    std::string full_command;
    std::string incremental_command;
    std::vector<std::string> env_passthrough = {"PATH", "HOME", "TMPDIR", "LANG", "LC_ALL", "CC", "CXX", "CXXFLAGS"};
    double timeout_s = 600.0;
    int jobs = 1;
};

struct RunnerConfig {
    // Runner executable, relative to the workspace root.
    std::string binary = "build/kf_runner";
};

struct DeviceBridgeConfig {
    std::string executable = "adb";
    std::string staging_dir = "/data/local/tmp/kf";
};

struct FrameworkConfig {
    std::string name;
    std::map<std::string, std::vector<std::string>> operator_locations;
    BuildRecipe build;
    RunnerConfig runner;
    DeviceBridgeConfig bridge;

    // Relative source paths for an operator; exact match first, then
    // case-insensitive. nullopt when unmapped.
    std::optional<std::vector<std::string>> locate(std::string_view operator_name) const;
};

inline constexpr std::string_view kFrameworkConfigFile = "kf_framework.json";

FrameworkConfig parse_framework_config(std::string_view text);
FrameworkConfig load_framework_config(const std::filesystem::path& path);

// Loads `<root>/kf_framework.json`.
FrameworkConfig load_framework_config_for(const std::filesystem::path& root);

}  // namespace kf
