#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kf {

struct ProcessOptions {
    std::filesystem::path cwd;
    // KEY=VALUE entries. nullopt inherits the parent environment.
    std::optional<std::vector<std::string>> env;
    // Zero or negative means no limit.
    std::chrono::duration<double> timeout{0.0};
    // Route stderr into the stdout pipe so diagnostics keep their order.
    bool merge_output = false;
};

struct ProcessResult {
    int exit_code = -1;       // 128 + signal when killed by a signal
    int term_signal = 0;
    bool timed_out = false;
    std::string out;
    std::string err;          // empty when merge_output is set
    double duration_s = 0.0;

    bool ok() const { return exit_code == 0 && !timed_out; }
};

// Runs argv[0] (PATH-resolved) with the given arguments. Never throws for a
// nonzero exit; throws IoError only when the process cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& options = {});

// Runs `command` through /bin/sh -c.
ProcessResult run_shell(const std::string& command, const ProcessOptions& options = {});

std::string shell_quote(std::string_view arg);

// Resolves a program name against PATH. Returns nullopt when not found.
std::optional<std::filesystem::path> find_program(std::string_view name);

// Environment entries for the names in `names` that are set in this process.
std::vector<std::string> environment_subset(const std::vector<std::string>& names);

}  // namespace kf
