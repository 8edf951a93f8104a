#pragma once

#include "kf/framework_config.hpp"
#include "kf/task_model.hpp"
#include "kf/transport.hpp"
#include "kf/workspace.hpp"

#include <string>
#include <vector>

namespace kf {

// Harness side of the operator runner command line:
//   <runner> --op <name> --input <file>... --attr key=value... --out-dir <dir>
//            --iters N --warmup W [--inspect]
struct RunnerRequest {
    std::string op;
    std::vector<std::string> inputs;
    AttributeMap attributes;
    std::string out_dir;
    int iters = 1;
    int warmup = 0;
    bool inspect = false;
};

std::vector<std::string> runner_argv(const std::string& runner_path, const RunnerRequest& request);

inline constexpr double kRunnerTimeoutS = 300.0;

// Stages a workspace's runner binary and a task's reference inputs on a
// transport, then executes runner requests against them.
class StagedOperator {
public:
    StagedOperator(const Workspace& ws, const FrameworkConfig& config, const TaskSpec& task, Transport& transport);

    // Measures `iters` iterations after `warmup` discarded ones. Output
    // tensors land in out_dir() on the target.
    ExecResult run(int iters, int warmup, double timeout_s = kRunnerTimeoutS);
    // Emits the operator's graph description without computing.
    ExecResult inspect(double timeout_s = kRunnerTimeoutS);

    const std::string& out_dir() const { return out_dir_; }
    static std::string output_name(std::size_t k) { return "out_" + std::to_string(k) + ".tensor"; }

private:
    RunnerRequest base_request() const;

    const TaskSpec& task_;
    Transport& transport_;
    std::string runner_path_;
    std::vector<std::string> inputs_;
    std::string out_dir_;
};

}  // namespace kf
