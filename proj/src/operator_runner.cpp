#include "kf/operator_runner.hpp"

#include "kf/error.hpp"

namespace kf {

std::vector<std::string> runner_argv(const std::string& runner_path, const RunnerRequest& r) {
    std::vector<std::string> argv = {runner_path, "--op", r.op};
    for (const auto& in : r.inputs) {
        argv.push_back("--input");
        argv.push_back(in);
    }
    for (const auto& [k, v] : r.attributes.values()) {
        argv.push_back("--attr");
        argv.push_back(k + "=" + v);
    }
    if (r.inspect) {
        argv.push_back("--inspect");
        return argv;
    }
    argv.push_back("--out-dir");
    argv.push_back(r.out_dir);
    argv.push_back("--iters");
    argv.push_back(std::to_string(r.iters));
    argv.push_back("--warmup");
    argv.push_back(std::to_string(r.warmup));
    return argv;
}

StagedOperator::StagedOperator(const Workspace& ws, const FrameworkConfig& config, const TaskSpec& task,
                               Transport& transport)
    : task_(task), transport_(transport) {
    const std::string task_dir = transport_.staging_dir() + "/" + task.id;
    transport_.reset_dir(task_dir);
    runner_path_ = transport_.stage_executable(ws.root() / config.runner.binary, "kf_runner");
    for (std::size_t k = 0; k < task.reference_inputs.size(); ++k) {
        std::string remote = task_dir + "/in_" + std::to_string(k) + ".tensor";
        transport_.push(task.reference_inputs[k], remote);
        inputs_.push_back(remote);
    }
    out_dir_ = task_dir + "/out";
}

RunnerRequest StagedOperator::base_request() const {
    RunnerRequest r;
    r.op = task_.operator_name;
    r.inputs = inputs_;
    r.attributes = task_.attributes;
    r.out_dir = out_dir_;
    return r;
}

ExecResult StagedOperator::run(int iters, int warmup, double timeout_s) {
    transport_.reset_dir(out_dir_);
    RunnerRequest r = base_request();
    r.iters = iters;
    r.warmup = warmup;
    return transport_.exec(runner_argv(runner_path_, r), timeout_s);
}

ExecResult StagedOperator::inspect(double timeout_s) {
    RunnerRequest r = base_request();
    r.inspect = true;
    return transport_.exec(runner_argv(runner_path_, r), timeout_s);
}

}  // namespace kf
