#pragma once

#include "kf/benchmarking.hpp"
#include "kf/build.hpp"
#include "kf/evaluation.hpp"
#include "kf/framework_config.hpp"
#include "kf/task_model.hpp"
#include "kf/transport.hpp"
#include "kf/verification.hpp"
#include "kf/workspace.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace kf {

struct PipelineOptions {
    double tolerance = kDefaultTolerance;
    ToleranceMode tolerance_mode = ToleranceMode::Absolute;
    BenchOptions bench;
    bool skip_benchmark = false;
    BuildMode build_mode = BuildMode::Incremental;
    std::optional<double> build_timeout_s;
    // Optional shared cache of measured baselines; a task's pinned latency wins.
    BaselineCache* baseline_cache = nullptr;
    bool remeasure_baseline = false;
    // Asks the runner for its graph document when verification fails.
    bool inspect_on_failure = true;
    // Appends one record per evaluation when set.
    std::optional<std::filesystem::path> results_path;
};

// Receives "<stage>: <detail>" progress lines.
using StageLog = std::function<void(const std::string&)>;

struct PipelineContext {
    Workspace& ws;
    const FrameworkConfig& config;
    Transport& transport;
    PipelineOptions options;
    StageLog log;
};

// inject -> build -> verify -> benchmark, stopping at the first failing stage.
// The workspace is restored on every path. Candidate failures are recorded in
// the result; harness failures land in infra_error.
EvaluationResult evaluate(PipelineContext& ctx, const TaskSpec& task, const KernelCandidate& candidate);

// Latency of the framework's own implementation: pinned, cached or measured on
// the clean tree (which is rebuilt first).
double baseline_latency(PipelineContext& ctx, const TaskSpec& task);

enum class ExitStatus { Ok = 0, CompileFail = 2, VerifyFail = 3, Infra = 4 };

ExitStatus exit_status(const EvaluationResult& r);

// Workspaces for concurrent evaluation: clone_workspace(src, "<label>-<k>").
struct ParallelOptions {
    int jobs = 1;
    std::string clone_label = "eval";
    std::optional<std::filesystem::path> clone_parent;
    bool keep_clones = false;
    // Builds each clone fully before use; off when the source is already built.
    bool precompile_clones = false;
    // Makes one transport per worker. Default: LocalTransport.
    std::function<std::unique_ptr<Transport>(int worker)> make_transport;
};

// Evaluates candidates on min(jobs, n) cloned workspaces. Results are in input
// order; a failure in one candidate never aborts the others. jobs == 1 runs in
// `base` directly.
std::vector<EvaluationResult> parallel_evaluate(Workspace& base, const FrameworkConfig& config,
                                                const std::vector<std::pair<const TaskSpec*, KernelCandidate>>& group,
                                                const PipelineOptions& options, const ParallelOptions& parallel,
                                                const StageLog& log = {});

}  // namespace kf
