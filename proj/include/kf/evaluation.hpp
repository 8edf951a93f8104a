#pragma once

#include "kf/benchmarking.hpp"
#include "kf/diagnostics.hpp"
#include "kf/task_model.hpp"
#include "kf/workspace.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace kf {

// Outcome of pushing one candidate through the pipeline.
struct EvaluationResult {
    std::string task_id;
    int iteration = 0;
    OperatorCategory category = OperatorCategory::Others;
    CandidateStage stage = CandidateStage::Generated;

    bool compiled = false;
    bool correct = false;
    std::optional<double> t_generated_ms;
    std::optional<double> t_baseline_ms;
    std::optional<double> speedup;

    std::vector<ErrorRecord> errors;
    std::vector<std::string> other_errors;
    std::optional<double> max_abs_diff;
    std::optional<std::size_t> mismatch_count;
    std::optional<std::size_t> first_mismatch_index;
    // Runtime failure text or mismatch summary handed to the debugger.
    std::string exec_error;
    // Harness-side failure (device busy, missing runner, ...); not the candidate's fault.
    std::string infra_error;
    std::optional<PerfProfile> perf;
    // Graph document the built operator reported after failing verification.
    std::optional<nlohmann::json> target_graph;

    // Timing fields, masked when comparing runs.
    double build_duration_s = 0.0;
    double total_duration_s = 0.0;
};

// Checks correct => compiled, speedup => correct, and speedup = baseline / generated.
void validate_result(const EvaluationResult& r);

nlohmann::json to_json(const EvaluationResult& r);
EvaluationResult evaluation_from_json(const nlohmann::json& j);

// Copy with every wall-clock dependent field cleared, for determinism checks.
EvaluationResult mask_timing(EvaluationResult r);

}  // namespace kf
