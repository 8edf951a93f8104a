#pragma once

#include "kf/agents/llm_client.hpp"
#include "kf/agents/plan.hpp"
#include "kf/agents/prompts.hpp"
#include "kf/evaluation.hpp"
#include "kf/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kf {

enum class AgentRole { Coder, Debugger, Accelerator };

std::string_view to_string(AgentRole r);

struct HistoryOutcome {
    CandidateStage stage = CandidateStage::Generated;
    std::optional<double> max_abs_diff;
    std::optional<double> latency_ms;
    std::optional<double> speedup;
};

struct HistoryEntry {
    int iteration = 0;
    // nullopt for the initial generation.
    std::optional<AgentPlan> plan;
    HistoryOutcome outcome;
    // Parse failures and other orchestrator remarks for this iteration.
    std::vector<std::string> notes;
};

struct EpisodeResult {
    std::string task_id;
    std::vector<std::pair<KernelCandidate, EvaluationResult>> candidates;
    std::size_t best = 0;
    std::vector<HistoryEntry> history;
    std::vector<std::string> warnings;

    const EvaluationResult& best_result() const { return candidates.at(best).second; }
};

// Acceleration attempts shared across episodes, keyed by operator category.
class ReflectiveMemory {
public:
    void record(OperatorCategory category, OptimisationRecord rec);
    std::vector<OptimisationRecord> similar(OperatorCategory category) const;

    nlohmann::json to_json() const;
    // Adds the records of a document written by to_json().
    void merge_json(const nlohmann::json& j);

private:
    std::map<OperatorCategory, std::vector<OptimisationRecord>> by_category_;
    mutable std::mutex mu_;
};

struct EpisodeOptions {
    int max_iters = 10;
    // Stop as soon as a candidate reaches this stage (e.g. Verified).
    std::optional<CandidateStage> stop_at;
    PipelineOptions pipeline;
    ReflectiveMemory* memory = nullptr;
    // One JSON line per iteration plus a closing summary.
    std::optional<std::filesystem::path> log_path;
    StageLog log;
};

// Thrown with ClientError when the model cannot be reached; carries everything
// produced so far.
class EpisodeAborted : public Error {
public:
    EpisodeAborted(const std::string& message, EpisodeResult partial)
        : Error(ErrorCode::ClientError, message), partial_(std::move(partial)) {}
    const EpisodeResult& partial() const noexcept { return partial_; }

private:
    EpisodeResult partial_;
};

// Which agent handles the next step after `latest`: no compile -> Debugger
// (repair), compiled but not correct -> Debugger (correction), correct ->
// Accelerator.
AgentRole next_role(const EvaluationResult& latest);
PlanKind next_plan_kind(const EvaluationResult& latest);

// Coder/Debugger/Accelerator loop. Iteration 0 is the initial generation; every
// iteration produces exactly one candidate (a placeholder Failed candidate when
// the model's answers could not be parsed twice).
EpisodeResult run_episode(const TaskSpec& task, Workspace& ws, const FrameworkConfig& config, Transport& transport,
                          LlmClient& client, const PromptBanks& banks, const EpisodeOptions& options = {});

// mask_timing drops wall-clock dependent fields.
nlohmann::json to_json(const EpisodeResult& r, bool mask_timing = false);

}  // namespace kf
