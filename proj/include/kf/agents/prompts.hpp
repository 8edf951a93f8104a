#pragma once

#include "kf/agents/plan.hpp"
#include "kf/benchmarking.hpp"
#include "kf/graph_diff.hpp"
#include "kf/task_model.hpp"
#include "kf/workspace.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kf {

struct BankEntry {
    std::string name;
    std::string text;
};

// Framework knowledge injected into the first prompt: headers per operator
// category and a one-shot example per implementation mechanism.
struct PromptBanks {
    std::map<OperatorCategory, std::vector<BankEntry>> headers;
    std::map<Mechanism, BankEntry> examples;
};

// {"headers": {"<Category>": [entry...]}, "examples": {"<Mechanism>": entry}}
// where an entry is a file path (relative to the bank file) or {"name", "text"}.
PromptBanks load_banks(const std::filesystem::path& path);
PromptBanks parse_banks(const nlohmann::json& doc, const std::filesystem::path& base_dir);

// A past acceleration attempt on an operator of the same category.
struct OptimisationRecord {
    std::string task_id;
    int iteration = 0;
    AccelerationPlan plan;
    std::string outcome;  // e.g. "Benchmarked, 1.31x" or "Failed to compile"
};

// Operator name, category, mechanism, attributes, description and the
// reference model source when the task has one.
std::string operator_info(const TaskSpec& task);

// "CPUArgMax.hpp and CPUArgMax.cpp" style instruction for the target files.
std::string file_instruction(const TaskSpec& task);

// Sections in order: role and task, constraints, category headers, mechanism
// example, reference model, file-name instruction. MissingBankEntry when the
// banks have nothing for the task's category or mechanism.
std::string build_initial_prompt(const TaskSpec& task, const PromptBanks& banks);

std::string build_repair_prompt(const TaskSpec& task, const KernelCandidate& candidate,
                                const nlohmann::ordered_json& diagnosis);

std::string build_correction_prompt(const TaskSpec& task, const KernelCandidate& candidate,
                                    const std::string& exec_error, const nlohmann::json& reference_graph,
                                    const std::optional<nlohmann::json>& target_graph,
                                    const std::vector<GraphMismatch>& mismatches = {});

std::string build_acceleration_prompt(const TaskSpec& task, const KernelCandidate& candidate,
                                      const std::optional<PerfProfile>& perf, std::optional<double> speedup,
                                      const std::vector<OptimisationRecord>& history);

// Coder follow-up: latest code plus the plan, code-only answer. `note` carries
// orchestrator remarks such as a repetition warning.
std::string build_refinement_prompt(const TaskSpec& task, const KernelCandidate& candidate, const AgentPlan& plan,
                                    const std::string& note = {});

// Appended when a response could not be parsed.
std::string format_reminder(PlanKind kind);
std::string candidate_format_reminder(const TaskSpec& task);

std::string render_code_book(const KernelCandidate& candidate);

}  // namespace kf
