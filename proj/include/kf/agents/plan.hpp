#pragma once

#include "kf/error.hpp"
#include "kf/task_model.hpp"
#include "kf/workspace.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kf {

enum class PlanKind { Repair, Correction, Acceleration };

std::string_view to_string(PlanKind k);

struct RepairPlan {
    std::vector<std::string> local_suggestions;
    std::vector<std::string> crossfile_suggestions;
    friend bool operator==(const RepairPlan&, const RepairPlan&) = default;
};

struct AccelerationPlan {
    std::string bottleneck;
    std::string method;
    std::string plan;
    friend bool operator==(const AccelerationPlan&, const AccelerationPlan&) = default;
};

// Exactly the member matching `kind` is set.
struct AgentPlan {
    PlanKind kind = PlanKind::Repair;
    std::optional<RepairPlan> repair;
    std::optional<std::vector<std::string>> correction;
    std::optional<AccelerationPlan> acceleration;

    friend bool operator==(const AgentPlan&, const AgentPlan&) = default;
};

// Fence tag each kind must answer in.
std::string_view block_tag(PlanKind k);

struct FencedBlock {
    std::string tag;   // text after the opening ``` (trimmed), may be empty
    std::string body;  // lines between the fences
    // Non-empty line just before the opening fence.
    std::string preceding_line;
    bool closed = true;
};

// Scans ``` fences in order. The final block may omit its closing fence.
std::vector<FencedBlock> find_fenced_blocks(std::string_view text);

// Thrown as MalformedPlan; keeps the offending block for the episode log.
class PlanParseError : public Error {
public:
    PlanParseError(const std::string& message, std::string raw_block)
        : Error(ErrorCode::MalformedPlan, message), raw_(std::move(raw_block)) {}
    const std::string& raw_block() const noexcept { return raw_; }

private:
    std::string raw_;
};

// Parses a model-written JSON object: '#' comment lines, trailing commas and
// doubled outer braces ("{ { ... } }" or "{{ ... }}") are accepted.
nlohmann::ordered_json parse_lenient_json(std::string_view text);

// Uses the last block tagged block_tag(expected). NoBlockFound, MalformedPlan.
AgentPlan parse_plan(std::string_view response, PlanKind expected);

nlohmann::json to_json(const AgentPlan& p);
AgentPlan plan_from_json(const nlohmann::json& j);

// Human-readable plan text embedded in follow-up prompts.
std::string render_plan(const AgentPlan& p);

// One fenced block per target file; the file name is the first line inside the
// block (optionally as a comment or followed by ':'), or the line right before
// the opening fence. Blocks naming no file are ignored; the last block for a
// file wins. MissingFile, ExtraneousFile.
KernelCandidate parse_candidate(std::string_view response, const TaskSpec& task, int iteration = 0);

}  // namespace kf
