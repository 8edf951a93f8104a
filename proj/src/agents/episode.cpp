#include "kf/agents/episode.hpp"

#include "kf/diagnostics.hpp"
#include "kf/fsutil.hpp"
#include "kf/graph_diff.hpp"
#include "kf/metrics.hpp"

#include <cstdio>

namespace kf {

using nlohmann::json;

std::string_view to_string(AgentRole r) {
    switch (r) {
        case AgentRole::Coder: return "Coder";
        case AgentRole::Debugger: return "Debugger";
        case AgentRole::Accelerator: return "Accelerator";
    }
    return "?";
}

AgentRole next_role(const EvaluationResult& latest) {
    return latest.correct ? AgentRole::Accelerator : AgentRole::Debugger;
}

PlanKind next_plan_kind(const EvaluationResult& latest) {
    if (!latest.compiled) return PlanKind::Repair;
    if (!latest.correct) return PlanKind::Correction;
    return PlanKind::Acceleration;
}

// ---------------------------------------------------------------------------

void ReflectiveMemory::record(OperatorCategory category, OptimisationRecord rec) {
    std::lock_guard lk(mu_);
    by_category_[category].push_back(std::move(rec));
}

std::vector<OptimisationRecord> ReflectiveMemory::similar(OperatorCategory category) const {
    std::lock_guard lk(mu_);
    auto it = by_category_.find(category);
    return it == by_category_.end() ? std::vector<OptimisationRecord>{} : it->second;
}

json ReflectiveMemory::to_json() const {
    std::lock_guard lk(mu_);
    json out = json::object();
    for (const auto& [c, recs] : by_category_) {
        json arr = json::array();
        for (const auto& r : recs)
            arr.push_back({{"task_id", r.task_id},
                           {"iteration", r.iteration},
                           {"bottleneck", r.plan.bottleneck},
                           {"method", r.plan.method},
                           {"plan", r.plan.plan},
                           {"outcome", r.outcome}});
        out[std::string(kf::to_string(c))] = arr;
    }
    return out;
}

void ReflectiveMemory::merge_json(const json& j) {
    std::lock_guard lk(mu_);
    try {
        for (const auto& [name, arr] : j.items()) {
            auto c = parse_category(name);
            if (!c) fail(ErrorCode::ParseError, "memory: unknown category '" + name + "'");
            for (const auto& r : arr)
                by_category_[*c].push_back(
                    {r.at("task_id").get<std::string>(), r.at("iteration").get<int>(),
                     {r.at("bottleneck").get<std::string>(), r.at("method").get<std::string>(),
                      r.at("plan").get<std::string>()},
                     r.at("outcome").get<std::string>()});
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, std::string("memory: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

namespace {

std::string describe_outcome(const EvaluationResult& r) {
    if (r.speedup) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "correct, %.2fx speedup", *r.speedup);
        return buf;
    }
    if (r.correct) return "correct, not timed";
    if (r.compiled) return "compiled but incorrect";
    return "did not compile";
}

void apply_stages(KernelCandidate& c, const EvaluationResult& r) {
    if (r.compiled) c.advance(CandidateStage::Compiled);
    if (r.correct) c.advance(CandidateStage::Verified);
    if (r.speedup) c.advance(CandidateStage::Benchmarked);
    if (!r.correct) c.advance(CandidateStage::Failed);
}

bool reached(const EvaluationResult& r, CandidateStage target) {
    switch (target) {
        case CandidateStage::Generated: return true;
        case CandidateStage::Compiled: return r.compiled;
        case CandidateStage::Verified: return r.correct;
        case CandidateStage::Benchmarked: return r.speedup.has_value();
        case CandidateStage::Failed: return !r.correct;
    }
    return false;
}

json outcome_json(const HistoryOutcome& o, bool mask) {
    json j = {{"stage", to_string(o.stage)}};
    j["max_abs_diff"] = o.max_abs_diff ? json(*o.max_abs_diff) : json(nullptr);
    j["latency_ms"] = (!mask && o.latency_ms) ? json(*o.latency_ms) : json(nullptr);
    j["speedup"] = (!mask && o.speedup) ? json(*o.speedup) : json(nullptr);
    return j;
}

json history_json(const HistoryEntry& h, bool mask) {
    return {{"iteration", h.iteration},
            {"plan", h.plan ? to_json(*h.plan) : json("Initial")},
            {"outcome", outcome_json(h.outcome, mask)},
            {"notes", h.notes}};
}

json load_reference_graph(const TaskSpec& task) {
    try {
        return to_json(parse_graph(read_text_file(task.reference_graph)));
    } catch (const Error& e) {
        return json{{"unavailable", e.detail()}};
    }
}

class Episode {
public:
    Episode(const TaskSpec& task, Workspace& ws, const FrameworkConfig& config, Transport& transport,
            LlmClient& client, const PromptBanks& banks, const EpisodeOptions& options)
        : task_(task),
          client_(client),
          banks_(banks),
          options_(options),
          memory_(options.memory ? options.memory : &local_memory_),
          ctx_{ws, config, transport, options.pipeline, options.log} {
        // Iteration records go to the episode log instead.
        ctx_.options.results_path.reset();
        result_.task_id = task.id;
        reference_graph_ = load_reference_graph(task);
    }

    EpisodeResult run() {
        for (int it = 0; it < options_.max_iters; ++it) {
            try {
                step(it);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::ClientError) throw;
                finish();
                throw EpisodeAborted(e.detail(), result_);
            }
            if (options_.stop_at && reached(result_.candidates.back().second, *options_.stop_at)) break;
        }
        finish();
        return result_;
    }

private:
    void say(const std::string& line) {
        if (options_.log) options_.log(line);
    }

    std::optional<KernelCandidate> ask_candidate(const std::string& prompt, int it, HistoryEntry& h) {
        std::string reply = client_.complete(prompt);
        try {
            return parse_candidate(reply, task_, it);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MissingFile && e.code() != ErrorCode::ExtraneousFile) throw;
            h.notes.push_back("coder answer rejected: " + e.detail());
        }
        reply = client_.complete(prompt + candidate_format_reminder(task_));
        try {
            return parse_candidate(reply, task_, it);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MissingFile && e.code() != ErrorCode::ExtraneousFile) throw;
            h.notes.push_back("coder answer rejected again: " + e.detail());
        }
        return std::nullopt;
    }

    std::optional<AgentPlan> ask_plan(const std::string& prompt, PlanKind kind, HistoryEntry& h) {
        for (int attempt = 0; attempt < 2; ++attempt) {
            std::string reply = client_.complete(attempt == 0 ? prompt : prompt + format_reminder(kind));
            try {
                return parse_plan(reply, kind);
            } catch (const PlanParseError& e) {
                h.notes.push_back(std::string(to_string(kind)) + " plan rejected: " + e.detail() +
                                  "\nraw block:\n" + e.raw_block());
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NoBlockFound && e.code() != ErrorCode::MalformedPlan) throw;
                h.notes.push_back(std::string(to_string(kind)) + " plan rejected: " + e.detail());
            }
        }
        return std::nullopt;
    }

    // Index of the newest candidate that has code, or -1.
    int latest_real() const {
        for (int i = static_cast<int>(result_.candidates.size()) - 1; i >= 0; --i)
            if (!result_.candidates[i].first.files.empty()) return i;
        return -1;
    }

    std::string plan_prompt(PlanKind kind, const KernelCandidate& lc, const EvaluationResult& lr) {
        switch (kind) {
            case PlanKind::Repair: {
                std::vector<std::string> other = lr.other_errors;
                if (!lr.infra_error.empty()) other.push_back(lr.infra_error);
                return build_repair_prompt(task_, lc, group_errors(lr.errors, task_.operator_name, other));
            }
            case PlanKind::Correction: {
                std::vector<GraphMismatch> mismatches;
                if (lr.target_graph) {
                    try {
                        mismatches = diff_graphs(parse_graph_json(reference_graph_), parse_graph_json(*lr.target_graph));
                    } catch (const Error&) {
                    }
                }
                std::string err = lr.exec_error.empty() ? lr.infra_error : lr.exec_error;
                return build_correction_prompt(task_, lc, err, reference_graph_, lr.target_graph, mismatches);
            }
            case PlanKind::Acceleration:
                return build_acceleration_prompt(task_, lc, lr.perf, lr.speedup, memory_->similar(task_.category));
        }
        return {};
    }

    void step(int it) {
        HistoryEntry h;
        h.iteration = it;
        std::optional<KernelCandidate> cand;
        AgentRole role = AgentRole::Coder;

        int latest = latest_real();
        if (latest < 0) {
            say("iteration " + std::to_string(it) + ": Coder, initial generation");
            cand = ask_candidate(build_initial_prompt(task_, banks_), it, h);
        } else {
            const auto& [lc, lr] = result_.candidates[latest];
            PlanKind kind = next_plan_kind(lr);
            role = next_role(lr);
            say("iteration " + std::to_string(it) + ": " + std::string(to_string(role)) + " (" +
                std::string(to_string(kind)) + " plan)");
            auto plan = ask_plan(plan_prompt(kind, lc, lr), kind, h);
            if (plan) {
                h.plan = plan;
                std::string note;
                if (plan->acceleration) note = check_repetition(*plan->acceleration, it, h);
                cand = ask_candidate(build_refinement_prompt(task_, lc, *plan, note), it, h);
            }
        }

        EvaluationResult r;
        if (cand) {
            r = evaluate(ctx_, task_, *cand);
            apply_stages(*cand, r);
        } else {
            cand = KernelCandidate{task_.id, it, {}, CandidateStage::Generated};
            cand->advance(CandidateStage::Failed);
            r.task_id = task_.id;
            r.iteration = it;
            r.category = task_.category;
            r.stage = CandidateStage::Failed;
            r.other_errors.push_back("no usable model answer in iteration " + std::to_string(it));
        }

        h.outcome.stage = cand->stage;
        h.outcome.max_abs_diff = r.max_abs_diff;
        h.outcome.latency_ms = r.t_generated_ms;
        h.outcome.speedup = r.speedup;
        if (h.plan && h.plan->acceleration)
            memory_->record(task_.category, {task_.id, it, *h.plan->acceleration, describe_outcome(r)});

        say("iteration " + std::to_string(it) + ": " + describe_outcome(r));
        log_iteration(role, *cand, r, h);
        result_.candidates.emplace_back(std::move(*cand), std::move(r));
        result_.history.push_back(std::move(h));
    }

    std::string check_repetition(const AccelerationPlan& plan, int it, HistoryEntry& h) {
        const HistoryEntry* prev = nullptr;
        for (auto i = result_.history.rbegin(); i != result_.history.rend(); ++i)
            if (i->plan && i->plan->acceleration) {
                prev = &*i;
                break;
            }
        if (!prev || !(prev->plan->acceleration == plan)) return {};

        std::string warning = "iteration " + std::to_string(it) + ": acceleration plan repeats iteration " +
                              std::to_string(prev->iteration) + " verbatim";
        result_.warnings.push_back(warning);
        h.notes.push_back(warning);
        say("warning: " + warning);

        std::string note =
            "This plan was already tried. Results of earlier attempts in this session; build on them rather than "
            "repeating the same change:\n";
        for (const auto& e : result_.history) {
            if (!e.plan || !e.plan->acceleration) continue;
            note += "- iteration " + std::to_string(e.iteration) + ": " + e.plan->acceleration->method + " -> " +
                    std::string(to_string(e.outcome.stage)) + "\n";
        }
        return note;
    }

    void log_iteration(AgentRole role, const KernelCandidate& c, const EvaluationResult& r, const HistoryEntry& h) {
        if (!options_.log_path) return;
        json files = json::array();
        for (const auto& [name, text] : c.files) files.push_back({{"name", name}, {"text", text}});
        json line = {{"record", "evaluation"}, {"source", "agent"},        {"role", to_string(role)},
                     {"files", files},         {"history", history_json(h, false)}, {"result", to_json(r)}};
        append_text_file(*options_.log_path, line.dump() + "\n");
    }

    void finish() {
        if (result_.candidates.empty()) return;
        std::vector<EvaluationResult> rs;
        for (const auto& [c, r] : result_.candidates) rs.push_back(r);
        result_.best = best_index(rs);
        if (options_.log_path) {
            json summary = to_json(result_, false);
            summary.erase("candidates");
            summary["record"] = "episode";
            summary["best_result"] = kf::to_json(result_.best_result());
            append_text_file(*options_.log_path, summary.dump() + "\n");
        }
    }

    const TaskSpec& task_;
    LlmClient& client_;
    const PromptBanks& banks_;
    const EpisodeOptions& options_;
    ReflectiveMemory local_memory_;
    ReflectiveMemory* memory_;
    PipelineContext ctx_;
    EpisodeResult result_;
    json reference_graph_;
};

}  // namespace

EpisodeResult run_episode(const TaskSpec& task, Workspace& ws, const FrameworkConfig& config, Transport& transport,
                          LlmClient& client, const PromptBanks& banks, const EpisodeOptions& options) {
    if (options.max_iters < 1) fail(ErrorCode::InvalidArgument, "max_iters must be >= 1");
    if (ws.is_injected()) fail(ErrorCode::InvalidArgument, "episode needs a clean workspace");
    Episode e(task, ws, config, transport, client, banks, options);
    return e.run();
}

json to_json(const EpisodeResult& r, bool mask) {
    json cands = json::array();
    for (const auto& [c, res] : r.candidates) {
        json files = json::array();
        for (const auto& [name, text] : c.files) files.push_back({{"name", name}, {"text", text}});
        cands.push_back({{"iteration", c.iteration},
                         {"stage", to_string(c.stage)},
                         {"files", files},
                         {"result", to_json(mask ? mask_timing(res) : res)}});
    }
    json hist = json::array();
    for (const auto& h : r.history) hist.push_back(history_json(h, mask));
    return {{"task_id", r.task_id},
            {"best", r.best},
            {"candidates", cands},
            {"history", hist},
            {"warnings", r.warnings}};
}

}  // namespace kf
