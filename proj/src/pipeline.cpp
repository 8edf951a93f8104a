#include "kf/pipeline.hpp"

#include "kf/error.hpp"
#include "kf/graph_diff.hpp"
#include "kf/metrics.hpp"
#include "kf/operator_runner.hpp"

#include <chrono>
#include <cstdio>
#include <mutex>
#include <set>
#include <thread>

namespace fs = std::filesystem;

namespace kf {

namespace {

using Clock = std::chrono::steady_clock;

void note(PipelineContext& ctx, const std::string& line) {
    if (ctx.log) ctx.log(line);
}

void capture_target_graph(PipelineContext& ctx, const TaskSpec& task, EvaluationResult& r) {
    if (!ctx.options.inspect_on_failure) return;
    try {
        StagedOperator op(ctx.ws, ctx.config, task, ctx.transport);
        ExecResult e = op.inspect();
        if (e.exit_code == 0 && !e.timed_out) r.target_graph = to_json(parse_graph(e.out));
    } catch (const std::exception& e) {
        note(ctx, std::string("verify: graph inspection unavailable: ") + e.what());
    }
}

std::string fmt_ms(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.4f ms", v);
    return buf;
}

}  // namespace

double baseline_latency(PipelineContext& ctx, const TaskSpec& task) {
    if (task.baseline_latency_ms) return *task.baseline_latency_ms;
    const std::string endpoint = ctx.transport.endpoint();
    if (ctx.options.baseline_cache && !ctx.options.remeasure_baseline)
        if (auto cached = ctx.options.baseline_cache->get(endpoint, task.id)) return *cached;

    if (ctx.ws.is_injected()) fail(ErrorCode::InvalidArgument, "baseline must be measured on a clean workspace");
    BuildResult b = build(ctx.ws, ctx.config.build, BuildMode::Incremental, ctx.options.build_timeout_s);
    if (!b.success) fail(ErrorCode::ExecutionFailure, "clean framework tree does not build:\n" + b.log_text);
    PerfProfile p = run_benchmark(ctx.ws, ctx.config, task, ctx.transport, ctx.options.bench);
    note(ctx, "baseline: " + task.id + " " + fmt_ms(p.mean_ms) + " on " + endpoint);
    if (ctx.options.baseline_cache) ctx.options.baseline_cache->put(endpoint, task.id, p.mean_ms);
    return p.mean_ms;
}

ExitStatus exit_status(const EvaluationResult& r) {
    if (!r.infra_error.empty()) return ExitStatus::Infra;
    if (!r.compiled) return ExitStatus::CompileFail;
    if (!r.correct) return ExitStatus::VerifyFail;
    return ExitStatus::Ok;
}

EvaluationResult evaluate(PipelineContext& ctx, const TaskSpec& task, const KernelCandidate& candidate) {
    const auto started = Clock::now();
    EvaluationResult r;
    r.task_id = task.id;
    r.iteration = candidate.iteration;
    r.category = task.category;
    r.stage = CandidateStage::Generated;

    auto finish = [&]() -> EvaluationResult {
        r.total_duration_s = std::chrono::duration<double>(Clock::now() - started).count();
        if (ctx.options.results_path) append_result(*ctx.options.results_path, r);
        return r;
    };
    auto infra = [&](const std::string& where, const std::exception& e) {
        r.infra_error = where + ": " + e.what();
        note(ctx, where + ": infra error: " + e.what());
    };

    std::optional<double> baseline;
    if (!ctx.options.skip_benchmark) {
        try {
            baseline = baseline_latency(ctx, task);
        } catch (const std::exception& e) {
            infra("baseline", e);
            return finish();
        }
    }

    try {
        InjectionGuard guard(ctx.ws, task, candidate, ctx.config);
        note(ctx, "register: " + task.id + " iteration " + std::to_string(candidate.iteration) + " injected into " +
                      ctx.ws.root().string());

        BuildResult b = build(ctx.ws, ctx.config.build, ctx.options.build_mode, ctx.options.build_timeout_s);
        r.build_duration_s = b.duration_s;
        if (!b.success) {
            std::set<std::string> names(task.target_file_names.begin(), task.target_file_names.end());
            ErrorExtraction ex = extract_errors(b.log_text, names);
            attach_contexts(ex.records, ctx.ws.root());
            r.errors = std::move(ex.records);
            r.other_errors = std::move(ex.other_errors);
            if (r.errors.empty() && r.other_errors.empty()) {
                // Nothing parseable: keep the tail of the log so the debugger sees something.
                const std::size_t keep = 4000;
                r.other_errors.push_back(b.log_text.size() > keep ? b.log_text.substr(b.log_text.size() - keep)
                                                                  : b.log_text);
            }
            r.stage = CandidateStage::Failed;
            note(ctx, "compile: failed with " + std::to_string(r.errors.size()) + " error record(s)");
            guard.restore_now();
            return finish();
        }
        r.compiled = true;
        r.stage = CandidateStage::Compiled;
        note(ctx, "compile: ok in " + std::to_string(b.duration_s) + " s");

        VerifyOptions vo;
        vo.tolerance = ctx.options.tolerance;
        vo.mode = ctx.options.tolerance_mode;
        try {
            VerifyResult v = run_verification(ctx.ws, ctx.config, task, ctx.transport, vo);
            r.max_abs_diff = v.max_abs_diff;
            r.mismatch_count = v.mismatch_count;
            r.first_mismatch_index = v.first_mismatch_index;
            if (!v.passed) {
                r.exec_error = "output mismatch: " + v.detail;
                r.stage = CandidateStage::Failed;
                note(ctx, "verify: failed, " + v.detail);
                capture_target_graph(ctx, task, r);
                guard.restore_now();
                return finish();
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ExecutionFailure && e.code() != ErrorCode::OutputMissing &&
                e.code() != ErrorCode::MalformedTensor)
                throw;
            r.exec_error = e.what();
            r.stage = CandidateStage::Failed;
            note(ctx, std::string("verify: ") + e.what());
            capture_target_graph(ctx, task, r);
            guard.restore_now();
            return finish();
        }
        r.correct = true;
        r.stage = CandidateStage::Verified;
        note(ctx, "verify: passed, max |diff| " + std::to_string(*r.max_abs_diff));

        if (ctx.options.skip_benchmark) {
            note(ctx, "benchmark: skipped");
        } else {
            try {
                PerfProfile p = run_benchmark(ctx.ws, ctx.config, task, ctx.transport, ctx.options.bench);
                r.perf = p;
                r.t_generated_ms = p.mean_ms;
                r.t_baseline_ms = baseline;
                r.speedup = speedup(*baseline, p.mean_ms);
                r.stage = CandidateStage::Benchmarked;
                note(ctx, "benchmark: " + fmt_ms(p.mean_ms) + " vs baseline " + fmt_ms(*baseline) + ", speedup " +
                              std::to_string(*r.speedup));
            } catch (const Error& e) {
                infra("benchmark", e);
            }
        }
        guard.restore_now();
    } catch (const std::exception& e) {
        infra("pipeline", e);
        // The guard has restored by now; a restore failure leaves the injection recorded on disk.
    }
    return finish();
}

std::vector<EvaluationResult> parallel_evaluate(Workspace& base, const FrameworkConfig& config,
                                                const std::vector<std::pair<const TaskSpec*, KernelCandidate>>& group,
                                                const PipelineOptions& options, const ParallelOptions& parallel,
                                                const StageLog& log) {
    if (parallel.jobs < 1) fail(ErrorCode::InvalidArgument, "jobs must be >= 1");
    std::vector<EvaluationResult> results(group.size());
    if (group.empty()) return results;

    auto transport_for = [&](int worker) -> std::unique_ptr<Transport> {
        if (parallel.make_transport) return parallel.make_transport(worker);
        return std::make_unique<LocalTransport>();
    };
    std::mutex log_mu;
    auto worker_log = [&](int worker) -> StageLog {
        if (!log) return {};
        return [&, worker](const std::string& line) {
            std::lock_guard lk(log_mu);
            log("[" + std::to_string(worker) + "] " + line);
        };
    };

    const std::size_t workers = std::min<std::size_t>(parallel.jobs, group.size());
    if (workers == 1) {
        auto t = transport_for(0);
        PipelineContext ctx{base, config, *t, options, worker_log(0)};
        for (std::size_t i = 0; i < group.size(); ++i) results[i] = evaluate(ctx, *group[i].first, group[i].second);
        return results;
    }

    std::vector<Workspace> clones;
    try {
        for (std::size_t w = 0; w < workers; ++w) {
            clones.push_back(
                clone_workspace(base, parallel.clone_label + "-" + std::to_string(w), parallel.clone_parent));
            if (parallel.precompile_clones) {
                BuildResult b = precompile_base(clones.back(), config.build);
                if (!b.success) fail(ErrorCode::ExecutionFailure, "clone does not build:\n" + b.log_text);
            }
        }
    } catch (...) {
        std::error_code ec;
        for (auto& c : clones) fs::remove_all(c.root(), ec);
        throw;
    }

    std::mutex next_mu;
    std::size_t next = 0;
    auto run_worker = [&](std::size_t w) {
        std::unique_ptr<Transport> t;
        std::string setup_error;
        try {
            t = transport_for(static_cast<int>(w));
        } catch (const std::exception& e) {
            setup_error = e.what();
        }
        PipelineOptions opts = options;
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lk(next_mu);
                if (next >= group.size()) return;
                i = next++;
            }
            if (!t) {
                EvaluationResult r;
                r.task_id = group[i].first->id;
                r.iteration = group[i].second.iteration;
                r.category = group[i].first->category;
                r.infra_error = "transport: " + setup_error;
                results[i] = std::move(r);
                continue;
            }
            PipelineContext ctx{clones[w], config, *t, opts, worker_log(static_cast<int>(w))};
            results[i] = evaluate(ctx, *group[i].first, group[i].second);
        }
    };

    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(run_worker, w);
    for (auto& th : threads) th.join();

    if (!parallel.keep_clones) {
        std::error_code ec;
        for (auto& c : clones) fs::remove_all(c.root(), ec);
    }
    return results;
}

}  // namespace kf
