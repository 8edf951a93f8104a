// kfh: evaluate generated kernels against a framework checkout, run agent
// episodes, and summarise results.

#include "kf/agents/episode.hpp"
#include "kf/benchmarking.hpp"
#include "kf/error.hpp"
#include "kf/fsutil.hpp"
#include "kf/metrics.hpp"
#include "kf/pipeline.hpp"
#include "kf/task_model.hpp"
#include "kf/workspace.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitInfra = static_cast<int>(kf::ExitStatus::Infra);

struct RunConfig {
    std::string manifest;
    std::string framework_root;
    std::string transport = "local";
    double tolerance = kf::kDefaultTolerance;
    bool relative = false;
    int iters = kf::kDefaultIters;
    int warmup = kf::kDefaultWarmup;
    int jobs = 1;
    std::string results;
    bool no_bench = false;
    std::string baseline_cache;
    bool remeasure_baseline = false;
    double build_timeout = kf::kDefaultBuildTimeoutS;
    bool full_build = false;
    double busy_threshold = kf::kDefaultBusyThreshold;
    int gate_retries = kf::kDefaultGateRetries;
    double gate_backoff = kf::kDefaultGateBackoffS;
    bool quiet = false;
};

void add_run_options(CLI::App* app, RunConfig& c, bool needs_task_context = true) {
    if (needs_task_context) {
        app->add_option("--manifest", c.manifest, "Task manifest")->required()->check(CLI::ExistingFile);
        app->add_option("--framework-root", c.framework_root, "Framework checkout")->required()->check(CLI::ExistingDirectory);
    }
    app->add_option("--transport", c.transport, "local | device:<serial>");
    app->add_option("--tolerance", c.tolerance, "Verification tolerance")->check(CLI::PositiveNumber);
    app->add_flag("--relative", c.relative, "Scale the tolerance by max(1, |expected|)");
    app->add_option("--iters", c.iters, "Measured iterations")->check(CLI::PositiveNumber);
    app->add_option("--warmup", c.warmup, "Warm-up iterations")->check(CLI::NonNegativeNumber);
    app->add_option("--jobs", c.jobs, "Concurrent workspaces")->check(CLI::PositiveNumber);
    app->add_option("--results", c.results, "Append result records to this JSON-lines file");
    app->add_flag("--no-bench", c.no_bench, "Stop after verification (local transport only)");
    app->add_option("--baseline-cache", c.baseline_cache, "JSON file caching measured baselines");
    app->add_flag("--remeasure-baseline", c.remeasure_baseline, "Ignore cached baselines");
    app->add_option("--build-timeout", c.build_timeout, "Seconds per build")->check(CLI::PositiveNumber);
    app->add_flag("--full-build", c.full_build, "Use the full build command instead of the incremental one");
    app->add_option("--busy-threshold", c.busy_threshold, "CPU utilization gate")->check(CLI::Range(0.0, 1.0));
    app->add_option("--gate-retries", c.gate_retries, "Utilization gate retries")->check(CLI::NonNegativeNumber);
    app->add_option("--gate-backoff", c.gate_backoff, "Seconds between gate samples")->check(CLI::NonNegativeNumber);
    app->add_flag("-q,--quiet", c.quiet, "Suppress stage progress on stderr");
}

kf::PipelineOptions pipeline_options(const RunConfig& c, kf::BaselineCache* cache) {
    if (c.no_bench && c.transport != "local")
        kf::fail(kf::ErrorCode::InvalidArgument, "--no-bench is only available with the local transport");
    kf::PipelineOptions o;
    o.tolerance = c.tolerance;
    o.tolerance_mode = c.relative ? kf::ToleranceMode::Relative : kf::ToleranceMode::Absolute;
    o.bench.iters = c.iters;
    o.bench.warmup = c.warmup;
    o.bench.gate.threshold = c.busy_threshold;
    o.bench.gate.retries = c.gate_retries;
    o.bench.gate.backoff_s = c.gate_backoff;
    o.skip_benchmark = c.no_bench;
    o.build_mode = c.full_build ? kf::BuildMode::Full : kf::BuildMode::Incremental;
    o.build_timeout_s = c.build_timeout;
    o.baseline_cache = cache;
    o.remeasure_baseline = c.remeasure_baseline;
    if (!c.results.empty()) o.results_path = c.results;
    return o;
}

kf::StageLog stderr_log(const RunConfig& c) {
    if (c.quiet) return {};
    return [](const std::string& line) { std::cerr << "[kfh] " << line << "\n"; };
}

std::unique_ptr<kf::BaselineCache> open_cache(const RunConfig& c) {
    if (c.baseline_cache.empty()) return std::make_unique<kf::BaselineCache>();
    return std::make_unique<kf::BaselineCache>(c.baseline_cache);
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& manifest_path, const std::string& framework_root) {
    kf::Manifest m = kf::load_manifest(manifest_path);
    auto hist = kf::category_histogram(m);
    json out = {{"schema_version", m.schema_version}, {"tasks", m.tasks.size()}};
    json h = json::object();
    for (auto c : kf::kAllCategories) h[std::string(kf::to_string(c))] = hist[c];
    out["categories"] = h;
    if (!framework_root.empty()) {
        kf::FrameworkConfig cfg = kf::load_framework_config_for(framework_root);
        json unresolved = json::array();
        for (const auto& t : m.tasks) {
            try {
                kf::resolve_targets(t, cfg, framework_root);
            } catch (const kf::Error& e) {
                unresolved.push_back({{"task", t.id}, {"error", e.detail()}});
            }
        }
        out["unresolved"] = unresolved;
        std::cout << out.dump(2) << "\n";
        return unresolved.empty() ? 0 : kExitInfra;
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_eval(const RunConfig& c, const std::string& task_id, const std::vector<std::string>& candidate_dirs) {
    kf::Manifest m = kf::load_manifest(c.manifest);
    const kf::TaskSpec& task = m.at(task_id);
    kf::FrameworkConfig cfg = kf::load_framework_config_for(c.framework_root);
    kf::Workspace ws = kf::Workspace::open(c.framework_root, "base");
    if (ws.is_injected())
        kf::fail(kf::ErrorCode::AlreadyInjected,
                 "framework tree holds a leftover injection; run `kfh workspace restore` first");

    std::vector<std::pair<const kf::TaskSpec*, kf::KernelCandidate>> group;
    for (size_t i = 0; i < candidate_dirs.size(); ++i)
        group.emplace_back(&task, kf::load_candidate_dir(candidate_dirs[i], task, static_cast<int>(i)));

    auto cache = open_cache(c);
    kf::PipelineOptions opts = pipeline_options(c, cache.get());
    kf::ParallelOptions par;
    par.jobs = c.jobs;
    const std::string spec = c.transport;
    const kf::DeviceBridgeConfig bridge = cfg.bridge;
    par.make_transport = [spec, bridge](int worker) {
        return kf::make_transport(spec, bridge, "w" + std::to_string(worker));
    };
    auto results = kf::parallel_evaluate(ws, cfg, group, opts, par, stderr_log(c));

    int worst = 0;
    json out = json::array();
    for (const auto& r : results) {
        out.push_back(kf::to_json(r));
        worst = std::max(worst, static_cast<int>(kf::exit_status(r)));
    }
    std::cout << (results.size() == 1 ? out[0].dump(2) : out.dump(2)) << "\n";
    return worst;
}

int cmd_agent(const RunConfig& c, const std::string& task_id, const std::string& transcript,
              const std::string& banks_path, int max_iters, const std::string& stop_at, const std::string& memory_path) {
    kf::Manifest m = kf::load_manifest(c.manifest);
    const kf::TaskSpec& task = m.at(task_id);
    kf::FrameworkConfig cfg = kf::load_framework_config_for(c.framework_root);
    kf::PromptBanks banks = kf::load_banks(banks_path);
    kf::Workspace ws = kf::Workspace::open(c.framework_root, "base");

    std::unique_ptr<kf::LlmClient> client;
    if (!transcript.empty()) {
        client = kf::ScriptedClient::from_file(transcript);
    } else {
        client = std::make_unique<kf::HttpClient>(kf::HttpClient::from_env());
    }

    kf::ReflectiveMemory memory;
    if (!memory_path.empty() && fs::exists(memory_path)) {
        try {
            memory.merge_json(json::parse(kf::read_text_file(memory_path)));
        } catch (const json::parse_error& e) {
            kf::fail(kf::ErrorCode::ParseError, memory_path + ": " + e.what());
        }
    }

    auto cache = open_cache(c);
    kf::EpisodeOptions eo;
    eo.max_iters = max_iters;
    if (!stop_at.empty()) {
        auto s = kf::parse_stage(stop_at);
        if (!s) kf::fail(kf::ErrorCode::InvalidArgument, "unknown stage '" + stop_at + "'");
        eo.stop_at = *s;
    }
    eo.pipeline = pipeline_options(c, cache.get());
    eo.memory = &memory;
    if (!c.results.empty()) eo.log_path = c.results;
    eo.log = stderr_log(c);

    auto transport = kf::make_transport(c.transport, cfg.bridge);
    auto save_memory = [&] {
        if (!memory_path.empty()) kf::write_text_file(memory_path, memory.to_json().dump(2) + "\n");
    };
    try {
        kf::EpisodeResult r = kf::run_episode(task, ws, cfg, *transport, *client, banks, eo);
        save_memory();
        std::cout << kf::to_json(r).dump(2) << "\n";
        return static_cast<int>(kf::exit_status(r.best_result()));
    } catch (const kf::EpisodeAborted& e) {
        save_memory();
        std::cout << kf::to_json(e.partial()).dump(2) << "\n";
        throw;
    }
}

int cmd_bench(const RunConfig& c, const std::string& task_id, const std::string& candidate_dir) {
    kf::Manifest m = kf::load_manifest(c.manifest);
    const kf::TaskSpec& task = m.at(task_id);
    kf::FrameworkConfig cfg = kf::load_framework_config_for(c.framework_root);
    kf::Workspace ws = kf::Workspace::open(c.framework_root, "base");
    auto transport = kf::make_transport(c.transport, cfg.bridge);
    kf::PipelineOptions opts = pipeline_options(c, nullptr);
    auto log = stderr_log(c);

    std::optional<kf::InjectionGuard> guard;
    std::optional<kf::KernelCandidate> cand;
    if (!candidate_dir.empty()) {
        cand = kf::load_candidate_dir(candidate_dir, task);
        guard.emplace(ws, task, *cand, cfg);
    }
    kf::BuildResult b = kf::build(ws, cfg.build, opts.build_mode, opts.build_timeout_s);
    if (!b.success) {
        std::cerr << b.log_text;
        return static_cast<int>(kf::ExitStatus::CompileFail);
    }
    if (log) log("compile: ok");
    kf::PerfProfile p = kf::run_benchmark(ws, cfg, task, *transport, opts.bench);
    if (guard) guard->restore_now();
    json out = kf::to_json(p);
    out["task_id"] = task.id;
    out["endpoint"] = transport->endpoint();
    out["subject"] = candidate_dir.empty() ? "framework" : "candidate";
    std::cout << out.dump(2) << "\n";
    return 0;
}

std::vector<double> parse_thresholds(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t used = 0;
            double v = std::stod(item, &used);
            if (used != item.size() || !(v > 0)) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            kf::fail(kf::ErrorCode::InvalidArgument, "bad threshold '" + item + "'");
        }
    }
    if (out.empty()) kf::fail(kf::ErrorCode::InvalidArgument, "no thresholds given");
    return out;
}

int cmd_report(const std::string& results, const std::string& thresholds, const std::string& out_path) {
    auto all = kf::load_results(results);
    if (all.empty()) kf::fail(kf::ErrorCode::EmptyList, results + " holds no evaluation records");
    kf::MetricsReport rep = kf::compute_metrics(kf::best_per_task(all), parse_thresholds(thresholds));
    if (!out_path.empty()) kf::emit_report(rep, out_path);
    std::cout << kf::render_table(rep);
    return 0;
}

int cmd_reward(bool compiled, bool correct, std::optional<double> tb, std::optional<double> tg, bool unshaped) {
    double r = kf::grpo_reward(compiled, correct, tb, tg, !unshaped);
    std::printf("%.6f\n", r);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel evaluation harness"};
    app.require_subcommand(1);
    int rc = 0;

    std::string v_manifest, v_root;
    auto* validate = app.add_subcommand("validate", "Check a task manifest (and operator locations)");
    validate->add_option("--manifest", v_manifest, "Task manifest")->required();
    validate->add_option("--framework-root", v_root, "Also resolve every task's operator sources here");

    RunConfig eval_cfg;
    std::string eval_task;
    std::vector<std::string> eval_candidates;
    auto* eval = app.add_subcommand("eval", "Inject, build, verify and benchmark candidates");
    add_run_options(eval, eval_cfg);
    eval->add_option("--task", eval_task, "Task id")->required();
    eval->add_option("--candidate", eval_candidates, "Candidate directory (repeatable)")->required()->check(CLI::ExistingDirectory);

    RunConfig agent_cfg;
    std::string agent_task, transcript, banks, stop_at, memory_path;
    int max_iters = 10;
    auto* agent = app.add_subcommand("agent", "Run a Coder/Debugger/Accelerator episode");
    add_run_options(agent, agent_cfg);
    agent->add_option("--task", agent_task, "Task id")->required();
    agent->add_option("--transcript", transcript, "Replay model answers from this file instead of KF_LLM_ENDPOINT");
    agent->add_option("--banks", banks, "Prompt banks (headers and examples)")->required();
    agent->add_option("--max-iters", max_iters, "Candidates per episode")->check(CLI::PositiveNumber);
    agent->add_option("--stop-at", stop_at, "Stop once a candidate reaches this stage");
    agent->add_option("--memory", memory_path, "Optimisation history file, read and updated");

    RunConfig bench_cfg;
    std::string bench_task, bench_candidate;
    auto* bench = app.add_subcommand("bench", "Benchmark the framework's operator or a candidate");
    add_run_options(bench, bench_cfg);
    bench->add_option("--task", bench_task, "Task id")->required();
    bench->add_option("--candidate", bench_candidate, "Candidate directory (default: framework's own kernel)");

    std::string report_results, report_thresholds = "0.5,1.0,1.5", report_out;
    auto* report = app.add_subcommand("report", "Best-of-K metrics from a results file");
    report->add_option("--results", report_results, "JSON-lines results file")->required();
    report->add_option("--thresholds", report_thresholds, "Comma-separated fast_p thresholds");
    report->add_option("--out", report_out, "Write <out> (JSON) and <out>.txt");

    bool r_compiled = false, r_correct = false, r_unshaped = false;
    std::optional<double> r_tb, r_tg;
    auto* reward = app.add_subcommand("reward", "Training reward for one evaluated sample");
    reward->add_flag("--compiled", r_compiled);
    reward->add_flag("--correct", r_correct);
    reward->add_option("--baseline-ms", r_tb);
    reward->add_option("--generated-ms", r_tg);
    reward->add_flag("--unshaped", r_unshaped, "Omit the compilation term");

    auto* wsc = app.add_subcommand("workspace", "Manage framework workspaces");
    wsc->require_subcommand(1);
    std::string clone_root, clone_label, clone_parent;
    auto* clone = wsc->add_subcommand("clone", "Copy a clean workspace");
    clone->add_option("--root", clone_root, "Source workspace")->required()->check(CLI::ExistingDirectory);
    clone->add_option("--label", clone_label, "Label appended to the copy's name")->required();
    clone->add_option("--parent", clone_parent, "Directory for the copy (default: next to the source)");
    std::string restore_root;
    auto* restore = wsc->add_subcommand("restore", "Undo an injection left in a workspace");
    restore->add_option("--root", restore_root, "Workspace")->required()->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitInfra;
    }

    try {
        if (*validate) {
            rc = cmd_validate(v_manifest, v_root);
        } else if (*eval) {
            rc = cmd_eval(eval_cfg, eval_task, eval_candidates);
        } else if (*agent) {
            rc = cmd_agent(agent_cfg, agent_task, transcript, banks, max_iters, stop_at, memory_path);
        } else if (*bench) {
            rc = cmd_bench(bench_cfg, bench_task, bench_candidate);
        } else if (*report) {
            rc = cmd_report(report_results, report_thresholds, report_out);
        } else if (*reward) {
            rc = cmd_reward(r_compiled, r_correct, r_tb, r_tg, r_unshaped);
        } else if (*clone) {
            auto src = kf::Workspace::open(clone_root);
            std::optional<fs::path> parent;
            if (!clone_parent.empty()) parent = clone_parent;
            auto dst = kf::clone_workspace(src, clone_label, parent);
            std::cout << dst.root().string() << "\n";
        } else if (*restore) {
            auto ws = kf::Workspace::open(restore_root);
            kf::restore(ws);
            std::cout << "restored " << ws.root().string() << "\n";
        }
    } catch (const kf::Error& e) {
        std::cerr << "kfh: " << e.what() << "\n";
        return kExitInfra;
    } catch (const std::exception& e) {
        std::cerr << "kfh: " << e.what() << "\n";
        return kExitInfra;
    }
    return rc;
}
