#include "kf/benchmarking.hpp"

#include "kf/error.hpp"
#include "kf/fsutil.hpp"
#include "kf/operator_runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace kf {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_long(std::string_view s, long long& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_real(std::string_view s, double& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

[[noreturn]] void malformed(std::size_t lineno, std::string_view line, const std::string& why) {
    fail(ErrorCode::MalformedPerfLog,
         "line " + std::to_string(lineno) + ": " + why + ": '" + std::string(line) + "'");
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

PerfProfile parse_perf_log(std::string_view text) {
    PerfProfile p;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        std::string_view line = trim(raw);

        if (line.rfind("iter=", 0) == 0) {
            auto sp = line.find(' ');
            if (sp == std::string_view::npos) malformed(lineno, line, "missing time_us");
            long long k = 0;
            if (!parse_long(line.substr(5, sp - 5), k)) malformed(lineno, line, "bad iteration index");
            std::string_view rest = trim(line.substr(sp + 1));
            if (rest.rfind("time_us=", 0) != 0) malformed(lineno, line, "missing time_us");
            double t = 0;
            if (!parse_real(rest.substr(8), t)) malformed(lineno, line, "bad time_us");
            if (!(t > 0)) malformed(lineno, line, "time_us must be positive");
            long long expected = static_cast<long long>(p.samples_us.size()) + 1;
            if (k != expected)
                malformed(lineno, line, "expected iter=" + std::to_string(expected));
            p.samples_us.push_back(t);
        } else if (line.rfind("backend=", 0) == 0) {
            p.backend = std::string(line.substr(8));
            if (p.backend.empty()) malformed(lineno, line, "empty backend");
        } else if (line.rfind("threads=", 0) == 0) {
            long long n = 0;
            if (!parse_long(line.substr(8), n) || n < 1) malformed(lineno, line, "threads must be a positive integer");
            p.threads = static_cast<int>(n);
        }
    }
    if (p.samples_us.empty()) fail(ErrorCode::MalformedPerfLog, "no iter=<k> time_us=<t> lines");
    double sum = std::accumulate(p.samples_us.begin(), p.samples_us.end(), 0.0);
    p.mean_ms = sum / static_cast<double>(p.samples_us.size()) / 1000.0;
    p.median_ms = median_of(p.samples_us) / 1000.0;
    return p;
}

nlohmann::json to_json(const PerfProfile& p) {
    return {{"samples_us", p.samples_us}, {"warmup_count", p.warmup_count}, {"mean_ms", p.mean_ms},
            {"median_ms", p.median_ms},   {"backend", p.backend},           {"threads", p.threads}};
}

PerfProfile perf_profile_from_json(const nlohmann::json& j) {
    PerfProfile p;
    p.samples_us = j.at("samples_us").get<std::vector<double>>();
    p.warmup_count = j.value("warmup_count", 0);
    p.mean_ms = j.at("mean_ms").get<double>();
    p.median_ms = j.value("median_ms", 0.0);
    p.backend = j.value("backend", std::string("unknown"));
    p.threads = j.value("threads", 1);
    return p;
}

void real_sleep(double seconds) { std::this_thread::sleep_for(std::chrono::duration<double>(seconds)); }

bool utilization_gate(Transport& transport, const GateOptions& options) {
    for (int attempt = 0; attempt <= options.retries; ++attempt) {
        if (attempt > 0 && options.sleep) options.sleep(options.backoff_s);
        if (transport.utilization() < options.threshold) return true;
    }
    return false;
}

PerfProfile run_benchmark(const Workspace& ws, const FrameworkConfig& config, const TaskSpec& task,
                          Transport& transport, const BenchOptions& options) {
    if (options.iters < 1) fail(ErrorCode::InvalidArgument, "iters must be >= 1");
    if (options.warmup < 0) fail(ErrorCode::InvalidArgument, "warmup must be >= 0");
    if (!utilization_gate(transport, options.gate)) {
        std::ostringstream ss;
        ss << transport.endpoint() << " stayed at or above " << options.gate.threshold * 100
           << "% CPU utilization after " << options.gate.retries << " retries";
        fail(ErrorCode::DeviceBusy, ss.str());
    }
    StagedOperator op(ws, config, task, transport);
    auto exec = op.run(options.iters, options.warmup, options.timeout_s);
    if (exec.timed_out || exec.exit_code != 0) {
        std::string status = exec.timed_out ? "timed out" : "exit status " + std::to_string(exec.exit_code);
        fail(ErrorCode::ExecutionFailure, "operator runner " + status + "\n" + exec.err + exec.out);
    }
    PerfProfile p = parse_perf_log(exec.out);
    if (p.samples_us.size() != static_cast<std::size_t>(options.iters))
        fail(ErrorCode::MalformedPerfLog, "expected " + std::to_string(options.iters) + " samples, got " +
                                              std::to_string(p.samples_us.size()));
    p.warmup_count = options.warmup;
    return p;
}

double speedup(double baseline_ms, double generated_ms) {
    if (!(baseline_ms > 0) || !(generated_ms > 0) || !std::isfinite(baseline_ms) || !std::isfinite(generated_ms)) {
        std::ostringstream ss;
        ss << "latencies must be positive (baseline " << baseline_ms << " ms, generated " << generated_ms << " ms)";
        fail(ErrorCode::NonPositiveLatency, ss.str());
    }
    return baseline_ms / generated_ms;
}

double speedup(const PerfProfile& baseline, const PerfProfile& generated) {
    return speedup(baseline.mean_ms, generated.mean_ms);
}

BaselineCache::BaselineCache(fs::path file) : file_(std::move(file)) {
    if (!fs::exists(file_)) return;
    try {
        data_ = nlohmann::json::parse(read_text_file(file_));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, "baseline cache " + file_.string() + ": " + e.what());
    }
    if (!data_.is_object()) fail(ErrorCode::ParseError, "baseline cache " + file_.string() + " is not an object");
}

std::optional<double> BaselineCache::get(std::string_view endpoint, std::string_view task_id) const {
    std::lock_guard lk(mu_);
    auto e = data_.find(std::string(endpoint));
    if (e == data_.end()) return std::nullopt;
    auto t = e->find(std::string(task_id));
    if (t == e->end() || !t->is_number()) return std::nullopt;
    return t->get<double>();
}

void BaselineCache::put(std::string_view endpoint, std::string_view task_id, double mean_ms) {
    std::lock_guard lk(mu_);
    data_[std::string(endpoint)][std::string(task_id)] = mean_ms;
    save_locked();
}

void BaselineCache::save_locked() const {
    if (file_.empty()) return;
    fs::path tmp = file_;
    tmp += ".tmp";
    write_text_file(tmp, data_.dump(2) + "\n");
    fs::rename(tmp, file_);
}

}  // namespace kf
