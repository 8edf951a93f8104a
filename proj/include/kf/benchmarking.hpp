#pragma once

#include "kf/framework_config.hpp"
#include "kf/task_model.hpp"
#include "kf/transport.hpp"
#include "kf/workspace.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kf {

struct PerfProfile {
    std::vector<double> samples_us;
    int warmup_count = 0;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    std::string backend = "unknown";
    int threads = 1;
};

// Perf-log grammar, one record per line:
//   iter=<k> time_us=<t>     k = 1, 2, ... contiguous, t > 0
//   backend=<name>
//   threads=<n>
// Other lines are ignored. MalformedPerfLog names the first offending line.
PerfProfile parse_perf_log(std::string_view text);

nlohmann::json to_json(const PerfProfile& p);
PerfProfile perf_profile_from_json(const nlohmann::json& j);

inline constexpr int kDefaultIters = 100;
inline constexpr int kDefaultWarmup = 5;
inline constexpr double kDefaultBusyThreshold = 0.10;
inline constexpr int kDefaultGateRetries = 6;
inline constexpr double kDefaultGateBackoffS = 10.0;

using Sleeper = std::function<void(double seconds)>;

void real_sleep(double seconds);

struct GateOptions {
    double threshold = kDefaultBusyThreshold;
    int retries = kDefaultGateRetries;
    double backoff_s = kDefaultGateBackoffS;
    Sleeper sleep = real_sleep;
};

// True once transport.utilization() < threshold. Samples once, then up to
// `retries` more times with `backoff_s` between samples.
bool utilization_gate(Transport& transport, const GateOptions& options = {});

struct BenchOptions {
    int iters = kDefaultIters;
    int warmup = kDefaultWarmup;
    GateOptions gate;
    double timeout_s = 600.0;
};

// Gate, then run the built operator and parse its perf log. The sample count
// must equal iters. Errors: DeviceBusy, ExecutionFailure, MalformedPerfLog.
PerfProfile run_benchmark(const Workspace& ws, const FrameworkConfig& config, const TaskSpec& task,
                          Transport& transport, const BenchOptions& options = {});

// baseline / generated. NonPositiveLatency unless both are > 0.
double speedup(double baseline_ms, double generated_ms);
double speedup(const PerfProfile& baseline, const PerfProfile& generated);

// Measured native latencies keyed by (endpoint, task id), persisted as JSON.
class BaselineCache {
public:
    BaselineCache() = default;
    explicit BaselineCache(std::filesystem::path file);

    std::optional<double> get(std::string_view endpoint, std::string_view task_id) const;
    void put(std::string_view endpoint, std::string_view task_id, double mean_ms);

private:
    void save_locked() const;

    std::filesystem::path file_;
    nlohmann::json data_ = nlohmann::json::object();
    mutable std::mutex mu_;
};

}  // namespace kf
