#pragma once

#include "kf/evaluation.hpp"
#include "kf/task_model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kf {

// Ranking for best-of-K: correct with the largest speedup, then correct
// without timing, then compiled, then neither; earliest index wins ties.
std::size_t best_index(const std::vector<EvaluationResult>& results);  // EmptyList
const EvaluationResult& best_of(const std::vector<EvaluationResult>& results);

inline const std::vector<double> kDefaultThresholds = {0.5, 1.0, 1.5};

struct RateSet {
    std::size_t n = 0;
    std::size_t compiled = 0;
    std::size_t correct = 0;
    std::map<double, std::size_t> faster;  // threshold -> count with speedup > threshold
    double csr_pct = 0.0;
    double fcr_pct = 0.0;
    std::map<double, double> fast_p;  // threshold -> percentage

    friend bool operator==(const RateSet&, const RateSet&) = default;
};

struct MetricsReport {
    std::size_t n_tasks = 0;
    double csr_pct = 0.0;
    double fcr_pct = 0.0;
    std::map<double, double> fast_p;
    std::vector<double> thresholds;
    // Every category appears, empty ones with zero counts.
    std::map<OperatorCategory, RateSet> per_category;
    RateSet overall;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Percentages are rounded to one decimal place.
double round1(double pct);

// One result per task. EmptyList on empty input.
MetricsReport compute_metrics(const std::vector<EvaluationResult>& best_per_task,
                              const std::vector<double>& thresholds = kDefaultThresholds);

// Groups by task id (first-seen order) and keeps best_of of each group.
std::vector<EvaluationResult> best_per_task(const std::vector<EvaluationResult>& all);

// Shaped: 0.3*compile + 0.3*correct + (Tb/Tg)*correct.
// Unshaped: 0.3*correct + (Tb/Tg)*correct.
// MissingLatency when correct lacks either latency, NonPositiveLatency for
// latencies <= 0, InvalidArgument for correct without compiled.
double grpo_reward(bool compiled, bool correct, std::optional<double> t_baseline_ms,
                   std::optional<double> t_generated_ms, bool shaped = true);

inline constexpr double kCompileReward = 0.3;
inline constexpr double kCorrectReward = 0.3;

std::string threshold_label(double p);  // "fast_1.0"

nlohmann::json to_json(const MetricsReport& r);
MetricsReport metrics_from_json(const nlohmann::json& j);

// Plain-text table: CSR, FCR, then one fast_p column per threshold; an
// "Overall" row followed by one row per category.
std::string render_table(const MetricsReport& r);

// Writes <path> (JSON) and <path with .txt extension> (table).
void emit_report(const MetricsReport& r, const std::filesystem::path& path);
MetricsReport load_report(const std::filesystem::path& path);

// Reads a JSON-lines results file. ParseError names the line number.
std::vector<EvaluationResult> load_results(const std::filesystem::path& path);
void append_result(const std::filesystem::path& path, const EvaluationResult& r);

}  // namespace kf
