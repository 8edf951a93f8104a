#include "kf/evaluation.hpp"

#include "kf/error.hpp"

#include <cmath>

namespace kf {

using nlohmann::json;

void validate_result(const EvaluationResult& r) {
    if (r.correct && !r.compiled) fail(ErrorCode::ValidationError, r.task_id + ": correct without compiled");
    if (r.speedup && !r.correct) fail(ErrorCode::ValidationError, r.task_id + ": speedup without correct");
    if (r.speedup && r.t_baseline_ms && r.t_generated_ms) {
        double expect = *r.t_baseline_ms / *r.t_generated_ms;
        if (std::fabs(expect - *r.speedup) > 1e-9 * std::fabs(expect))
            fail(ErrorCode::ValidationError, r.task_id + ": speedup disagrees with latencies");
    }
}

namespace {

template <class T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
    j[key] = v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

json record_json(const ErrorRecord& e) {
    json j = {{"file", e.file}, {"line", e.line}};
    put_opt(j, "column", e.column);
    j["message"] = e.message;
    j["context"] = e.context;
    j["classification"] = to_string(e.classification);
    return j;
}

ErrorRecord record_from(const json& j) {
    ErrorRecord e;
    e.file = j.at("file").get<std::string>();
    e.line = j.at("line").get<int>();
    e.column = get_opt<int>(j, "column");
    e.message = j.at("message").get<std::string>();
    e.context = j.value("context", std::string());
    e.classification = j.at("classification").get<std::string>() == "Local" ? ErrorClass::Local : ErrorClass::CrossFile;
    return e;
}

}  // namespace

json to_json(const EvaluationResult& r) {
    json j;
    j["task_id"] = r.task_id;
    j["iteration"] = r.iteration;
    j["category"] = to_string(r.category);
    j["stage"] = to_string(r.stage);
    j["compiled"] = r.compiled;
    j["correct"] = r.correct;
    put_opt(j, "t_generated_ms", r.t_generated_ms);
    put_opt(j, "t_baseline_ms", r.t_baseline_ms);
    put_opt(j, "speedup", r.speedup);
    j["errors"] = json::array();
    for (const auto& e : r.errors) j["errors"].push_back(record_json(e));
    j["other_errors"] = r.other_errors;
    put_opt(j, "max_abs_diff", r.max_abs_diff);
    put_opt(j, "mismatch_count", r.mismatch_count);
    put_opt(j, "first_mismatch_index", r.first_mismatch_index);
    j["exec_error"] = r.exec_error;
    j["infra_error"] = r.infra_error;
    j["perf"] = r.perf ? to_json(*r.perf) : json(nullptr);
    j["target_graph"] = r.target_graph ? *r.target_graph : json(nullptr);
    j["build_duration_s"] = r.build_duration_s;
    j["total_duration_s"] = r.total_duration_s;
    return j;
}

EvaluationResult evaluation_from_json(const json& j) {
    try {
        EvaluationResult r;
        r.task_id = j.at("task_id").get<std::string>();
        r.iteration = j.value("iteration", 0);
        auto cat = parse_category(j.at("category").get<std::string>());
        if (!cat) fail(ErrorCode::ParseError, "unknown category in result for " + r.task_id);
        r.category = *cat;
        auto stage = parse_stage(j.value("stage", std::string("Generated")));
        if (!stage) fail(ErrorCode::ParseError, "unknown stage in result for " + r.task_id);
        r.stage = *stage;
        r.compiled = j.at("compiled").get<bool>();
        r.correct = j.at("correct").get<bool>();
        r.t_generated_ms = get_opt<double>(j, "t_generated_ms");
        r.t_baseline_ms = get_opt<double>(j, "t_baseline_ms");
        r.speedup = get_opt<double>(j, "speedup");
        if (j.contains("errors"))
            for (const auto& e : j["errors"]) r.errors.push_back(record_from(e));
        r.other_errors = j.value("other_errors", std::vector<std::string>{});
        r.max_abs_diff = get_opt<double>(j, "max_abs_diff");
        r.mismatch_count = get_opt<std::size_t>(j, "mismatch_count");
        r.first_mismatch_index = get_opt<std::size_t>(j, "first_mismatch_index");
        r.exec_error = j.value("exec_error", std::string());
        r.infra_error = j.value("infra_error", std::string());
        if (j.contains("perf") && !j["perf"].is_null()) r.perf = perf_profile_from_json(j["perf"]);
        if (j.contains("target_graph") && !j["target_graph"].is_null()) r.target_graph = j["target_graph"];
        r.build_duration_s = j.value("build_duration_s", 0.0);
        r.total_duration_s = j.value("total_duration_s", 0.0);
        return r;
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, std::string("evaluation record: ") + e.what());
    }
}

EvaluationResult mask_timing(EvaluationResult r) {
    r.t_generated_ms.reset();
    r.t_baseline_ms.reset();
    r.speedup.reset();
    r.perf.reset();
    r.build_duration_s = 0.0;
    r.total_duration_s = 0.0;
    return r;
}

}  // namespace kf
