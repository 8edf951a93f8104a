#include "kf/metrics.hpp"

#include "kf/error.hpp"
#include "kf/fsutil.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace fs = std::filesystem;

namespace kf {

using nlohmann::json;

namespace {

// 3 = correct with timing, 2 = correct, 1 = compiled, 0 = neither.
int tier(const EvaluationResult& r) {
    if (r.correct && r.speedup) return 3;
    if (r.correct) return 2;
    if (r.compiled) return 1;
    return 0;
}

bool better(const EvaluationResult& a, const EvaluationResult& b) {
    int ta = tier(a), tb = tier(b);
    if (ta != tb) return ta > tb;
    if (ta == 3) return *a.speedup > *b.speedup;
    return false;
}

}  // namespace

std::size_t best_index(const std::vector<EvaluationResult>& results) {
    if (results.empty()) fail(ErrorCode::EmptyList, "best_of needs at least one result");
    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i)
        if (better(results[i], results[best])) best = i;
    return best;
}

const EvaluationResult& best_of(const std::vector<EvaluationResult>& results) {
    return results[best_index(results)];
}

double round1(double pct) { return std::round(pct * 10.0) / 10.0; }

namespace {

void tally(RateSet& s, const EvaluationResult& r, const std::vector<double>& thresholds) {
    ++s.n;
    if (r.compiled) ++s.compiled;
    if (r.correct) ++s.correct;
    for (double p : thresholds) {
        auto& c = s.faster[p];
        if (r.correct && r.speedup && *r.speedup > p) ++c;
    }
}

void finish(RateSet& s, const std::vector<double>& thresholds) {
    auto pct = [&](std::size_t k) { return s.n == 0 ? 0.0 : round1(100.0 * static_cast<double>(k) / s.n); };
    s.csr_pct = pct(s.compiled);
    s.fcr_pct = pct(s.correct);
    for (double p : thresholds) {
        s.faster.try_emplace(p, 0);
        s.fast_p[p] = pct(s.faster[p]);
    }
}

}  // namespace

MetricsReport compute_metrics(const std::vector<EvaluationResult>& best, const std::vector<double>& thresholds) {
    if (best.empty()) fail(ErrorCode::EmptyList, "no results to summarise");
    for (double p : thresholds)
        if (!(p > 0)) fail(ErrorCode::InvalidArgument, "thresholds must be positive");
    MetricsReport rep;
    rep.thresholds = thresholds;
    for (auto c : kAllCategories) rep.per_category[c] = RateSet{};
    for (const auto& r : best) {
        tally(rep.overall, r, thresholds);
        tally(rep.per_category[r.category], r, thresholds);
    }
    finish(rep.overall, thresholds);
    for (auto& [c, s] : rep.per_category) finish(s, thresholds);
    rep.n_tasks = rep.overall.n;
    rep.csr_pct = rep.overall.csr_pct;
    rep.fcr_pct = rep.overall.fcr_pct;
    rep.fast_p = rep.overall.fast_p;
    return rep;
}

std::vector<EvaluationResult> best_per_task(const std::vector<EvaluationResult>& all) {
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<EvaluationResult>> groups;
    for (const auto& r : all) {
        auto [it, fresh] = groups.try_emplace(r.task_id);
        if (fresh) order.push_back(r.task_id);
        it->second.push_back(r);
    }
    std::vector<EvaluationResult> out;
    for (const auto& id : order) out.push_back(best_of(groups[id]));
    return out;
}

double grpo_reward(bool compiled, bool correct, std::optional<double> t_baseline_ms,
                   std::optional<double> t_generated_ms, bool shaped) {
    if (correct && !compiled) fail(ErrorCode::InvalidArgument, "a correct kernel must have compiled");
    double ratio = 0.0;
    if (correct) {
        if (!t_baseline_ms || !t_generated_ms) fail(ErrorCode::MissingLatency, "correct kernel needs both latencies");
        if (!(*t_baseline_ms > 0) || !(*t_generated_ms > 0))
            fail(ErrorCode::NonPositiveLatency, "latencies must be positive");
        ratio = *t_baseline_ms / *t_generated_ms;
    }
    double c = correct ? 1.0 : 0.0;
    double reward = kCorrectReward * c + ratio * c;
    if (shaped) reward += kCompileReward * (compiled ? 1.0 : 0.0);
    return reward;
}

std::string threshold_label(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fast_%g", p);
    std::string s = buf;
    if (s.find('.') == std::string::npos) s += ".0";
    return s;
}

namespace {

json rates_json(const RateSet& s) {
    json fp = json::object();
    json fc = json::object();
    for (const auto& [p, v] : s.fast_p) fp[threshold_label(p)] = v;
    for (const auto& [p, v] : s.faster) fc[threshold_label(p)] = v;
    return {{"n", s.n},          {"compiled", s.compiled}, {"correct", s.correct}, {"csr", s.csr_pct},
            {"fcr", s.fcr_pct},  {"fast_p", fp},           {"faster_counts", fc}};
}

RateSet rates_from(const json& j, const std::vector<double>& thresholds) {
    RateSet s;
    s.n = j.at("n").get<std::size_t>();
    s.compiled = j.at("compiled").get<std::size_t>();
    s.correct = j.at("correct").get<std::size_t>();
    s.csr_pct = j.at("csr").get<double>();
    s.fcr_pct = j.at("fcr").get<double>();
    for (double p : thresholds) {
        s.fast_p[p] = j.at("fast_p").at(threshold_label(p)).get<double>();
        s.faster[p] = j.at("faster_counts").at(threshold_label(p)).get<std::size_t>();
    }
    return s;
}

}  // namespace

json to_json(const MetricsReport& r) {
    json cats = json::object();
    for (const auto& [c, s] : r.per_category) cats[std::string(to_string(c))] = rates_json(s);
    json fp = json::object();
    for (const auto& [p, v] : r.fast_p) fp[threshold_label(p)] = v;
    return {{"n_tasks", r.n_tasks},   {"csr_pct", r.csr_pct},   {"fcr_pct", r.fcr_pct},
            {"fast_p", fp},           {"thresholds", r.thresholds}, {"overall", rates_json(r.overall)},
            {"per_category", cats}};
}

MetricsReport metrics_from_json(const json& j) {
    try {
        MetricsReport r;
        r.thresholds = j.at("thresholds").get<std::vector<double>>();
        r.n_tasks = j.at("n_tasks").get<std::size_t>();
        r.csr_pct = j.at("csr_pct").get<double>();
        r.fcr_pct = j.at("fcr_pct").get<double>();
        for (double p : r.thresholds) r.fast_p[p] = j.at("fast_p").at(threshold_label(p)).get<double>();
        r.overall = rates_from(j.at("overall"), r.thresholds);
        for (const auto& [name, v] : j.at("per_category").items()) {
            auto c = parse_category(name);
            if (!c) fail(ErrorCode::ParseError, "unknown category '" + name + "' in report");
            r.per_category[*c] = rates_from(v, r.thresholds);
        }
        return r;
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, std::string("metrics report: ") + e.what());
    }
}

std::string render_table(const MetricsReport& r) {
    std::vector<std::string> header = {"Category", "N", "CSR", "FCR"};
    for (double p : r.thresholds) header.push_back(threshold_label(p));
    std::vector<std::vector<std::string>> rows;
    auto row = [&](std::string name, const RateSet& s) {
        char buf[32];
        std::vector<std::string> cells = {std::move(name), std::to_string(s.n)};
        std::snprintf(buf, sizeof buf, "%.1f", s.csr_pct);
        cells.push_back(buf);
        std::snprintf(buf, sizeof buf, "%.1f", s.fcr_pct);
        cells.push_back(buf);
        for (double p : r.thresholds) {
            auto it = s.fast_p.find(p);
            std::snprintf(buf, sizeof buf, "%.1f", it == s.fast_p.end() ? 0.0 : it->second);
            cells.push_back(buf);
        }
        rows.push_back(std::move(cells));
    };
    row("Overall", r.overall);
    for (auto c : kAllCategories) {
        auto it = r.per_category.find(c);
        row(std::string(to_string(c)), it == r.per_category.end() ? RateSet{} : it->second);
    }

    std::vector<std::size_t> width(header.size());
    for (size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
    for (const auto& cells : rows)
        for (size_t i = 0; i < cells.size(); ++i) width[i] = std::max(width[i], cells[i].size());

    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i == 0) {
                out << cells[i] << std::string(width[i] - cells[i].size(), ' ');
            } else {
                out << "  " << std::string(width[i] - cells[i].size(), ' ') << cells[i];
            }
        }
        out << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (auto w : width) total += w + 2;
    out << std::string(total - 2, '-') << '\n';
    for (const auto& cells : rows) emit(cells);
    return out.str();
}

void emit_report(const MetricsReport& r, const fs::path& path) {
    write_text_file(path, to_json(r).dump(2) + "\n");
    fs::path txt = path;
    txt.replace_extension(".txt");
    write_text_file(txt, render_table(r));
}

MetricsReport load_report(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return metrics_from_json(j);
}

std::vector<EvaluationResult> load_results(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<EvaluationResult> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        // Episode summaries share the file with per-candidate records.
        if (j.contains("record") && j["record"] != "evaluation") continue;
        try {
            out.push_back(evaluation_from_json(j.contains("result") ? j["result"] : j));
        } catch (const Error& e) {
            fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.detail());
        }
    }
    return out;
}

void append_result(const fs::path& path, const EvaluationResult& r) {
    static std::mutex mu;
    json j = {{"record", "evaluation"}, {"result", to_json(r)}};
    std::lock_guard lk(mu);
    append_text_file(path, j.dump() + "\n");
}

}  // namespace kf
