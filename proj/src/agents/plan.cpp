#include "kf/agents/plan.hpp"

#include "kf/fsutil.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <sstream>

namespace kf {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(PlanKind k) {
    switch (k) {
        case PlanKind::Repair: return "Repair";
        case PlanKind::Correction: return "Correction";
        case PlanKind::Acceleration: return "Acceleration";
    }
    return "?";
}

std::string_view block_tag(PlanKind k) {
    switch (k) {
        case PlanKind::Repair: return "error_suggestion";
        case PlanKind::Correction: return "functionality_suggestion";
        case PlanKind::Acceleration: return "json";
    }
    return "";
}

namespace {

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace

std::vector<FencedBlock> find_fenced_blocks(std::string_view text) {
    std::vector<FencedBlock> blocks;
    std::optional<FencedBlock> open;
    std::vector<std::string> body;
    std::string last_nonempty;

    auto close = [&](bool closed) {
        std::string joined;
        for (size_t i = 0; i < body.size(); ++i) joined += body[i] + "\n";
        open->body = std::move(joined);
        open->closed = closed;
        blocks.push_back(std::move(*open));
        open.reset();
        body.clear();
    };

    for (const auto& line : split_lines(text)) {
        std::string t = trim(line);
        bool fence = t.rfind("```", 0) == 0;
        if (open) {
            if (fence && t == "```") {
                close(true);
                last_nonempty.clear();
                continue;
            }
            if (fence) {
                // A tagged fence inside an open block starts a new block.
                close(false);
            } else {
                body.push_back(line);
                continue;
            }
        }
        if (fence) {
            open = FencedBlock{};
            open->tag = trim(t.substr(3));
            open->preceding_line = last_nonempty;
            continue;
        }
        if (!t.empty()) last_nonempty = t;
    }
    if (open) close(false);
    return blocks;
}

// ---------------------------------------------------------------------------

namespace {

// Drops '#' and '//' comments and trailing commas outside string literals.
std::string strip_json_noise(std::string_view in) {
    std::string out;
    bool in_str = false;
    for (size_t i = 0; i < in.size(); ++i) {
        char c = in[i];
        if (in_str) {
            out += c;
            if (c == '\\' && i + 1 < in.size()) {
                out += in[++i];
            } else if (c == '"') {
                in_str = false;
            }
            continue;
        }
        if (c == '"') {
            in_str = true;
            out += c;
        } else if (c == '#' || (c == '/' && i + 1 < in.size() && in[i + 1] == '/')) {
            while (i < in.size() && in[i] != '\n') ++i;
            if (i < in.size()) out += '\n';
        } else if (c == ',') {
            size_t j = i + 1;
            // Skip whitespace and comments to see what follows.
            while (j < in.size()) {
                if (std::isspace(static_cast<unsigned char>(in[j]))) {
                    ++j;
                } else if (in[j] == '#' || (in[j] == '/' && j + 1 < in.size() && in[j + 1] == '/')) {
                    while (j < in.size() && in[j] != '\n') ++j;
                } else {
                    break;
                }
            }
            if (j < in.size() && (in[j] == '}' || in[j] == ']')) continue;
            out += c;
        } else {
            out += c;
        }
    }
    return out;
}

std::string unwrap_double_braces(std::string s) {
    for (;;) {
        std::string t = trim(s);
        if (t.size() < 4 || t.front() != '{' || t.back() != '}') return t;
        std::string inner = trim(std::string_view(t).substr(1, t.size() - 2));
        if (inner.empty() || inner.front() != '{' || inner.back() != '}') return t;
        s = inner;
    }
}

}  // namespace

ordered_json parse_lenient_json(std::string_view text) {
    std::string cleaned = unwrap_double_braces(strip_json_noise(text));
    try {
        return ordered_json::parse(cleaned);
    } catch (const json::parse_error& e) {
        throw PlanParseError(std::string("block is not valid JSON: ") + e.what(), std::string(text));
    }
}

namespace {

std::vector<std::string> string_items(const ordered_json& v, const std::string& key, const std::string& raw) {
    std::vector<std::string> out;
    auto take = [&](const ordered_json& x) {
        if (!x.is_string()) throw PlanParseError("'" + key + "' must hold strings", raw);
        std::string s = trim(x.get<std::string>());
        if (!s.empty()) out.push_back(std::move(s));
    };
    if (v.is_array()) {
        for (const auto& x : v) take(x);
    } else if (v.is_null()) {
    } else {
        take(v);
    }
    return out;
}

std::string normalize_key(std::string k) {
    for (auto& c : k) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (c == '_' || c == '-') c = ' ';
    }
    k = trim(k);
    auto z = k.find("optimization");
    if (z != std::string::npos) k.replace(z, 12, "optimisation");
    return k;
}

AgentPlan parse_repair(const ordered_json& j, const std::string& raw) {
    if (!j.is_object()) throw PlanParseError("error_suggestion block must be an object", raw);
    if (!j.contains("local_error_suggestion") && !j.contains("crossfile_error_suggestion"))
        throw PlanParseError("expected local_error_suggestion and/or crossfile_error_suggestion", raw);
    RepairPlan r;
    if (j.contains("local_error_suggestion"))
        r.local_suggestions = string_items(j["local_error_suggestion"], "local_error_suggestion", raw);
    if (j.contains("crossfile_error_suggestion"))
        r.crossfile_suggestions = string_items(j["crossfile_error_suggestion"], "crossfile_error_suggestion", raw);
    if (r.local_suggestions.empty() && r.crossfile_suggestions.empty())
        throw PlanParseError("repair plan has no suggestions", raw);
    AgentPlan p;
    p.kind = PlanKind::Repair;
    p.repair = std::move(r);
    return p;
}

AgentPlan parse_correction(const ordered_json& j, const std::string& raw) {
    std::vector<std::string> items;
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            auto more = string_items(v, k, raw);
            items.insert(items.end(), more.begin(), more.end());
        }
    } else if (j.is_array()) {
        items = string_items(j, "suggestions", raw);
    } else {
        throw PlanParseError("functionality_suggestion block must be an object or list", raw);
    }
    if (items.empty()) throw PlanParseError("correction plan has no suggestions", raw);
    AgentPlan p;
    p.kind = PlanKind::Correction;
    p.correction = std::move(items);
    return p;
}

AgentPlan parse_acceleration(const ordered_json& j, const std::string& raw) {
    if (!j.is_object()) throw PlanParseError("acceleration block must be an object", raw);
    std::map<std::string, const ordered_json*> fields;
    for (const auto& [k, v] : j.items()) fields[normalize_key(k)] = &v;
    auto one = [&](const char* key) {
        auto it = fields.find(key);
        if (it == fields.end()) throw PlanParseError(std::string("missing field '") + key + "'", raw);
        if (!it->second->is_string())
            throw PlanParseError(std::string("'") + key + "' must be exactly one string, not a list", raw);
        std::string s = trim(it->second->get<std::string>());
        if (s.empty()) throw PlanParseError(std::string("'") + key + "' is empty", raw);
        return s;
    };
    AgentPlan p;
    p.kind = PlanKind::Acceleration;
    p.acceleration = AccelerationPlan{one("bottleneck"), one("optimisation method"), one("modification plan")};
    return p;
}

}  // namespace

AgentPlan parse_plan(std::string_view response, PlanKind expected) {
    const std::string_view tag = block_tag(expected);
    const FencedBlock* found = nullptr;
    auto blocks = find_fenced_blocks(response);
    for (const auto& b : blocks) {
        std::string t = b.tag;
        std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
        if (t == tag) found = &b;
    }
    if (!found)
        fail(ErrorCode::NoBlockFound, "response has no ```" + std::string(tag) + " block");
    ordered_json j = parse_lenient_json(found->body);
    switch (expected) {
        case PlanKind::Repair: return parse_repair(j, found->body);
        case PlanKind::Correction: return parse_correction(j, found->body);
        case PlanKind::Acceleration: return parse_acceleration(j, found->body);
    }
    fail(ErrorCode::InvalidArgument, "unknown plan kind");
}

json to_json(const AgentPlan& p) {
    json j = {{"kind", to_string(p.kind)}};
    if (p.repair) {
        j["local_suggestions"] = p.repair->local_suggestions;
        j["crossfile_suggestions"] = p.repair->crossfile_suggestions;
    }
    if (p.correction) j["suggestions"] = *p.correction;
    if (p.acceleration) {
        j["bottleneck"] = p.acceleration->bottleneck;
        j["method"] = p.acceleration->method;
        j["plan"] = p.acceleration->plan;
    }
    return j;
}

AgentPlan plan_from_json(const json& j) {
    AgentPlan p;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "Repair") {
        p.kind = PlanKind::Repair;
        p.repair = RepairPlan{j.at("local_suggestions").get<std::vector<std::string>>(),
                              j.at("crossfile_suggestions").get<std::vector<std::string>>()};
    } else if (kind == "Correction") {
        p.kind = PlanKind::Correction;
        p.correction = j.at("suggestions").get<std::vector<std::string>>();
    } else if (kind == "Acceleration") {
        p.kind = PlanKind::Acceleration;
        p.acceleration = AccelerationPlan{j.at("bottleneck").get<std::string>(), j.at("method").get<std::string>(),
                                          j.at("plan").get<std::string>()};
    } else {
        fail(ErrorCode::ParseError, "unknown plan kind '" + kind + "'");
    }
    return p;
}

std::string render_plan(const AgentPlan& p) {
    std::ostringstream out;
    auto list = [&](const char* title, const std::vector<std::string>& items) {
        out << title << ":\n";
        if (items.empty()) out << "  (none)\n";
        for (size_t i = 0; i < items.size(); ++i) out << "  " << i + 1 << ". " << items[i] << "\n";
    };
    if (p.repair) {
        list("Fixes for errors inside your files", p.repair->local_suggestions);
        list("Fixes for errors reported against other framework files", p.repair->crossfile_suggestions);
    }
    if (p.correction) list("Correctness fixes", *p.correction);
    if (p.acceleration) {
        out << "Bottleneck: " << p.acceleration->bottleneck << "\n";
        out << "Optimisation method: " << p.acceleration->method << "\n";
        out << "Modification plan: " << p.acceleration->plan << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------

namespace {

const std::regex kFileNameRe(R"(^[A-Za-z0-9_.\-/\\]+\.(h|hh|hpp|hxx|c|cc|cpp|cxx|cu|inl|ipp)$)");

// "// CPUArgMax.cpp", "CPUArgMax.cpp:", "**CPUArgMax.cpp**" -> "CPUArgMax.cpp".
std::optional<std::string> file_name_in(std::string_view line) {
    std::string s = trim(line);
    for (const char* p : {"//", "/*", "#", "*", "File:", "file:", "Filename:", "filename:"}) {
        std::string_view pv(p);
        if (s.rfind(pv, 0) == 0) s = trim(std::string_view(s).substr(pv.size()));
    }
    auto strip_suffix = [&](std::string_view suf) {
        if (s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0) {
            s = trim(std::string_view(s).substr(0, s.size() - suf.size()));
            return true;
        }
        return false;
    };
    while (strip_suffix("*/") || strip_suffix(":") || strip_suffix("*") || strip_suffix("`")) {
    }
    while (!s.empty() && (s.front() == '*' || s.front() == '`')) s = trim(std::string_view(s).substr(1));
    if (!std::regex_match(s, kFileNameRe)) return std::nullopt;
    return basename_of(s);
}

}  // namespace

KernelCandidate parse_candidate(std::string_view response, const TaskSpec& task, int iteration) {
    std::map<std::string, std::string> found;
    for (const auto& block : find_fenced_blocks(response)) {
        std::vector<std::string> lines = split_lines(block.body);
        size_t first = 0;
        while (first < lines.size() && trim(lines[first]).empty()) ++first;

        std::optional<std::string> name;
        size_t body_start = 0;
        if (first < lines.size()) {
            name = file_name_in(lines[first]);
            if (name) body_start = first + 1;
        }
        if (!name && !block.preceding_line.empty()) name = file_name_in(block.preceding_line);
        if (!name) continue;

        if (std::find(task.target_file_names.begin(), task.target_file_names.end(), *name) ==
            task.target_file_names.end())
            fail(ErrorCode::ExtraneousFile, "response contains '" + *name + "', which task " + task.id + " does not expect");

        std::string text;
        for (size_t i = body_start; i < lines.size(); ++i) text += lines[i] + "\n";
        found[*name] = std::move(text);
    }

    KernelCandidate c;
    c.task_id = task.id;
    c.iteration = iteration;
    for (const auto& target : task.target_file_names) {
        auto it = found.find(target);
        if (it == found.end()) fail(ErrorCode::MissingFile, "response has no code block for " + target);
        c.files.emplace_back(target, it->second);
    }
    return c;
}

}  // namespace kf
