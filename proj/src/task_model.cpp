#include "kf/task_model.hpp"

#include "kf/error.hpp"
#include "kf/fsutil.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;

namespace kf {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::int64_t parse_int(std::string_view text, const std::string& key) {
    std::string t = trim(text);
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        fail(ErrorCode::ValidationError, "attribute '" + key + "' is not an integer: " + std::string(text));
    return value;
}

}  // namespace

std::string_view to_string(OperatorCategory c) {
    switch (c) {
        case OperatorCategory::Unary: return "Unary";
        case OperatorCategory::Binary: return "Binary";
        case OperatorCategory::Trigonometry: return "Trigonometry";
        case OperatorCategory::Activation: return "Activation";
        case OperatorCategory::Normalization: return "Normalization";
        case OperatorCategory::Pooling: return "Pooling";
        case OperatorCategory::Convolution: return "Convolution";
        case OperatorCategory::Matrix: return "Matrix";
        case OperatorCategory::Reduction: return "Reduction";
        case OperatorCategory::Tensor: return "Tensor";
        case OperatorCategory::Logic: return "Logic";
        case OperatorCategory::Others: return "Others";
    }
    return "Others";
}

std::optional<OperatorCategory> parse_category(std::string_view name) {
    std::string key = lower(name);
    for (auto c : kAllCategories) {
        if (lower(to_string(c)) == key) return c;
    }
    return std::nullopt;
}

std::string_view to_string(Mechanism m) {
    switch (m) {
        case Mechanism::Atomic: return "Atomic";
        case Mechanism::Geometric: return "Geometric";
        case Mechanism::Composite: return "Composite";
    }
    return "Atomic";
}

std::optional<Mechanism> parse_mechanism(std::string_view name) {
    std::string key = lower(name);
    if (key == "atomic") return Mechanism::Atomic;
    if (key == "geometric") return Mechanism::Geometric;
    if (key == "composite") return Mechanism::Composite;
    return std::nullopt;
}

const std::string& AttributeMap::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorCode::ValidationError, "missing attribute '" + key + "'");
    return it->second;
}

std::int64_t AttributeMap::get_int(const std::string& key) const { return parse_int(get(key), key); }

double AttributeMap::get_float(const std::string& key) const {
    std::string t = trim(get(key));
    try {
        size_t used = 0;
        double v = std::stod(t, &used);
        if (used == t.size()) return v;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::ValidationError, "attribute '" + key + "' is not a number: " + t);
}

bool AttributeMap::get_bool(const std::string& key) const {
    std::string t = lower(trim(get(key)));
    if (t == "1" || t == "true") return true;
    if (t == "0" || t == "false") return false;
    fail(ErrorCode::ValidationError, "attribute '" + key + "' is not a boolean: " + t);
}

std::vector<std::int64_t> AttributeMap::get_int_list(const std::string& key) const {
    std::string t = trim(get(key));
    if (t.size() >= 2 && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
    std::vector<std::int64_t> out;
    if (trim(t).empty()) return out;
    size_t start = 0;
    while (start <= t.size()) {
        size_t comma = t.find(',', start);
        if (comma == std::string::npos) comma = t.size();
        out.push_back(parse_int(std::string_view(t).substr(start, comma - start), key));
        start = comma + 1;
    }
    return out;
}

const TaskSpec* Manifest::find(std::string_view id) const {
    for (const auto& t : tasks)
        if (t.id == id) return &t;
    return nullptr;
}

const TaskSpec& Manifest::at(std::string_view id) const {
    if (const auto* t = find(id)) return *t;
    fail(ErrorCode::ValidationError, "unknown task id '" + std::string(id) + "'");
}

void validate_task(const TaskSpec& task) {
    auto bad = [&](const std::string& what) {
        fail(ErrorCode::ValidationError, "task '" + task.id + "': " + what);
    };
    if (task.id.empty()) fail(ErrorCode::ValidationError, "task with empty id");
    if (task.operator_name.empty()) bad("operator_name is empty");
    if (task.target_file_names.size() != file_count(task.mechanism)) {
        bad(std::string(to_string(task.mechanism)) + " mechanism requires " +
            std::to_string(file_count(task.mechanism)) + " target file(s), got " +
            std::to_string(task.target_file_names.size()));
    }
    std::set<std::string> seen;
    for (const auto& name : task.target_file_names) {
        if (name.empty() || name.find_first_of("/\\") != std::string::npos) bad("invalid target file name '" + name + "'");
        if (!seen.insert(name).second) bad("duplicate target file name '" + name + "'");
    }
    if (task.reference_inputs.empty()) bad("reference_inputs is empty");
    if (task.reference_outputs.empty()) bad("reference_outputs is empty");
    if (task.baseline_latency_ms && !(*task.baseline_latency_ms > 0.0)) bad("baseline_latency_ms must be positive");

    auto must_exist = [&](const fs::path& p, const char* field) {
        if (!fs::is_regular_file(p)) bad(std::string(field) + " file does not exist: " + p.string());
    };
    must_exist(task.reference_graph, "reference_graph");
    for (const auto& p : task.reference_inputs) must_exist(p, "reference_inputs");
    for (const auto& p : task.reference_outputs) must_exist(p, "reference_outputs");
    if (task.reference_model) must_exist(*task.reference_model, "reference_model");
}

namespace {

const std::set<std::string> kTaskFields = {
    "id", "operator_name", "category", "mechanism", "attributes", "reference_graph", "reference_inputs",
    "reference_outputs", "target_file_names", "baseline_latency_ms", "reference_model", "description",
};

std::string attribute_to_string(const json& v, const std::string& where) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
    if (v.is_number()) return v.dump();
    if (v.is_array()) {
        std::string out;
        for (size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(ErrorCode::ParseError, where + ": list attributes must be numeric");
            if (i) out += ",";
            out += v[i].dump();
        }
        return out;
    }
    fail(ErrorCode::ParseError, where + ": unsupported attribute value " + v.dump());
}

TaskSpec parse_task(const json& j, const fs::path& base, size_t index) {
    std::string where = "tasks[" + std::to_string(index) + "]";
    if (!j.is_object()) fail(ErrorCode::ParseError, where + " is not an object");
    if (j.contains("id") && j["id"].is_string()) where += " (" + j["id"].get<std::string>() + ")";
    for (const auto& [key, _] : j.items()) {
        if (!kTaskFields.count(key)) fail(ErrorCode::ValidationError, where + ": unknown field '" + key + "'");
    }
    auto req_string = [&](const char* key) -> std::string {
        if (!j.contains(key) || !j[key].is_string())
            fail(ErrorCode::ParseError, where + ": field '" + key + "' must be a string");
        return j[key].get<std::string>();
    };
    auto string_list = [&](const char* key) -> std::vector<std::string> {
        if (!j.contains(key) || !j[key].is_array())
            fail(ErrorCode::ParseError, where + ": field '" + key + "' must be a list");
        std::vector<std::string> out;
        for (const auto& e : j[key]) {
            if (!e.is_string()) fail(ErrorCode::ParseError, where + ": field '" + key + "' must hold strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    };
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

    TaskSpec t;
    t.id = req_string("id");
    t.operator_name = req_string("operator_name");
    auto cat_name = req_string("category");
    auto cat = parse_category(cat_name);
    if (!cat) fail(ErrorCode::ValidationError, where + ": unknown category '" + cat_name + "'");
    t.category = *cat;
    auto mech_name = req_string("mechanism");
    auto mech = parse_mechanism(mech_name);
    if (!mech) fail(ErrorCode::ValidationError, where + ": unknown mechanism '" + mech_name + "'");
    t.mechanism = *mech;
    if (j.contains("attributes")) {
        if (!j["attributes"].is_object()) fail(ErrorCode::ParseError, where + ": attributes must be an object");
        for (const auto& [k, v] : j["attributes"].items()) t.attributes.set(k, attribute_to_string(v, where + ".attributes." + k));
    }
    t.reference_graph = resolve(req_string("reference_graph"));
    for (const auto& p : string_list("reference_inputs")) t.reference_inputs.push_back(resolve(p));
    for (const auto& p : string_list("reference_outputs")) t.reference_outputs.push_back(resolve(p));
    t.target_file_names = string_list("target_file_names");
    if (j.contains("baseline_latency_ms") && !j["baseline_latency_ms"].is_null()) {
        if (!j["baseline_latency_ms"].is_number())
            fail(ErrorCode::ParseError, where + ": baseline_latency_ms must be a number");
        t.baseline_latency_ms = j["baseline_latency_ms"].get<double>();
    }
    if (j.contains("reference_model")) t.reference_model = resolve(req_string("reference_model"));
    if (j.contains("description")) t.description = req_string("description");
    return t;
}

}  // namespace

Manifest parse_manifest(std::string_view text, const fs::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ParseError, std::string("manifest: ") + e.what());
    }
    if (!doc.is_object()) fail(ErrorCode::ParseError, "manifest root must be an object");
    for (const auto& [key, _] : doc.items()) {
        if (key != "schema_version" && key != "tasks")
            fail(ErrorCode::ValidationError, "manifest: unknown field '" + key + "'");
    }
    if (!doc.contains("schema_version") || !doc["schema_version"].is_string())
        fail(ErrorCode::ParseError, "manifest: schema_version must be a string");
    Manifest m;
    m.schema_version = doc["schema_version"].get<std::string>();
    if (m.schema_version != kManifestSchemaVersion)
        fail(ErrorCode::ValidationError, "manifest: unsupported schema_version '" + m.schema_version + "'");
    if (!doc.contains("tasks") || !doc["tasks"].is_array()) fail(ErrorCode::ParseError, "manifest: tasks must be a list");

    std::set<std::string> ids;
    size_t index = 0;
    for (const auto& jt : doc["tasks"]) {
        TaskSpec t = parse_task(jt, base_dir, index++);
        if (!ids.insert(t.id).second) fail(ErrorCode::ValidationError, "duplicate task id '" + t.id + "'");
        validate_task(t);
        m.tasks.push_back(std::move(t));
    }
    return m;
}

Manifest load_manifest(const fs::path& path) {
    if (!fs::is_regular_file(path)) fail(ErrorCode::IoError, "manifest not found: " + path.string());
    return parse_manifest(read_text_file(path), fs::absolute(path).parent_path());
}

std::map<OperatorCategory, std::size_t> category_histogram(const Manifest& manifest) {
    std::map<OperatorCategory, std::size_t> hist;
    for (auto c : kAllCategories) hist[c] = 0;
    for (const auto& t : manifest.tasks) ++hist[t.category];
    return hist;
}

}  // namespace kf
