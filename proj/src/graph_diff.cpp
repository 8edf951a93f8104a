#include "kf/graph_diff.hpp"

#include "kf/error.hpp"

#include <set>

namespace kf {

std::string_view to_string(MismatchSeverity s) {
    switch (s) {
        case MismatchSeverity::NodeType: return "NodeType";
        case MismatchSeverity::Attribute: return "Attribute";
        case MismatchSeverity::Shape: return "Shape";
        case MismatchSeverity::Dtype: return "Dtype";
        case MismatchSeverity::Topology: return "Topology";
    }
    return "?";
}

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    fail(ErrorCode::ParseError, "graph document at " + path + ": " + what);
}

std::vector<std::vector<std::int64_t>> parse_shapes(const json& j, const std::string& path) {
    if (!j.is_array()) bad(path, "expected a list of shapes");
    std::vector<std::vector<std::int64_t>> out;
    for (size_t i = 0; i < j.size(); ++i) {
        std::string p = path + "[" + std::to_string(i) + "]";
        if (!j[i].is_array()) bad(p, "expected a list of dimensions");
        std::vector<std::int64_t> dims;
        for (size_t d = 0; d < j[i].size(); ++d) {
            const json& v = j[i][d];
            if (!v.is_number_integer()) bad(p + "[" + std::to_string(d) + "]", "dimension must be an integer");
            if (v.get<std::int64_t>() < 0) bad(p + "[" + std::to_string(d) + "]", "dimension must be nonnegative");
            dims.push_back(v.get<std::int64_t>());
        }
        out.push_back(std::move(dims));
    }
    return out;
}

const std::set<std::string> kNodeKeys = {"op_type", "name", "attributes", "input_shapes", "output_shapes", "dtypes"};

GraphNode parse_node(const json& j, const std::string& path) {
    if (!j.is_object()) bad(path, "node must be an object");
    for (const auto& [k, v] : j.items())
        if (!kNodeKeys.count(k)) bad(path + "." + k, "unknown field");
    GraphNode n;
    if (!j.contains("op_type") || !j["op_type"].is_string() || j["op_type"].get<std::string>().empty())
        bad(path + ".op_type", "required non-empty string");
    n.op_type = j["op_type"].get<std::string>();
    if (!j.contains("name") || !j["name"].is_string()) bad(path + ".name", "required string");
    n.name = j["name"].get<std::string>();
    if (j.contains("attributes")) {
        if (!j["attributes"].is_object()) bad(path + ".attributes", "expected an object");
        for (const auto& [k, v] : j["attributes"].items()) {
            if (v.is_null() || v.is_object()) bad(path + ".attributes." + k, "unsupported attribute value type");
            n.attributes[k] = v;
        }
    }
    if (j.contains("input_shapes")) n.input_shapes = parse_shapes(j["input_shapes"], path + ".input_shapes");
    if (j.contains("output_shapes")) n.output_shapes = parse_shapes(j["output_shapes"], path + ".output_shapes");
    if (j.contains("dtypes")) {
        if (!j["dtypes"].is_array()) bad(path + ".dtypes", "expected a list of strings");
        for (size_t i = 0; i < j["dtypes"].size(); ++i) {
            if (!j["dtypes"][i].is_string()) bad(path + ".dtypes[" + std::to_string(i) + "]", "expected a string");
            n.dtypes.push_back(j["dtypes"][i].get<std::string>());
        }
    }
    return n;
}

std::string render_shape(const std::vector<std::int64_t>& s) { return json(s).dump(); }

template <class T, class Render>
void diff_list(const std::vector<T>& a, const std::vector<T>& b, const std::string& base, MismatchSeverity sev,
               Render render, std::vector<GraphMismatch>& out) {
    size_t n = std::max(a.size(), b.size());
    for (size_t i = 0; i < n; ++i) {
        std::string ra = i < a.size() ? render(a[i]) : std::string(kAbsent);
        std::string rb = i < b.size() ? render(b[i]) : std::string(kAbsent);
        if (ra != rb) out.push_back({base + "[" + std::to_string(i) + "]", ra, rb, sev});
    }
}

}  // namespace

GraphDesc parse_graph_json(const json& doc) {
    if (!doc.is_object()) bad("$", "expected an object");
    for (const auto& [k, v] : doc.items())
        if (k != "nodes") bad("$." + k, "unknown field");
    if (!doc.contains("nodes") || !doc["nodes"].is_array()) bad("$.nodes", "required list");
    GraphDesc g;
    std::set<std::string> names;
    for (size_t i = 0; i < doc["nodes"].size(); ++i) {
        std::string path = "$.nodes[" + std::to_string(i) + "]";
        GraphNode n = parse_node(doc["nodes"][i], path);
        if (!names.insert(n.name).second) bad(path + ".name", "duplicate node name '" + n.name + "'");
        g.nodes.push_back(std::move(n));
    }
    return g;
}

GraphDesc parse_graph(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ParseError, std::string("graph document: ") + e.what());
    }
    return parse_graph_json(doc);
}

json to_json(const GraphDesc& g) {
    json nodes = json::array();
    for (const auto& n : g.nodes) {
        json attrs = json::object();
        for (const auto& [k, v] : n.attributes) attrs[k] = v;
        nodes.push_back({{"op_type", n.op_type},
                         {"name", n.name},
                         {"attributes", attrs},
                         {"input_shapes", n.input_shapes},
                         {"output_shapes", n.output_shapes},
                         {"dtypes", n.dtypes}});
    }
    return {{"nodes", nodes}};
}

std::vector<GraphMismatch> diff_graphs(const GraphDesc& reference, const GraphDesc& target) {
    std::vector<GraphMismatch> out;
    if (reference.nodes.size() != target.nodes.size())
        out.push_back({"nodes.count", std::to_string(reference.nodes.size()), std::to_string(target.nodes.size()),
                       MismatchSeverity::Topology});
    size_t n = std::min(reference.nodes.size(), target.nodes.size());
    for (size_t i = 0; i < n; ++i) {
        const GraphNode& a = reference.nodes[i];
        const GraphNode& b = target.nodes[i];
        const std::string base = "node[" + std::to_string(i) + "].";

        // Fields are visited in lexicographic order of their path names.
        std::set<std::string> keys;
        for (const auto& [k, v] : a.attributes) keys.insert(k);
        for (const auto& [k, v] : b.attributes) keys.insert(k);
        for (const auto& k : keys) {
            auto ia = a.attributes.find(k);
            auto ib = b.attributes.find(k);
            // dump() distinguishes 1, 1.0, "1" and true.
            std::string ra = ia == a.attributes.end() ? std::string(kAbsent) : ia->second.dump();
            std::string rb = ib == b.attributes.end() ? std::string(kAbsent) : ib->second.dump();
            if (ra != rb) out.push_back({base + "attributes." + k, ra, rb, MismatchSeverity::Attribute});
        }
        diff_list(a.dtypes, b.dtypes, base + "dtypes", MismatchSeverity::Dtype,
                  [](const std::string& s) { return s; }, out);
        diff_list(a.input_shapes, b.input_shapes, base + "input_shapes", MismatchSeverity::Shape, render_shape, out);
        if (a.op_type != b.op_type) out.push_back({base + "op_type", a.op_type, b.op_type, MismatchSeverity::NodeType});
        diff_list(a.output_shapes, b.output_shapes, base + "output_shapes", MismatchSeverity::Shape, render_shape, out);
    }
    return out;
}

json to_json(const std::vector<GraphMismatch>& mismatches) {
    json out = json::array();
    for (const auto& m : mismatches)
        out.push_back({{"path", m.path},
                       {"reference", m.reference_value},
                       {"target", m.target_value},
                       {"severity", to_string(m.severity)}});
    return out;
}

}  // namespace kf
