#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace kf {

struct GraphNode {
    std::string op_type;
    std::string name;
    // Typed attribute values (number, string, bool, list) kept as JSON.
    std::map<std::string, nlohmann::json> attributes;
    std::vector<std::vector<std::int64_t>> input_shapes;
    std::vector<std::vector<std::int64_t>> output_shapes;
    std::vector<std::string> dtypes;
};

// Document schema:
//   {"nodes": [{"op_type": str, "name": str, "attributes": {k: value},
//               "input_shapes": [[int]], "output_shapes": [[int]], "dtypes": [str]}]}
struct GraphDesc {
    std::vector<GraphNode> nodes;
};

enum class MismatchSeverity { NodeType, Attribute, Shape, Dtype, Topology };

std::string_view to_string(MismatchSeverity s);

struct GraphMismatch {
    std::string path;
    std::string reference_value;
    std::string target_value;
    MismatchSeverity severity = MismatchSeverity::Attribute;

    friend bool operator==(const GraphMismatch&, const GraphMismatch&) = default;
};

inline constexpr std::string_view kAbsent = "<absent>";

// ParseError carries the JSON path of the offending element.
GraphDesc parse_graph(std::string_view document);
GraphDesc parse_graph_json(const nlohmann::json& document);

nlohmann::json to_json(const GraphDesc& g);

// Positional comparison. A node-count difference is reported first as one
// Topology mismatch at "nodes.count"; the common prefix is then compared node by
// node, fields in lexicographic path order. Node names are labels and are not
// compared.
std::vector<GraphMismatch> diff_graphs(const GraphDesc& reference, const GraphDesc& target);

nlohmann::json to_json(const std::vector<GraphMismatch>& mismatches);

}  // namespace kf
