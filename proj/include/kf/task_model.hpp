#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kf {

enum class OperatorCategory {
    Unary,
    Binary,
    Trigonometry,
    Activation,
    Normalization,
    Pooling,
    Convolution,
    Matrix,
    Reduction,
    Tensor,
    Logic,
    Others,
};

inline constexpr std::array<OperatorCategory, 12> kAllCategories = {
    OperatorCategory::Unary,        OperatorCategory::Binary,  OperatorCategory::Trigonometry,
    OperatorCategory::Activation,   OperatorCategory::Normalization, OperatorCategory::Pooling,
    OperatorCategory::Convolution,  OperatorCategory::Matrix,  OperatorCategory::Reduction,
    OperatorCategory::Tensor,       OperatorCategory::Logic,   OperatorCategory::Others,
};

std::string_view to_string(OperatorCategory c);
std::optional<OperatorCategory> parse_category(std::string_view name);

// How an operator is realised inside the target framework. Decides how many
// source files a candidate has to provide.
enum class Mechanism { Atomic, Geometric, Composite };

std::string_view to_string(Mechanism m);
std::optional<Mechanism> parse_mechanism(std::string_view name);

// Atomic kernels ship a declaration and an implementation file; the other
// mechanisms live in a single source file.
constexpr std::size_t file_count(Mechanism m) { return m == Mechanism::Atomic ? 2 : 1; }

// Operator attributes are kept as strings; the typed accessors only parse.
class AttributeMap {
public:
    AttributeMap() = default;
    explicit AttributeMap(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    double get_float(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::int64_t> get_int_list(const std::string& key) const;

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    const std::map<std::string, std::string>& values() const { return values_; }
    bool empty() const { return values_.empty(); }

    friend bool operator==(const AttributeMap&, const AttributeMap&) = default;

private:
    std::map<std::string, std::string> values_;
};

struct TaskSpec {
    std::string id;
    std::string operator_name;
    OperatorCategory category = OperatorCategory::Others;
    Mechanism mechanism = Mechanism::Atomic;
    AttributeMap attributes;
    std::filesystem::path reference_graph;
    std::vector<std::filesystem::path> reference_inputs;
    std::vector<std::filesystem::path> reference_outputs;
    std::vector<std::string> target_file_names;
    std::optional<double> baseline_latency_ms;
    // Optional reference model source (e.g. the PyTorch module) shown to the coder.
    std::optional<std::filesystem::path> reference_model;
    std::string description;
};

struct Manifest {
    std::string schema_version;
    std::vector<TaskSpec> tasks;

    const TaskSpec* find(std::string_view id) const;
    const TaskSpec& at(std::string_view id) const;
};

inline constexpr std::string_view kManifestSchemaVersion = "1";

// Loads and validates a manifest. Relative paths resolve against the manifest's
// directory; every referenced file must exist.
Manifest load_manifest(const std::filesystem::path& path);

// Same validation over an in-memory document; `base_dir` anchors relative paths.
Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir);

// Checks the TaskSpec invariants, throwing ValidationError naming the task.
void validate_task(const TaskSpec& task);

std::map<OperatorCategory, std::size_t> category_histogram(const Manifest& manifest);

}  // namespace kf
